use super::discrete::JointDistribution;
use crate::error::{bail, Result};
use crate::numerics::Rng;

/// `n` paired real-valued observations of `(x1, x2, y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBatch {
    x1: Vec<Vec<f64>>,
    x2: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
}

impl SampleBatch {
    pub fn new(x1: Vec<Vec<f64>>, x2: Vec<Vec<f64>>, y: Vec<Vec<f64>>) -> Result<Self> {
        let n = x1.len();
        if x2.len() != n || y.len() != n {
            bail!(
                Dimension,
                "sample batch columns have {n}, {} and {} rows",
                x2.len(),
                y.len()
            );
        }
        if n < 2 {
            bail!(Dimension, "sample batch needs at least 2 samples, got {n}");
        }
        for (name, col) in [("x1", &x1), ("x2", &x2), ("y", &y)] {
            let d = col[0].len();
            if d == 0 || col.iter().any(|r| r.len() != d) {
                bail!(Dimension, "{name} vectors must share one positive length");
            }
            if col.iter().flatten().any(|v| !v.is_finite()) {
                bail!(Numeric, "{name} contains a non-finite value");
            }
        }
        Ok(Self { x1, x2, y })
    }

    pub fn len(&self) -> usize {
        self.x1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x1.is_empty()
    }

    pub fn x1(&self) -> &[Vec<f64>] {
        &self.x1
    }

    pub fn x2(&self) -> &[Vec<f64>] {
        &self.x2
    }

    pub fn y(&self) -> &[Vec<f64>] {
        &self.y
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.x1[0].len(), self.x2[0].len(), self.y[0].len()]
    }
}

/// Reduces each observed vector to one scalar before binning.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Summarizer {
    /// The vector's first coordinate.
    FirstCoordinate,
    /// Dot product with a fixed standard-normal direction; the direction for variable
    /// `k` (x1 = 0, x2 = 1, y = 2) is `Rng::new(seed).fork(k).normals(dim)`.
    RandomProjection { seed: u64 },
}

impl Default for Summarizer {
    fn default() -> Self {
        Summarizer::RandomProjection { seed: 0x5eed }
    }
}

impl Summarizer {
    pub fn summarize(&self, column: &[Vec<f64>], variable: usize) -> Vec<f64> {
        match *self {
            Summarizer::FirstCoordinate => column.iter().map(|v| v[0]).collect(),
            Summarizer::RandomProjection { seed } => {
                let dir = Rng::new(seed).fork(variable as u64).normals(column[0].len());
                column
                    .iter()
                    .map(|v| v.iter().zip(&dir).fold(0.0, |acc, (a, b)| acc + a * b))
                    .collect()
            }
        }
    }
}

/// Equal-width bin index over `[min, max]`; a constant variable lands entirely in bin 0.
fn bin_indices(values: &[f64], bins: usize) -> Vec<usize> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = hi - lo;
    values
        .iter()
        .map(|&v| {
            if width > 0.0 {
                (((v - lo) / width * bins as f64) as usize).min(bins - 1)
            } else {
                0
            }
        })
        .collect()
}

/// Empirical joint of the binned scalar summaries.
pub fn quantize(samples: &SampleBatch, bins: usize, summarizer: Summarizer) -> Result<JointDistribution> {
    if bins < 2 {
        bail!(Usage, "quantization needs at least 2 bins, got {bins}");
    }
    let cols = [samples.x1(), samples.x2(), samples.y()];
    let idx: Vec<Vec<usize>> = cols
        .iter()
        .enumerate()
        .map(|(k, col)| bin_indices(&summarizer.summarize(col, k), bins))
        .collect();
    let mut counts = vec![0.0; bins * bins * bins];
    for s in 0..samples.len() {
        counts[(idx[0][s] * bins + idx[1][s]) * bins + idx[2][s]] += 1.0;
    }
    JointDistribution::from_counts([bins; 3], &counts)
}

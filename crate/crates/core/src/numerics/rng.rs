use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Tensor;
use crate::error::{bail, Result};

/// Seeded generator with a fixed algorithm.
///
/// * Bits: ChaCha8 keyed by `seed` (via `SeedableRng::seed_from_u64`), stream 0.
/// * Uniforms: `(next_u64 >> 11) * 2^-53`, i.e. 53-bit doubles in `[0, 1)`.
/// * Normals: Box–Muller on two uniforms, `u1` mapped to `(0, 1]`; both variates
///   of a pair are used, cosine branch first.
/// * Splitting: `fork(label)` seeds a child with the first `u64` of ChaCha8 keyed by
///   the parent seed on stream `label + 1`. Children depend only on the parent seed
///   and the label, never on how much of the parent stream was consumed.
#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn fork(&self, label: u64) -> Rng {
        let mut keyed = ChaCha8Rng::seed_from_u64(self.seed);
        keyed.set_stream(label.wrapping_add(1));
        Rng::new(keyed.next_u64())
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n` (n > 0), by rejection so every value is equally likely.
    pub fn below(&mut self, n: usize) -> usize {
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return (v % n) as usize;
            }
        }
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(v) = self.spare_normal.take() {
            return v;
        }
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(radius * angle.sin());
        radius * angle.cos()
    }

    pub fn normals(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.normal()).collect()
    }

    /// Fisher–Yates shuffle driven by `below`.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}

/// `rows × cols` matrix of i.i.d. standard normal draws, filled row by row.
pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut Rng) -> Result<Tensor> {
    if rows == 0 || cols == 0 {
        bail!(Dimension, "gaussian matrix needs positive extents, got {rows}x{cols}");
    }
    Tensor::matrix(rows, cols, rng.normals(rows * cols))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_draw() {
        let a = gaussian_matrix(1, 1, &mut Rng::new(7)).unwrap();
        let b = gaussian_matrix(1, 1, &mut Rng::new(7)).unwrap();
        assert_eq!(a.data()[0].to_bits(), b.data()[0].to_bits());
    }

    #[test]
    fn moments_of_a_large_matrix() {
        let m = gaussian_matrix(100, 100, &mut Rng::new(3)).unwrap();
        let n = m.len() as f64;
        let mean = m.data().iter().sum::<f64>() / n;
        let var = m.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.05, "mean {mean}");
        assert!(var > 0.9 && var < 1.1, "var {var}");
    }

    #[test]
    fn paper_image_matrix_shape() {
        let m = gaussian_matrix(150, 512, &mut Rng::new(1)).unwrap();
        assert_eq!(m.shape(), &[150, 512]);
    }

    #[test]
    fn zero_extent_is_an_error() {
        assert!(gaussian_matrix(0, 3, &mut Rng::new(1)).is_err());
        assert!(gaussian_matrix(3, 0, &mut Rng::new(1)).is_err());
    }

    #[test]
    fn forks_ignore_parent_consumption() {
        let mut a = Rng::new(11);
        let b = Rng::new(11);
        a.normals(17);
        let mut fa = a.fork(4);
        let mut fb = b.fork(4);
        assert_eq!(fa.next_u64(), fb.next_u64());
        assert_ne!(b.fork(4).next_u64(), b.fork(5).next_u64());
    }

    #[test]
    fn below_stays_in_range() {
        let mut r = Rng::new(5);
        assert!((0..1000).all(|_| r.below(7) < 7));
    }
}

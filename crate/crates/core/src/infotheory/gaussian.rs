//! Log-determinant mutual information for jointly Gaussian variables, in nats.

use super::quantize::SampleBatch;
use crate::error::{bail, Result};
use crate::numerics::linalg::log_det_spd;
use crate::numerics::{gaussian_matrix, matmul, Graph, Rng, Tensor, Var};

pub const DEFAULT_PROJECTION_DIM: usize = 8;
pub const DEFAULT_RIDGE: f64 = 1e-6;

/// Unbiased sample covariance (`n − 1` denominator) of row vectors.
pub fn sample_covariance(rows: &[Vec<f64>]) -> Result<Tensor> {
    let n = rows.len();
    if n < 2 {
        bail!(Numeric, "covariance needs at least 2 samples, got {n}");
    }
    let d = rows[0].len();
    if d == 0 || rows.iter().any(|r| r.len() != d) {
        bail!(Dimension, "covariance rows must share one positive length");
    }
    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = vec![0.0; d * d];
    for r in rows {
        for i in 0..d {
            let di = r[i] - mean[i];
            for j in i..d {
                cov[i * d + j] += di * (r[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = cov[i * d + j] / (n - 1) as f64;
            cov[i * d + j] = v;
            cov[j * d + i] = v;
        }
    }
    Tensor::matrix(d, d, cov)
}

fn principal(cov: &Tensor, idx: &[usize]) -> Tensor {
    let n = cov.shape()[0];
    let data = idx
        .iter()
        .flat_map(|&i| idx.iter().map(move |&j| cov.data()[i * n + j]))
        .collect();
    Tensor::from_parts(vec![idx.len(), idx.len()], data)
}

fn check_groups(n: usize, a: &[usize], b: &[usize]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        bail!(Usage, "mutual information needs two nonempty groups");
    }
    if a.iter().chain(b).any(|&i| i >= n) || a.iter().any(|i| b.contains(i)) {
        bail!(Usage, "groups must be disjoint indices below {n}");
    }
    Ok(())
}

/// `½(ln det Σ_A + ln det Σ_B − ln det Σ_AB)`.
pub fn gaussian_mi(cov: &Tensor, a: &[usize], b: &[usize]) -> Result<f64> {
    let (n, m) = cov.dims2()?;
    if n != m {
        bail!(Dimension, "covariance must be square, got {n}x{m}");
    }
    check_groups(n, a, b)?;
    let ab = [a, b].concat();
    Ok(0.5
        * (log_det_spd(&principal(cov, a))? + log_det_spd(&principal(cov, b))?
            - log_det_spd(&principal(cov, &ab))?))
}

/// Graph form of [`gaussian_mi`], differentiable through `cov`.
pub fn gaussian_mi_graph(g: &mut Graph, cov: Var, a: &[usize], b: &[usize]) -> Result<Var> {
    check_groups(g.value(cov).dims2()?.0, a, b)?;
    let ab = [a, b].concat();
    let sa = g.submatrix(cov, a)?;
    let sb = g.submatrix(cov, b)?;
    let sab = g.submatrix(cov, &ab)?;
    let (la, lb, lab) = (g.log_det(sa)?, g.log_det(sb)?, g.log_det(sab)?);
    let num = g.add(la, lb)?;
    let diff = g.sub(num, lab)?;
    g.scale(diff, 0.5)
}

/// Frozen projections `D_k × d` for `x1`, `x2` and `y`, entries N(0, 1/D_k).
///
/// When `y` has the same dimension as `x1` it reuses `x1`'s matrix, so a perfect
/// reconstruction projects to exactly the same summary as its target.
#[derive(Clone, Debug, PartialEq)]
pub struct IiProjections {
    dim: usize,
    x1: Tensor,
    x2: Tensor,
    y: Tensor,
}

impl IiProjections {
    pub fn new(dims: [usize; 3], dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 {
            bail!(Configuration, "projection dimension must be positive");
        }
        let root = Rng::new(seed);
        let draw = |k: u64, rows: usize| -> Result<Tensor> {
            let m = gaussian_matrix(rows, dim, &mut root.fork(k))?;
            let s = 1.0 / (rows as f64).sqrt();
            Tensor::new(m.shape().to_vec(), m.data().iter().map(|v| v * s).collect())
        };
        let x1 = draw(0, dims[0])?;
        let x2 = draw(1, dims[1])?;
        let y = if dims[2] == dims[0] { x1.clone() } else { draw(2, dims[2])? };
        Ok(Self { dim, x1, x2, y })
    }

    pub fn from_matrices(x1: Tensor, x2: Tensor, y: Tensor) -> Result<Self> {
        let dim = x1.dims2()?.1;
        if x2.dims2()?.1 != dim || y.dims2()?.1 != dim {
            bail!(Dimension, "projection matrices disagree on the output dimension");
        }
        Ok(Self { dim, x1, x2, y })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn input_dims(&self) -> [usize; 3] {
        [self.x1.shape()[0], self.x2.shape()[0], self.y.shape()[0]]
    }

    pub fn x1(&self) -> &Tensor {
        &self.x1
    }

    pub fn x2(&self) -> &Tensor {
        &self.x2
    }

    pub fn y(&self) -> &Tensor {
        &self.y
    }

    /// Smallest batch the surrogate accepts.
    pub fn min_batch(&self) -> usize {
        3 * self.dim + 3
    }
}

/// Stacks row vectors into `n × D` and multiplies by a projection.
pub fn project(rows: &[Vec<f64>], proj: &Tensor) -> Result<Tensor> {
    let d = proj.dims2()?.0;
    if rows.is_empty() || rows.iter().any(|r| r.len() != d) {
        bail!(Dimension, "rows must all have length {d}");
    }
    let m = Tensor::matrix(rows.len(), d, rows.concat())?;
    matmul(&m, proj)
}

/// Gaussian interaction information `I({x1,x2};y) − I(x2;y) − I(x1;y)` on the graph.
///
/// `x1p` and `x2p` are already projected (`B × d`); `y` is `B × D_y` and is projected
/// here so the gradient reaches it.
pub fn interaction_info_gaussian_graph(
    g: &mut Graph,
    x1p: &Tensor,
    x2p: &Tensor,
    y: Var,
    proj: &IiProjections,
    ridge: f64,
) -> Result<Var> {
    let d = proj.dim();
    let b = x1p.dims2()?.0;
    if b < proj.min_batch() {
        bail!(
            Numeric,
            "gaussian interaction information needs a batch above {}, got {b}",
            3 * d + 2
        );
    }
    if x1p.shape() != [b, d] || x2p.shape() != [b, d] || g.value(y).dims2()? != (b, proj.y().shape()[0]) {
        bail!(Dimension, "projected inputs and y disagree on the batch or dimension");
    }
    if !(ridge >= 0.0) {
        bail!(Configuration, "ridge must be nonnegative, got {ridge}");
    }
    let py = g.constant(proj.y().clone());
    let yp = g.matmul(y, py)?;
    let c1 = g.constant(x1p.clone());
    let c2 = g.constant(x2p.clone());
    let stack = g.concat_cols(&[c1, c2, yp])?;

    // centering matrix I − 11ᵀ/B
    let mut h = vec![-1.0 / b as f64; b * b];
    for i in 0..b {
        h[i * b + i] += 1.0;
    }
    let h = g.constant(Tensor::matrix(b, b, h)?);
    let centered = g.matmul(h, stack)?;
    let ct = g.transpose(centered)?;
    let gram = g.matmul(ct, centered)?;
    let cov = g.scale(gram, 1.0 / (b - 1) as f64)?;
    let mut ridge_eye = Tensor::identity(3 * d)?.into_data();
    ridge_eye.iter_mut().for_each(|v| *v *= ridge);
    let ridge_eye = g.constant(Tensor::matrix(3 * d, 3 * d, ridge_eye)?);
    let cov = g.add(cov, ridge_eye)?;

    let i1: Vec<usize> = (0..d).collect();
    let i2: Vec<usize> = (d..2 * d).collect();
    let iy: Vec<usize> = (2 * d..3 * d).collect();
    let i12: Vec<usize> = (0..2 * d).collect();
    let joint = gaussian_mi_graph(g, cov, &i12, &iy)?;
    let m2 = gaussian_mi_graph(g, cov, &i2, &iy)?;
    let m1 = gaussian_mi_graph(g, cov, &i1, &iy)?;
    let t = g.sub(joint, m2)?;
    g.sub(t, m1)
}

/// Value-only form of [`interaction_info_gaussian_graph`] on a sample batch.
pub fn interaction_info_gaussian(batch: &SampleBatch, proj: &IiProjections, ridge: f64) -> Result<f64> {
    if batch.dims() != proj.input_dims() {
        bail!(
            Dimension,
            "batch dims {:?} do not match projection dims {:?}",
            batch.dims(),
            proj.input_dims()
        );
    }
    let x1p = project(batch.x1(), proj.x1())?;
    let x2p = project(batch.x2(), proj.x2())?;
    let mut g = Graph::new();
    let y = g.constant(Tensor::matrix(batch.len(), batch.dims()[2], batch.y().concat())?);
    let ii = interaction_info_gaussian_graph(&mut g, &x1p, &x2p, y, proj, ridge)?;
    Ok(g.scalar(ii))
}

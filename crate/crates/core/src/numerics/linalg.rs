use super::Tensor;
use crate::error::{bail, Result};

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix (row-major n×n).
pub fn cholesky(a: &Tensor) -> Result<Vec<f64>> {
    let (n, m) = a.dims2()?;
    if n != m {
        bail!(Dimension, "cholesky needs a square matrix, got {n}x{m}");
    }
    let a = a.data();
    let mut l = vec![0.0; n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= l[j * n + k] * l[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            bail!(
                Numeric,
                "matrix is not positive definite (pivot {j} = {d:e})"
            );
        }
        let djj = d.sqrt();
        l[j * n + j] = djj;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = s / djj;
        }
    }
    Ok(l)
}

/// `ln det A` for symmetric positive-definite `A`.
pub fn log_det_spd(a: &Tensor) -> Result<f64> {
    let (n, _) = a.dims2()?;
    let l = cholesky(a)?;
    Ok((0..n).fold(0.0, |acc, i| acc + 2.0 * l[i * n + i].ln()))
}

/// Inverse of an SPD matrix from its Cholesky factor, symmetrized.
pub fn spd_inverse(a: &Tensor) -> Result<Tensor> {
    let (n, _) = a.dims2()?;
    let l = cholesky(a)?;
    // Solve L Y = I column by column, then Lᵀ X = Y.
    let mut inv = vec![0.0; n * n];
    let mut y = vec![0.0; n];
    for col in 0..n {
        for i in 0..n {
            let mut s = if i == col { 1.0 } else { 0.0 };
            for k in 0..i {
                s -= l[i * n + k] * y[k];
            }
            y[i] = s / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= l[k * n + i] * inv[k * n + col];
            }
            inv[i * n + col] = s / l[i * n + i];
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (inv[i * n + j] + inv[j * n + i]);
            inv[i * n + j] = avg;
            inv[j * n + i] = avg;
        }
    }
    Tensor::matrix(n, n, inv)
}

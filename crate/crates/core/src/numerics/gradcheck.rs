use super::graph::{Graph, Var};
use super::Tensor;
use crate::error::{bail, Result};

/// Outcome of comparing reverse-mode gradients with central differences.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// max over checked coordinates of `|analytic − numeric| / max(1, |analytic|)`.
    pub max_rel_error: f64,
    pub checked: usize,
    /// Coordinates whose ±step probes switched a ReLU piece. Central differences are
    /// not a valid oracle across a kink, so these are excluded from `max_rel_error`.
    pub skipped_at_kinks: usize,
}

/// Checks every coordinate of `point`.
pub fn grad_check<F>(f: F, point: &Tensor, step: f64) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, Var) -> Result<Var>,
{
    let all: Vec<usize> = (0..point.len()).collect();
    grad_check_coords(f, point, step, &all)
}

/// Checks only the listed flat coordinates of `point`.
pub fn grad_check_coords<F>(f: F, point: &Tensor, step: f64, coords: &[usize]) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph, Var) -> Result<Var>,
{
    if !(step > 0.0) {
        bail!(Usage, "finite-difference step must be positive, got {step}");
    }
    if let Some(&c) = coords.iter().find(|&&c| c >= point.len()) {
        bail!(Dimension, "coordinate {c} outside a point of {} elements", point.len());
    }
    let mut g = Graph::new();
    let x = g.param(point.clone());
    let y = f(&mut g, x)?;
    let base_kinks = g.kink_fingerprint();
    let analytic = g.backward(y)?.flat(x);

    let eval = |values: Vec<f64>| -> Result<(f64, u64)> {
        let mut g = Graph::new();
        let x = g.param(Tensor::new(point.shape().to_vec(), values)?);
        let y = f(&mut g, x)?;
        let v = g.scalar(y);
        if !v.is_finite() {
            bail!(Numeric, "function evaluated to {v}");
        }
        Ok((v, g.kink_fingerprint()))
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        skipped_at_kinks: 0,
    };
    for &c in coords {
        let mut plus = point.data().to_vec();
        plus[c] += step;
        let mut minus = point.data().to_vec();
        minus[c] -= step;
        let (fp, kp) = eval(plus)?;
        let (fm, km) = eval(minus)?;
        if kp != base_kinks || km != base_kinks {
            report.skipped_at_kinks += 1;
            continue;
        }
        let numeric = (fp - fm) / (2.0 * step);
        let err = (analytic[c] - numeric).abs() / analytic[c].abs().max(1.0);
        report.max_rel_error = report.max_rel_error.max(err);
        report.checked += 1;
    }
    Ok(report)
}

//! Central finite-difference verification of analytic gradients.

use crate::error::{Error, Result};

pub const DEFAULT_EPSILON: f64 = 1e-5;

/// Largest per-parameter error `|g_a − g_fd| / max(1, |g_a|, |g_fd|)` between
/// the analytic gradient returned by `loss` and central differences.
pub fn grad_check<F>(mut loss: F, params: &[f64], epsilon: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let (base, analytic) = loss(params);
    if !base.is_finite() {
        return Err(Error::Numeric(format!(
            "loss is not finite at the check point: {base}"
        )));
    }
    if analytic.len() != params.len() {
        return Err(Error::arg(format!(
            "gradient has {} entries for {} parameters",
            analytic.len(),
            params.len()
        )));
    }
    let mut p = params.to_vec();
    let mut worst = 0.0_f64;
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + epsilon;
        let plus = loss(&p).0;
        p[i] = orig - epsilon;
        let minus = loss(&p).0;
        p[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Numeric(format!("loss not finite near parameter {i}")));
        }
        let fd = (plus - minus) / (2.0 * epsilon);
        let ga = analytic[i];
        let err = (ga - fd).abs() / 1.0_f64.max(ga.abs()).max(fd.abs());
        worst = worst.max(err);
    }
    Ok(worst)
}

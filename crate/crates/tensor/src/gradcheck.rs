//! Central-difference verification of analytic gradients.

use crate::error::{Result, TensorError};
use crate::ndarray::NdArray;

/// Worst-case comparison between analytic and numeric derivatives.
#[derive(Debug, Clone, Copy)]
pub struct GradCheckReport {
    pub max_error: f64,
    pub worst_index: usize,
    pub checked: usize,
}

/// Compare `analytic` against central differences of `f` around `at`.
///
/// The error at each coordinate is `|a - n| / max(1, |a|, |n|)`, so it reads
/// as an absolute error for small derivatives and a relative error for large
/// ones. Any non-finite value maps to infinity. `step` must lie in
/// `(0, 1e-3]`; larger steps hide curvature error.
pub fn check_gradient(
    mut f: impl FnMut(&NdArray) -> Result<f64>,
    at: &NdArray,
    analytic: &NdArray,
    step: f64,
) -> Result<GradCheckReport> {
    if !(step > 0.0 && step <= 1e-3) {
        return Err(TensorError::BadStep { step });
    }
    if at.shape() != analytic.shape() {
        return Err(TensorError::ShapeMismatch {
            op: "check_gradient",
            lhs: at.shape().to_vec(),
            rhs: analytic.shape().to_vec(),
        });
    }
    let mut report = GradCheckReport { max_error: 0.0, worst_index: 0, checked: at.numel() };
    let mut point = at.clone();
    for i in 0..at.numel() {
        let orig = point.data()[i];
        point.data_mut()[i] = orig + step;
        let plus = f(&point)?;
        point.data_mut()[i] = orig - step;
        let minus = f(&point)?;
        point.data_mut()[i] = orig;
        let numeric = (plus - minus) / (2.0 * step);
        let a = analytic.data()[i];
        let error = if numeric.is_finite() && a.is_finite() {
            (a - numeric).abs() / a.abs().max(numeric.abs()).max(1.0)
        } else {
            f64::INFINITY
        };
        if error > report.max_error {
            report.max_error = error;
            report.worst_index = i;
        }
    }
    Ok(report)
}

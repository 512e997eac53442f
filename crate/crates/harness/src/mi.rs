//! Plug-in mutual information on equal-width histograms.

use crate::error::{HarnessError, Result};

const EPS: f64 = 1e-12;

/// Maps values to `bins` equal-width bins over the observed range. A
/// degenerate (constant) variable lands entirely in bin 0.
pub fn bin_values(values: &[f64], bins: usize) -> Result<Vec<usize>> {
    if bins == 0 {
        return Err(HarnessError::Data("need at least one bin".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(HarnessError::Data("non-finite value in histogram input".into()));
    }
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    Ok(values
        .iter()
        .map(|v| {
            if span <= 0.0 {
                0
            } else {
                (((v - lo) / span) * bins as f64).min(bins as f64 - 1.0) as usize
            }
        })
        .collect())
}

/// Plug-in mutual information (nats) between two already-binned variables.
pub fn mi_binned(x: &[usize], y: &[usize], bins: usize) -> Result<f64> {
    if x.len() != y.len() || x.is_empty() {
        return Err(HarnessError::Data(format!(
            "MI inputs must be equal-length and non-empty, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let mut joint = vec![0.0; bins * bins];
    let mut px = vec![0.0; bins];
    let mut py = vec![0.0; bins];
    let w = 1.0 / x.len() as f64;
    for (&a, &b) in x.iter().zip(y) {
        if a >= bins || b >= bins {
            return Err(HarnessError::Data(format!("bin index out of range: ({a}, {b})")));
        }
        joint[a * bins + b] += w;
        px[a] += w;
        py[b] += w;
    }
    let mut mi = 0.0;
    for a in 0..bins {
        for b in 0..bins {
            let j = joint[a * bins + b];
            if j > 0.0 {
                mi += j * (j / (px[a] * py[b] + EPS) + EPS).ln();
            }
        }
    }
    // The plug-in estimate is non-negative up to float round-off.
    Ok(mi.max(0.0))
}

/// Mutual information between two continuous variables after equal-width
/// binning to `bins` levels each.
pub fn mutual_information(x: &[f64], y: &[f64], bins: usize) -> Result<f64> {
    mi_binned(&bin_values(x, bins)?, &bin_values(y, bins)?, bins)
}

/// Plug-in entropy (nats) of a binned variable; equals `mi_binned(x, x, _)`.
pub fn entropy_binned(x: &[usize], bins: usize) -> Result<f64> {
    mi_binned(x, x, bins)
}

//! Discrete selection helpers.

use crate::error::{Result, TensorError};

/// Indices of the `k` largest scores, in descending score order.
///
/// Ties break toward the lower index and NaN is placed by the IEEE total
/// order, so the result is deterministic for any input. Callers that need a
/// set rather than a ranking sort the result themselves.
pub fn top_k_indices(scores: &[f64], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > scores.len() {
        return Err(TensorError::TopKRange { k, len: scores.len() });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order.truncate(k);
    Ok(order)
}

/// Index of the largest score, lowest index on ties.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in scores.iter().enumerate().skip(1) {
        if v.total_cmp(&scores[best]).is_gt() {
            best = i;
        }
    }
    best
}

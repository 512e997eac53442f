//! Rank-statistic AUC (Mann–Whitney form) with mid-rank tie handling.

use crate::error::{HarnessError, Result};

/// Area under the ROC curve of `scores` against boolean `labels`.
///
/// Tied scores receive their average rank, so a constant scorer lands at
/// exactly 0.5 and the value is invariant under any strictly increasing
/// transform of the scores.
pub fn rank_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(HarnessError::Data(format!(
            "scores ({}) and labels ({}) differ in length",
            scores.len(),
            labels.len()
        )));
    }
    let n_pos = labels.iter().filter(|l| **l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(HarnessError::Underpowered(format!(
            "AUC needs both classes, got {n_pos} positive / {n_neg} negative"
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(HarnessError::Data("non-finite score in AUC input".into()));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());

    // Walk runs of equal scores; every member of a run gets the mean rank.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid_rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            if labels[idx] {
                rank_sum_pos += mid_rank;
            }
        }
        i = j + 1;
    }

    let np = n_pos as f64;
    let auc = (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * n_neg as f64);
    Ok(auc)
}

/// Fraction of samples where thresholding the probability at 0.5 matches
/// the label.
pub fn accuracy_at_half(probs: &[f64], labels: &[bool]) -> f64 {
    let hits = probs
        .iter()
        .zip(labels)
        .filter(|(p, l)| (**p > 0.5) == **l)
        .count();
    hits as f64 / labels.len().max(1) as f64
}

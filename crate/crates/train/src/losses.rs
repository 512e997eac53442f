//! Loss terms, all built as tape graphs so every one backpropagates into
//! the representation RNN.

use cplab_tensor::{NdArray, NodeId, Tape};

use crate::error::Result;

const EPS: f64 = 1e-12;

/// Contrastive loss over pairwise verifier scores `[B, B]`: entry (i, j)
/// scores sample i's conscious state against sample j's future. The
/// diagonal holds the positives, so each row is cross-entropy against its
/// own index; negatives are the `B - 1` other futures in the batch.
pub fn nce_loss(tape: &mut Tape, pair_scores: NodeId) -> Result<NodeId> {
    let rows = tape.value(pair_scores).shape()[0];
    let targets: Vec<usize> = (0..rows).collect();
    Ok(tape.cross_entropy_logits(pair_scores, &targets)?)
}

/// Mean categorical cross-entropy of predicted bin distributions against
/// realized bins, with probabilities clamped by `1e-12` so an exactly
/// zero-mass target yields about 27.63 instead of infinity.
pub fn prediction_loss(tape: &mut Tape, probs: NodeId, targets: &[usize]) -> Result<NodeId> {
    let (rows, cols) = {
        let v = tape.value(probs);
        (v.shape()[0], v.shape()[1])
    };
    let mut onehot = vec![0.0; rows * cols];
    for (r, &t) in targets.iter().enumerate() {
        onehot[r * cols + t] = 1.0;
    }
    let onehot = tape.constant(NdArray::from_vec(&[rows, cols], onehot)?);
    let picked = tape.mul(probs, onehot)?;
    let p = tape.sum_axis(picked, 1)?;
    let p = tape.add_scalar(p, EPS);
    let lp = tape.log(p)?;
    let nlp = tape.neg(lp);
    Ok(tape.mean_all(nlp))
}

/// Mean Shannon entropy of probability rows, clamped into `[0, ln cols]`.
pub fn entropy_of_rows(tape: &mut Tape, probs: NodeId) -> Result<NodeId> {
    let cols = tape.value(probs).shape()[1];
    let cap = (cols as f64).ln();
    let pe = tape.add_scalar(probs, EPS);
    let lg = tape.log(pe)?;
    let pl = tape.mul(probs, lg)?;
    // mean_all divides by rows*cols; the mean of per-row entropies
    // divides by rows only, so scale back up by cols.
    let s = tape.mean_all(pl);
    let ent = tape.scale(s, -(cols as f64));
    let ent = tape.relu(ent);
    let neg = tape.neg(ent);
    let gap = tape.add_scalar(neg, cap);
    let gap = tape.relu(gap);
    let ng = tape.neg(gap);
    Ok(tape.add_scalar(ng, cap))
}

/// Entropy of the empirical A-slot identity distribution across the
/// batch: `a_onehot` is `[B, M]` with one straight-through one-hot row
/// per sample. All samples picking the same A gives 0; perfectly
/// balanced usage gives ln M.
pub fn diversity_regularizer(tape: &mut Tape, a_onehot: NodeId) -> Result<(NodeId, NodeId)> {
    let usage = tape.mean_axis(a_onehot, 0)?;
    let ent = entropy_of_rows(tape, usage)?;
    Ok((usage, ent))
}

/// Penalty pushing each state coordinate's batch variance above `floor`:
/// mean over coordinates of `relu(floor - var)`. Guards the all-constant
/// degenerate representation.
pub fn variance_floor_penalty(tape: &mut Tape, h: NodeId, floor: f64) -> Result<NodeId> {
    let mu = tape.mean_axis(h, 0)?;
    let diff = tape.sub(h, mu)?;
    let sq = tape.mul(diff, diff)?;
    let var = tape.mean_axis(sq, 0)?;
    let nv = tape.neg(var);
    let gap = tape.add_scalar(nv, floor);
    let gap = tape.relu(gap);
    Ok(tape.mean_all(gap))
}

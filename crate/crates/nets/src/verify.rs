//! Contrastive verifier: scores a conscious state against a candidate
//! future representation by key matching.
//!
//! The A key attends softly over the key table, the resulting weights
//! retrieve a value from the future slot matrix, and an MLP scores the
//! retrieved value against the predicted distribution, the pooled B
//! content, and the A key. The past representation enters only through
//! the conscious content, so unselected slots of the originating state
//! cannot influence the score.

use cplab_tensor::{NodeId, Tape};

use crate::config::NetConfig;
use crate::conscious::ConsciousBatch;
use crate::error::Result;
use crate::params::BoundParams;

/// Score every (conscious state, candidate future) pair.
///
/// `futures` is a `[F, slots * slot_width]` matrix of flattened future
/// representations. Returns `[B, F]` scores; entry `(i, j)` pairs sample
/// `i` with future `j`.
pub fn verify_pairwise(
    tape: &mut Tape,
    p: &BoundParams,
    cfg: &NetConfig,
    batch: &ConsciousBatch,
    pred_probs: NodeId,
    futures: NodeId,
) -> Result<NodeId> {
    let n = batch.batch();
    let f_count = tape.value(futures).shape()[0];
    let m = cfg.slots;
    let w = cfg.slot_width;

    let a_key_rows: Vec<NodeId> = batch.samples.iter().map(|s| s.a_key).collect();
    let a_keys = tape.concat(&a_key_rows, 0)?;
    let attn_logits = tape.matmul_nt(a_keys, p.keys)?;
    let attn_logits = tape.scale(attn_logits, 1.0 / (cfg.key_dim as f64).sqrt());
    let attn = tape.softmax(attn_logits);

    // Retrieved future values for every pair, laid out so that a single
    // reshape yields row (i * F + j) = retrieval of future j by sample i.
    let mut per_future = Vec::with_capacity(f_count);
    for j in 0..f_count {
        let fut_row = tape.gather_rows(futures, &[j])?;
        let slots = tape.reshape(fut_row, &[m, w])?;
        per_future.push(tape.matmul(attn, slots)?);
    }
    let retrieved = tape.concat(&per_future, 1)?;
    let retrieved = tape.reshape(retrieved, &[n * f_count, w])?;

    let tile_idx: Vec<usize> =
        (0..n).flat_map(|i| std::iter::repeat(i).take(f_count)).collect();
    let pred_t = tape.gather_rows(pred_probs, &tile_idx)?;
    let b_pool_rows: Vec<NodeId> = batch.samples.iter().map(|s| s.b_pool).collect();
    let b_pools = tape.concat(&b_pool_rows, 0)?;
    let b_pool_t = tape.gather_rows(b_pools, &tile_idx)?;
    let a_key_t = tape.gather_rows(a_keys, &tile_idx)?;

    let x = tape.concat(&[retrieved, pred_t, b_pool_t, a_key_t], 1)?;
    let h1 = tape.matmul(x, p.v_w1)?;
    let h1 = tape.add(h1, p.v_b1)?;
    let h1 = tape.tanh(h1);
    let s = tape.matmul(h1, p.v_w2)?;
    let s = tape.add(s, p.v_b2)?;
    Ok(tape.reshape(s, &[n, f_count])?)
}

/// Convenience wrapper scoring one conscious sample against one future.
pub fn verify_one(
    tape: &mut Tape,
    p: &BoundParams,
    cfg: &NetConfig,
    batch: &ConsciousBatch,
    pred_probs: NodeId,
    future: NodeId,
) -> Result<NodeId> {
    let scores = verify_pairwise(tape, p, cfg, batch, pred_probs, future)?;
    Ok(tape.reshape(scores, &[1, 1])?)
}

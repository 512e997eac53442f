//! Stochastic sparse-attention bottleneck over the named slots.
//!
//! Each call scores every slot with a small MLP over (slot value, slot key,
//! pooled previous conscious content), perturbs the scores with fresh
//! Gumbel noise scaled by the temperature, and keeps the top `b_select + 1`
//! slots. A separate role head picks the prediction target A among the
//! selected slots; the rest form the conditioning set B. Hard selections
//! are exposed with straight-through gradients: forward values are exact
//! 0/1 indicators while the backward pass sees the underlying softmax.

use cplab_tensor::{argmax, top_k_indices, NdArray, NodeId, SeededRng, Tape};

use crate::config::NetConfig;
use crate::error::{NetError, Result};
use crate::params::BoundParams;

/// Conscious state for one batch element.
#[derive(Debug, Clone)]
pub struct ConsciousSample {
    /// Slot chosen as the prediction target.
    pub a_slot: usize,
    /// Conditioning slots, ascending.
    pub b_slots: Vec<usize>,
    /// All selected slots, ascending (`b_select + 1` distinct ids).
    pub selected: Vec<usize>,
    /// Attention probabilities over all slots, `[1, slots]`.
    pub probs_row: NodeId,
    /// A-slot key, `[1, key_dim]`, carrying role-head gradients.
    pub a_key: NodeId,
    /// A-slot key and value concatenated, `[1, key_dim + slot_width]`.
    pub a_item: NodeId,
    /// Mean of the B items, `[1, key_dim + slot_width]`.
    pub b_pool: NodeId,
    /// Full content: A item then B items in slot order, `[1, (b_select+1)*(key_dim+slot_width)]`.
    pub content: NodeId,
    /// Mean of all selected items, fed to the next call as context.
    pub summary: NodeId,
}

/// One conscious step over a batch.
#[derive(Debug, Clone)]
pub struct ConsciousBatch {
    pub samples: Vec<ConsciousSample>,
    /// Attention probabilities, `[B, slots]`; rows sum to 1.
    pub probs: NodeId,
    /// Straight-through selection indicators, `[B, slots]`; rows sum to `b_select + 1`.
    pub st_select: NodeId,
    /// Straight-through one-hot of the A slot, `[B, slots]`; rows sum to 1.
    pub a_onehot: NodeId,
}

impl ConsciousBatch {
    pub fn batch(&self) -> usize {
        self.samples.len()
    }
}

/// Shared slot scoring: per-slot feature rows `[B*M, feat]`, flattened
/// slot values `[B*M, w]`, and clean scores `[B, M]`.
fn score_slots(
    tape: &mut Tape,
    p: &BoundParams,
    cfg: &NetConfig,
    h: NodeId,
    prev: Option<&ConsciousBatch>,
) -> Result<(NodeId, NodeId, NodeId)> {
    let batch = tape.value(h).shape()[0];
    let m = cfg.slots;
    let item = cfg.content_item_dim();

    let values_all = tape.reshape(h, &[batch * m, cfg.slot_width])?;
    let key_idx: Vec<usize> = (0..batch).flat_map(|_| 0..m).collect();
    let keys_tiled = tape.gather_rows(p.keys, &key_idx)?;
    let summary_stack = match prev {
        Some(pb) => {
            if pb.batch() != batch {
                return Err(NetError::BatchMismatch { expected: batch, got: pb.batch() });
            }
            let rows: Vec<NodeId> = pb.samples.iter().map(|s| s.summary).collect();
            tape.concat(&rows, 0)?
        }
        None => tape.constant(NdArray::zeros(&[batch, item])),
    };
    let tile_idx: Vec<usize> = (0..batch).flat_map(|bi| std::iter::repeat(bi).take(m)).collect();
    let summary_tiled = tape.gather_rows(summary_stack, &tile_idx)?;
    let features = tape.concat(&[values_all, keys_tiled, summary_tiled], 1)?;

    let s1 = tape.matmul(features, p.score_w1)?;
    let s1 = tape.add(s1, p.score_b1)?;
    let s1 = tape.tanh(s1);
    let s2 = tape.matmul(s1, p.score_w2)?;
    let s2 = tape.add(s2, p.score_b2)?;
    let scores = tape.reshape(s2, &[batch, m])?;
    Ok((features, values_all, scores))
}

/// Run the bottleneck once. `prev` carries the previous call's content
/// summaries; `None` stands for an all-zero summary at sequence start.
/// With `tau == 0` the selection is the deterministic top-(b_select+1)
/// of the clean scores, ties broken by lower slot index.
pub fn conscious_step(
    tape: &mut Tape,
    p: &BoundParams,
    cfg: &NetConfig,
    h: NodeId,
    prev: Option<&ConsciousBatch>,
    tau: f64,
    rng: &mut SeededRng,
) -> Result<ConsciousBatch> {
    let batch = tape.value(h).shape()[0];
    let m = cfg.slots;
    let kb = cfg.b_select;
    let item = cfg.content_item_dim();

    let (features, values_all, scores) = score_slots(tape, p, cfg, h, prev)?;
    let mut noise = NdArray::zeros(&[batch, m]);
    for v in noise.data_mut() {
        *v = tau * rng.gumbel();
    }
    let noise = tape.constant(noise);
    let perturbed = tape.add(scores, noise)?;
    let probs = tape.softmax(perturbed);

    let mut samples = Vec::with_capacity(batch);
    let mut st_rows = Vec::with_capacity(batch);
    let mut a_rows = Vec::with_capacity(batch);
    for bi in 0..batch {
        let row = &tape.value(perturbed).data()[bi * m..(bi + 1) * m];
        let mut selected = top_k_indices(row, kb + 1)?;
        selected.sort_unstable();

        let probs_row = tape.gather_rows(probs, &[bi])?;
        let pvals: Vec<f64> = tape.value(probs_row).data().to_vec();
        let mut shift: Vec<f64> = pvals.iter().map(|v| -v).collect();
        for &s in &selected {
            shift[s] += 1.0;
        }
        let shift = tape.constant(NdArray::from_vec(&[1, m], shift)?);
        let st_row = tape.add(probs_row, shift)?;

        // Role head over the selected slots.
        let sel_rows: Vec<usize> = selected.iter().map(|&s| bi * m + s).collect();
        let feats_sel = tape.gather_rows(features, &sel_rows)?;
        let r1 = tape.matmul(feats_sel, p.role_w1)?;
        let r1 = tape.add(r1, p.role_b1)?;
        let r1 = tape.tanh(r1);
        let r2 = tape.matmul(r1, p.role_w2)?;
        let r2 = tape.add(r2, p.role_b2)?;
        let role_logits = tape.reshape(r2, &[1, kb + 1])?;
        let role_probs = tape.softmax(role_logits);
        let rvals: Vec<f64> = tape.value(role_logits).data().to_vec();
        let a_pos = argmax(&rvals);
        let a_slot = selected[a_pos];
        let rp: Vec<f64> = tape.value(role_probs).data().to_vec();
        let mut rshift: Vec<f64> = rp.iter().map(|v| -v).collect();
        rshift[a_pos] += 1.0;
        let rshift = tape.constant(NdArray::from_vec(&[1, kb + 1], rshift)?);
        let a_st = tape.add(role_probs, rshift)?;

        // Selected keys and values, weighted by the straight-through
        // selection coefficient (1 in the forward pass) so score
        // gradients reach the content.
        let coef = tape.gather_cols(st_row, &selected)?;
        let coef = tape.reshape(coef, &[kb + 1, 1])?;
        let keys_sel = tape.gather_rows(p.keys, &selected)?;
        let vals_sel = tape.gather_rows(values_all, &sel_rows)?;
        let keys_w = tape.mul(keys_sel, coef)?;
        let vals_w = tape.mul(vals_sel, coef)?;
        let items = tape.concat(&[keys_w, vals_w], 1)?;

        let a_key = tape.matmul(a_st, keys_w)?;
        let a_val = tape.matmul(a_st, vals_w)?;
        let a_item = tape.concat(&[a_key, a_val], 1)?;

        let b_pos: Vec<usize> = (0..=kb).filter(|&i| i != a_pos).collect();
        let b_slots: Vec<usize> = b_pos.iter().map(|&i| selected[i]).collect();
        let b_rows = tape.gather_rows(items, &b_pos)?;
        let b_pool = tape.mean_axis(b_rows, 0)?;
        let b_flat = tape.reshape(b_rows, &[1, kb * item])?;
        let content = tape.concat(&[a_item, b_flat], 1)?;
        let summary = tape.mean_axis(items, 0)?;

        // Scatter the role one-hot from selected positions to slot ids.
        let mut scatter = vec![0.0; (kb + 1) * m];
        for (i, &s) in selected.iter().enumerate() {
            scatter[i * m + s] = 1.0;
        }
        let scatter = tape.constant(NdArray::from_vec(&[kb + 1, m], scatter)?);
        let a_row = tape.matmul(a_st, scatter)?;

        st_rows.push(st_row);
        a_rows.push(a_row);
        samples.push(ConsciousSample {
            a_slot,
            b_slots,
            selected,
            probs_row,
            a_key,
            a_item,
            b_pool,
            content,
            summary,
        });
    }

    let st_select = tape.concat(&st_rows, 0)?;
    let a_onehot = tape.concat(&a_rows, 0)?;
    Ok(ConsciousBatch { samples, probs, st_select, a_onehot })
}

/// A predetermined slot assignment for [`fixed_selection`].
#[derive(Debug, Clone)]
pub struct FixedPick {
    pub a_slot: usize,
    pub b_slots: Vec<usize>,
}

/// Build conscious states with a caller-chosen selection instead of the
/// stochastic top-k. The content path uses plain gathers, so gradients
/// through it are exact; used by gradient checks and targeted tests.
/// `st_select` and `a_onehot` are constants here.
pub fn fixed_selection(
    tape: &mut Tape,
    p: &BoundParams,
    cfg: &NetConfig,
    h: NodeId,
    picks: &[FixedPick],
) -> Result<ConsciousBatch> {
    let batch = tape.value(h).shape()[0];
    if picks.len() != batch {
        return Err(NetError::BatchMismatch { expected: batch, got: picks.len() });
    }
    let m = cfg.slots;
    let kb = cfg.b_select;
    let item = cfg.content_item_dim();

    let (_, values_all, scores) = score_slots(tape, p, cfg, h, None)?;
    let probs = tape.softmax(scores);

    let mut samples = Vec::with_capacity(batch);
    let mut st_flat = vec![0.0; batch * m];
    let mut a_flat = vec![0.0; batch * m];
    for (bi, pick) in picks.iter().enumerate() {
        let mut selected = pick.b_slots.clone();
        selected.push(pick.a_slot);
        selected.sort_unstable();
        selected.dedup();
        if selected.len() != kb + 1 || selected.iter().any(|&s| s >= m) {
            return Err(NetError::InvalidConfig(format!(
                "fixed pick needs {} distinct slots below {m}, got {:?}",
                kb + 1,
                selected
            )));
        }
        for &s in &selected {
            st_flat[bi * m + s] = 1.0;
        }
        a_flat[bi * m + pick.a_slot] = 1.0;

        let probs_row = tape.gather_rows(probs, &[bi])?;
        let a_key = tape.gather_rows(p.keys, &[pick.a_slot])?;
        let a_val = tape.gather_rows(values_all, &[bi * m + pick.a_slot])?;
        let a_item = tape.concat(&[a_key, a_val], 1)?;

        let mut b_slots = pick.b_slots.clone();
        b_slots.sort_unstable();
        let b_keys = tape.gather_rows(p.keys, &b_slots)?;
        let b_val_rows: Vec<usize> = b_slots.iter().map(|&s| bi * m + s).collect();
        let b_vals = tape.gather_rows(values_all, &b_val_rows)?;
        let b_rows = tape.concat(&[b_keys, b_vals], 1)?;
        let b_pool = tape.mean_axis(b_rows, 0)?;
        let b_flat = tape.reshape(b_rows, &[1, kb * item])?;
        let content = tape.concat(&[a_item, b_flat], 1)?;

        let sel_keys = tape.gather_rows(p.keys, &selected)?;
        let sel_val_rows: Vec<usize> = selected.iter().map(|&s| bi * m + s).collect();
        let sel_vals = tape.gather_rows(values_all, &sel_val_rows)?;
        let sel_items = tape.concat(&[sel_keys, sel_vals], 1)?;
        let summary = tape.mean_axis(sel_items, 0)?;

        samples.push(ConsciousSample {
            a_slot: pick.a_slot,
            b_slots,
            selected,
            probs_row,
            a_key,
            a_item,
            b_pool,
            content,
            summary,
        });
    }

    let st_select = tape.constant(NdArray::from_vec(&[batch, m], st_flat)?);
    let a_onehot = tape.constant(NdArray::from_vec(&[batch, m], a_flat)?);
    Ok(ConsciousBatch { samples, probs, st_select, a_onehot })
}

//! Predictor head: binned distribution over the future A-slot readout.

use cplab_tensor::{NodeId, Tape};

use crate::conscious::ConsciousBatch;
use crate::error::Result;
use crate::params::BoundParams;

/// Predictor output for a batch of conscious states.
#[derive(Debug, Clone, Copy)]
pub struct Prediction {
    /// Raw logits, `[B, value_bins]`.
    pub logits: NodeId,
    /// Softmax probabilities, `[B, value_bins]`; rows sum to 1.
    pub probs: NodeId,
}

/// Predict the binned future readout of each sample's A slot from its
/// pooled B content and the A key. The A slot's current value is withheld
/// so the head has to exploit the conditioning set.
pub fn predict(tape: &mut Tape, p: &BoundParams, batch: &ConsciousBatch) -> Result<Prediction> {
    let rows: Vec<NodeId> = batch
        .samples
        .iter()
        .map(|s| tape.concat(&[s.b_pool, s.a_key], 1))
        .collect::<cplab_tensor::Result<_>>()?;
    let x = tape.concat(&rows, 0)?;
    let h1 = tape.matmul(x, p.p_w1)?;
    let h1 = tape.add(h1, p.p_b1)?;
    let h1 = tape.tanh(h1);
    let logits = tape.matmul(h1, p.p_w2)?;
    let logits = tape.add(logits, p.p_b2)?;
    let probs = tape.softmax(logits);
    Ok(Prediction { logits, probs })
}

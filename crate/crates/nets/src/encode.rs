//! Representation RNN: observation encoder plus gated recurrent update.

use cplab_tensor::{NdArray, NodeId, Tape};

use crate::config::NetConfig;
use crate::error::Result;
use crate::params::BoundParams;

/// Zero representation state for a batch, as a tape constant.
pub fn zero_state(tape: &mut Tape, batch: usize, cfg: &NetConfig) -> NodeId {
    tape.constant(NdArray::zeros(&[batch, cfg.state_dim()]))
}

fn linear(tape: &mut Tape, x: NodeId, w: NodeId, b: NodeId) -> Result<NodeId> {
    let xw = tape.matmul(x, w)?;
    Ok(tape.add(xw, b)?)
}

/// Two-layer tanh observation encoder. Accepts any row count, so a whole
/// window of frames can pass through one matmul.
pub fn encode_frames(tape: &mut Tape, p: &BoundParams, obs: NodeId) -> Result<NodeId> {
    let e1 = linear(tape, obs, p.enc_w1, p.enc_b1)?;
    let e1 = tape.tanh(e1);
    let x = linear(tape, e1, p.enc_w2, p.enc_b2)?;
    Ok(tape.tanh(x))
}

/// GRU-style gated update of the flattened slot state from encoded input
/// `x` (`[B, enc_out]`). With all parameters zero and `h_prev` zero the
/// output is exactly zero (gates at 0.5, candidate at 0).
pub fn gru_step(tape: &mut Tape, p: &BoundParams, x: NodeId, h_prev: NodeId) -> Result<NodeId> {
    let gate = |tape: &mut Tape, w_x: NodeId, w_h: NodeId, b: NodeId| -> Result<NodeId> {
        let xs = tape.matmul(x, w_x)?;
        let hs = tape.matmul(h_prev, w_h)?;
        let s = tape.add(xs, hs)?;
        Ok(tape.add(s, b)?)
    };

    let z = gate(tape, p.gru_w_xz, p.gru_w_hz, p.gru_b_z)?;
    let z = tape.sigmoid(z);
    let r = gate(tape, p.gru_w_xr, p.gru_w_hr, p.gru_b_r)?;
    let r = tape.sigmoid(r);

    let rh = tape.mul(r, h_prev)?;
    let xc = tape.matmul(x, p.gru_w_xc)?;
    let hc = tape.matmul(rh, p.gru_w_hc)?;
    let cand = tape.add(xc, hc)?;
    let cand = tape.add(cand, p.gru_b_c)?;
    let cand = tape.tanh(cand);

    let keep = tape.mul(z, h_prev)?;
    let neg_z = tape.neg(z);
    let open = tape.add_scalar(neg_z, 1.0);
    let new = tape.mul(open, cand)?;
    Ok(tape.add(keep, new)?)
}

/// One full step of the representation RNN: encoder then gated update.
pub fn encode_step(
    tape: &mut Tape,
    p: &BoundParams,
    obs: NodeId,
    h_prev: NodeId,
) -> Result<NodeId> {
    let x = encode_frames(tape, p, obs)?;
    gru_step(tape, p, x, h_prev)
}

/// Run the RNN over a window of observations, returning the state after
/// each step (`window` entries, h_prev excluded).
pub fn encode_window(
    tape: &mut Tape,
    p: &BoundParams,
    obs_steps: &[NodeId],
    h_init: NodeId,
) -> Result<Vec<NodeId>> {
    let mut states = Vec::with_capacity(obs_steps.len());
    let mut h = h_init;
    for &obs in obs_steps {
        h = encode_step(tape, p, obs, h)?;
        states.push(h);
    }
    Ok(states)
}

//! Parameter initialization and per-tape binding.

use cplab_tensor::{glorot_uniform, NdArray, NodeId, ParameterStore, SeededRng, Tape};

use crate::config::NetConfig;
use crate::error::Result;

/// Insert every trainable parameter into `store` with fresh initial values.
///
/// Weights use Glorot uniform initialization, biases start at zero except
/// the GRU update-gate bias, which starts at +1 so the recurrence forgets
/// slowly at the beginning of training.
pub fn init_params(
    store: &mut ParameterStore,
    cfg: &NetConfig,
    obs_dim: usize,
    rng: &mut SeededRng,
) -> Result<()> {
    let h = cfg.state_dim();
    let feat = cfg.slot_feature_dim();

    let linear = |store: &mut ParameterStore,
                      rng: &mut SeededRng,
                      w: &str,
                      b: &str,
                      fan_in: usize,
                      fan_out: usize|
     -> Result<()> {
        store.insert(w, glorot_uniform(rng, fan_in, fan_out))?;
        store.insert(b, NdArray::zeros(&[1, fan_out]))?;
        Ok(())
    };

    linear(store, rng, "f.enc.w1", "f.enc.b1", obs_dim, cfg.enc_hidden)?;
    linear(store, rng, "f.enc.w2", "f.enc.b2", cfg.enc_hidden, cfg.enc_out)?;

    for gate in ["z", "r", "c"] {
        store.insert(&format!("f.gru.w_x{gate}"), glorot_uniform(rng, cfg.enc_out, h))?;
        store.insert(&format!("f.gru.w_h{gate}"), glorot_uniform(rng, h, h))?;
        store.insert(&format!("f.gru.b_{gate}"), NdArray::zeros(&[1, h]))?;
    }
    store.assign("f.gru.b_z", NdArray::full(&[1, h], 1.0))?;

    store.insert("keys.table", glorot_uniform(rng, cfg.slots, cfg.key_dim))?;

    linear(store, rng, "c.score.w1", "c.score.b1", feat, cfg.score_hidden)?;
    linear(store, rng, "c.score.w2", "c.score.b2", cfg.score_hidden, 1)?;
    linear(store, rng, "c.role.w1", "c.role.b1", feat, cfg.role_hidden)?;
    linear(store, rng, "c.role.w2", "c.role.b2", cfg.role_hidden, 1)?;

    linear(store, rng, "p.w1", "p.b1", cfg.predict_input_dim(), cfg.predict_hidden)?;
    linear(store, rng, "p.w2", "p.b2", cfg.predict_hidden, cfg.value_bins)?;

    linear(store, rng, "v.w1", "v.b1", cfg.verify_input_dim(), cfg.verify_hidden)?;
    linear(store, rng, "v.w2", "v.b2", cfg.verify_hidden, 1)?;

    Ok(())
}

/// Node ids of every parameter bound onto one tape. Rebuilt per training
/// step; binding order is fixed so tapes stay structurally identical
/// across reruns.
#[derive(Debug, Clone)]
pub struct BoundParams {
    pub enc_w1: NodeId,
    pub enc_b1: NodeId,
    pub enc_w2: NodeId,
    pub enc_b2: NodeId,
    pub gru_w_xz: NodeId,
    pub gru_w_hz: NodeId,
    pub gru_b_z: NodeId,
    pub gru_w_xr: NodeId,
    pub gru_w_hr: NodeId,
    pub gru_b_r: NodeId,
    pub gru_w_xc: NodeId,
    pub gru_w_hc: NodeId,
    pub gru_b_c: NodeId,
    pub keys: NodeId,
    pub score_w1: NodeId,
    pub score_b1: NodeId,
    pub score_w2: NodeId,
    pub score_b2: NodeId,
    pub role_w1: NodeId,
    pub role_b1: NodeId,
    pub role_w2: NodeId,
    pub role_b2: NodeId,
    pub p_w1: NodeId,
    pub p_b1: NodeId,
    pub p_w2: NodeId,
    pub p_b2: NodeId,
    pub v_w1: NodeId,
    pub v_b1: NodeId,
    pub v_w2: NodeId,
    pub v_b2: NodeId,
}

impl BoundParams {
    pub fn bind(tape: &mut Tape, store: &ParameterStore) -> Result<Self> {
        let b = |tape: &mut Tape, name: &str| store.bind(tape, name);
        Ok(BoundParams {
            enc_w1: b(tape, "f.enc.w1")?,
            enc_b1: b(tape, "f.enc.b1")?,
            enc_w2: b(tape, "f.enc.w2")?,
            enc_b2: b(tape, "f.enc.b2")?,
            gru_w_xz: b(tape, "f.gru.w_xz")?,
            gru_w_hz: b(tape, "f.gru.w_hz")?,
            gru_b_z: b(tape, "f.gru.b_z")?,
            gru_w_xr: b(tape, "f.gru.w_xr")?,
            gru_w_hr: b(tape, "f.gru.w_hr")?,
            gru_b_r: b(tape, "f.gru.b_r")?,
            gru_w_xc: b(tape, "f.gru.w_xc")?,
            gru_w_hc: b(tape, "f.gru.w_hc")?,
            gru_b_c: b(tape, "f.gru.b_c")?,
            keys: b(tape, "keys.table")?,
            score_w1: b(tape, "c.score.w1")?,
            score_b1: b(tape, "c.score.b1")?,
            score_w2: b(tape, "c.score.w2")?,
            score_b2: b(tape, "c.score.b2")?,
            role_w1: b(tape, "c.role.w1")?,
            role_b1: b(tape, "c.role.b1")?,
            role_w2: b(tape, "c.role.w2")?,
            role_b2: b(tape, "c.role.b2")?,
            p_w1: b(tape, "p.w1")?,
            p_b1: b(tape, "p.b1")?,
            p_w2: b(tape, "p.w2")?,
            p_b2: b(tape, "p.b2")?,
            v_w1: b(tape, "v.w1")?,
            v_b1: b(tape, "v.b1")?,
            v_w2: b(tape, "v.w2")?,
            v_b2: b(tape, "v.b2")?,
        })
    }
}

/// Fresh store with default initialization for the given observation size.
pub fn fresh_store(cfg: &NetConfig, obs_dim: usize, rng: &mut SeededRng) -> Result<ParameterStore> {
    let mut store = ParameterStore::new();
    init_params(&mut store, cfg, obs_dim, rng)?;
    Ok(store)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_covers_all_networks() {
        let cfg = NetConfig::default();
        let mut rng = SeededRng::new(7);
        let store = fresh_store(&cfg, 864, &mut rng).unwrap();
        assert_eq!(store.get("f.enc.w1").unwrap().shape(), &[864, 64]);
        assert_eq!(store.get("f.gru.w_hz").unwrap().shape(), &[128, 128]);
        assert_eq!(store.get("keys.table").unwrap().shape(), &[16, 16]);
        assert_eq!(store.get("p.w2").unwrap().shape(), &[32, 16]);
        assert_eq!(store.get("v.w1").unwrap().shape(), &[64, 48]);
        assert!(store.get("f.gru.b_z").unwrap().data().iter().all(|&v| v == 1.0));
        assert!(store.get("f.gru.b_r").unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn binding_exposes_every_param() {
        let cfg = NetConfig::default();
        let mut rng = SeededRng::new(7);
        let store = fresh_store(&cfg, 100, &mut rng).unwrap();
        let mut tape = Tape::new();
        let bound = BoundParams::bind(&mut tape, &store).unwrap();
        assert_eq!(tape.len(), store.len());
        assert_eq!(tape.value(bound.keys).shape(), &[16, 16]);
    }
}

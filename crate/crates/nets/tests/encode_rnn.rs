//! Behavior of the representation RNN.

use cplab_nets::{encode_step, encode_window, fresh_store, BoundParams, NetConfig};
use cplab_tensor::{NdArray, ParameterStore, SeededRng, Tape};

const OBS: usize = 20;

fn small_cfg() -> NetConfig {
    NetConfig {
        slots: 4,
        slot_width: 2,
        key_dim: 3,
        b_select: 2,
        value_bins: 4,
        enc_hidden: 6,
        enc_out: 5,
        score_hidden: 4,
        role_hidden: 3,
        predict_hidden: 4,
        verify_hidden: 4,
        ..NetConfig::default()
    }
}

fn random_obs(rng: &mut SeededRng, batch: usize) -> NdArray {
    rng.uniform_array(&[batch, OBS], -1.0, 1.0)
}

#[test]
fn zero_params_zero_state_give_zero_output() {
    let cfg = small_cfg();
    let mut store = ParameterStore::new();
    let mut rng = SeededRng::new(3);
    cplab_nets::init_params(&mut store, &cfg, OBS, &mut rng).unwrap();
    for name in store.names().map(str::to_string).collect::<Vec<_>>() {
        let shape = store.get(&name).unwrap().shape().to_vec();
        store.assign(&name, NdArray::zeros(&shape)).unwrap();
    }
    let mut tape = Tape::new();
    let p = BoundParams::bind(&mut tape, &store).unwrap();
    let obs = tape.input(random_obs(&mut rng, 3));
    let h0 = cplab_nets::zero_state(&mut tape, 3, &cfg);
    let h1 = encode_step(&mut tape, &p, obs, h0).unwrap();
    assert!(tape.value(h1).data().iter().all(|&v| v == 0.0));
}

#[test]
fn state_stays_inside_unit_box() {
    let cfg = small_cfg();
    let mut rng = SeededRng::new(11);
    let store = fresh_store(&cfg, OBS, &mut rng).unwrap();
    let mut tape = Tape::new();
    let p = BoundParams::bind(&mut tape, &store).unwrap();
    let obs_steps: Vec<_> =
        (0..10).map(|_| tape.input(random_obs(&mut rng, 2).map(|v| v * 3.0))).collect();
    let h0 = cplab_nets::zero_state(&mut tape, 2, &cfg);
    let states = encode_window(&mut tape, &p, &obs_steps, h0).unwrap();
    assert_eq!(states.len(), 10);
    for h in states {
        assert_eq!(tape.value(h).shape(), &[2, cfg.state_dim()]);
        assert!(tape.value(h).data().iter().all(|&v| v.abs() < 1.0 && v.is_finite()));
    }
}

#[test]
fn encode_is_pure_across_tapes() {
    let cfg = small_cfg();
    let mut rng = SeededRng::new(4);
    let store = fresh_store(&cfg, OBS, &mut rng).unwrap();
    let obs = random_obs(&mut rng, 2);
    let run = |store: &ParameterStore| {
        let mut tape = Tape::new();
        let p = BoundParams::bind(&mut tape, store).unwrap();
        let o = tape.input(obs.clone());
        let h0 = cplab_nets::zero_state(&mut tape, 2, &cfg);
        let h = encode_step(&mut tape, &p, o, h0).unwrap();
        tape.value(h).data().to_vec()
    };
    assert_eq!(run(&store), run(&store));
}

#[test]
fn update_gate_bias_slows_state_change() {
    // With the +1 update-gate bias the state moves less per step than a
    // variant whose gate bias is zero, all else equal.
    let cfg = small_cfg();
    let mut rng = SeededRng::new(9);
    let store = fresh_store(&cfg, OBS, &mut rng).unwrap();
    let mut store_zero = store.clone();
    store_zero
        .assign("f.gru.b_z", NdArray::zeros(&[1, cfg.state_dim()]))
        .unwrap();
    let obs = random_obs(&mut rng, 1);
    let norm = |store: &ParameterStore| {
        let mut tape = Tape::new();
        let p = BoundParams::bind(&mut tape, store).unwrap();
        let o = tape.input(obs.clone());
        let h0 = cplab_nets::zero_state(&mut tape, 1, &cfg);
        let h = encode_step(&mut tape, &p, o, h0).unwrap();
        tape.value(h).data().iter().map(|v| v * v).sum::<f64>()
    };
    assert!(norm(&store) < norm(&store_zero));
}

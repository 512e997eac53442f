//! Predictor and verifier behavior: shapes, locality, and pairing.

use cplab_nets::{
    conscious_step, fresh_store, predict, verify_one, verify_pairwise, BoundParams, NetConfig,
};
use cplab_tensor::{NdArray, ParameterStore, SeededRng, Tape};

fn cfg() -> NetConfig {
    NetConfig::default()
}

/// Score head that reads slot-value coordinate 0 with a steep gain, so
/// the selected set is controlled by planting large first coordinates.
fn planted_store(rng: &mut SeededRng) -> ParameterStore {
    let c = cfg();
    let mut store = fresh_store(&c, 32, rng).unwrap();
    let mut w1 = NdArray::zeros(&[c.slot_feature_dim(), c.score_hidden]);
    w1.data_mut()[0] = 10.0;
    store.assign("c.score.w1", w1).unwrap();
    store.assign("c.score.b1", NdArray::zeros(&[1, c.score_hidden])).unwrap();
    let mut w2 = NdArray::zeros(&[c.score_hidden, 1]);
    w2.data_mut()[0] = 1.0;
    store.assign("c.score.w2", w2).unwrap();
    store.assign("c.score.b2", NdArray::zeros(&[1, 1])).unwrap();
    store
}

/// State where slots 2, 5, 9, 14 dominate the planted score head and the
/// rest carry small distinct values.
fn dominated_state(rng: &mut SeededRng, c: &NetConfig) -> NdArray {
    let mut h = rng.uniform_array(&[1, c.state_dim()], -0.05, 0.05);
    for (rank, slot) in [2usize, 5, 9, 14].iter().enumerate() {
        h.data_mut()[slot * c.slot_width] = 0.9 - 0.1 * rank as f64;
    }
    h
}

/// Zero out every slot except the listed ones.
fn mask_unselected(h: &NdArray, keep: &[usize], c: &NetConfig) -> NdArray {
    let mut out = NdArray::zeros(&[1, c.state_dim()]);
    for &s in keep {
        let from = s * c.slot_width;
        out.data_mut()[from..from + c.slot_width]
            .copy_from_slice(&h.data()[from..from + c.slot_width]);
    }
    out
}

struct Forward {
    selected: Vec<usize>,
    pred: Vec<f64>,
    score: f64,
}

fn run_forward(store: &ParameterStore, h: &NdArray, future: &NdArray) -> Forward {
    let c = cfg();
    let mut tape = Tape::new();
    let p = BoundParams::bind(&mut tape, store).unwrap();
    let hid = tape.input(h.clone());
    let mut call_rng = SeededRng::new(7);
    let batch = conscious_step(&mut tape, &p, &c, hid, None, 0.0, &mut call_rng).unwrap();
    let pred = predict(&mut tape, &p, &batch).unwrap();
    let fut = tape.input(future.clone());
    let score = verify_one(&mut tape, &p, &c, &batch, pred.probs, fut).unwrap();
    Forward {
        selected: batch.samples[0].selected.clone(),
        pred: tape.value(pred.probs).data().to_vec(),
        score: tape.value(score).item(),
    }
}

#[test]
fn prediction_rows_are_distributions() {
    let c = cfg();
    let mut rng = SeededRng::new(1);
    let store = fresh_store(&c, 32, &mut rng).unwrap();
    let mut tape = Tape::new();
    let p = BoundParams::bind(&mut tape, &store).unwrap();
    let hid = tape.input(rng.uniform_array(&[5, c.state_dim()], -1.0, 1.0));
    let mut call_rng = SeededRng::new(2);
    let batch = conscious_step(&mut tape, &p, &c, hid, None, 1.0, &mut call_rng).unwrap();
    let pred = predict(&mut tape, &p, &batch).unwrap();
    let probs = tape.value(pred.probs);
    assert_eq!(probs.shape(), &[5, c.value_bins]);
    for row in 0..5 {
        let r = &probs.data()[row * c.value_bins..(row + 1) * c.value_bins];
        assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(r.iter().all(|&v| v > 0.0));
    }
}

#[test]
fn unselected_slots_cannot_influence_predict_or_verify() {
    let c = cfg();
    let mut rng = SeededRng::new(3);
    let store = planted_store(&mut rng);
    let h = dominated_state(&mut rng, &c);
    let future = rng.uniform_array(&[1, c.state_dim()], -1.0, 1.0);

    let base = run_forward(&store, &h, &future);
    assert_eq!(base.selected, vec![2, 5, 9, 14], "planted slots must dominate selection");

    let masked = mask_unselected(&h, &base.selected, &c);
    let redo = run_forward(&store, &masked, &future);
    assert_eq!(redo.selected, base.selected, "masking must not change the dominant set");
    assert_eq!(redo.pred, base.pred, "prediction reads only selected content");
    assert_eq!(redo.score, base.score, "verify reads the past only through selected content");
}

#[test]
fn verify_reacts_to_future_and_selected_content() {
    let c = cfg();
    let mut rng = SeededRng::new(4);
    let store = planted_store(&mut rng);
    let h = dominated_state(&mut rng, &c);
    let future = rng.uniform_array(&[1, c.state_dim()], -1.0, 1.0);
    let base = run_forward(&store, &h, &future);

    let other_future = rng.uniform_array(&[1, c.state_dim()], -1.0, 1.0);
    let fut_changed = run_forward(&store, &h, &other_future);
    assert!((fut_changed.score - base.score).abs() > 1e-9, "future must matter");

    let mut h_sel = h.clone();
    h_sel.data_mut()[2 * c.slot_width + 1] += 0.3;
    let sel_changed = run_forward(&store, &h_sel, &future);
    assert_eq!(sel_changed.selected, base.selected);
    assert!((sel_changed.score - base.score).abs() > 1e-12, "selected values must matter");
}

#[test]
fn pairwise_scores_match_individual_calls() {
    let c = cfg();
    let mut rng = SeededRng::new(5);
    let store = fresh_store(&c, 32, &mut rng).unwrap();
    let h = rng.uniform_array(&[3, c.state_dim()], -1.0, 1.0);
    let futures = rng.uniform_array(&[2, c.state_dim()], -1.0, 1.0);

    let mut tape = Tape::new();
    let p = BoundParams::bind(&mut tape, &store).unwrap();
    let hid = tape.input(h.clone());
    let mut call_rng = SeededRng::new(6);
    let batch = conscious_step(&mut tape, &p, &c, hid, None, 0.0, &mut call_rng).unwrap();
    let pred = predict(&mut tape, &p, &batch).unwrap();
    let futs = tape.input(futures.clone());
    let pair = verify_pairwise(&mut tape, &p, &c, &batch, pred.probs, futs).unwrap();
    assert_eq!(tape.value(pair).shape(), &[3, 2]);
    let pair_vals = tape.value(pair).data().to_vec();

    for i in 0..3 {
        for j in 0..2 {
            let mut t2 = Tape::new();
            let p2 = BoundParams::bind(&mut t2, &store).unwrap();
            let hrow =
                NdArray::from_vec(&[1, c.state_dim()], h.data()[i * 128..(i + 1) * 128].to_vec())
                    .unwrap();
            let hid2 = t2.input(hrow);
            let mut r2 = SeededRng::new(60 + i as u64);
            let b2 = conscious_step(&mut t2, &p2, &c, hid2, None, 0.0, &mut r2).unwrap();
            let pr2 = predict(&mut t2, &p2, &b2).unwrap();
            let frow = NdArray::from_vec(
                &[1, c.state_dim()],
                futures.data()[j * 128..(j + 1) * 128].to_vec(),
            )
            .unwrap();
            let fid = t2.input(frow);
            let s = verify_one(&mut t2, &p2, &c, &b2, pr2.probs, fid).unwrap();
            let got = t2.value(s).item();
            let want = pair_vals[i * 2 + j];
            assert!(
                (got - want).abs() < 1e-12,
                "pairwise ({i},{j}) = {want}, individual = {got}"
            );
        }
    }
}

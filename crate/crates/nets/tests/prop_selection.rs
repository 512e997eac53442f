//! Property tests: the bottleneck's structural invariants must hold for
//! arbitrary states, temperatures, and noise seeds.

use cplab_nets::params::fresh_store;
use cplab_nets::{conscious_step, BoundParams, NetConfig};
use cplab_tensor::{NdArray, SeededRng, Tape};
use proptest::prelude::*;

fn small_cfg() -> NetConfig {
    NetConfig {
        slots: 8,
        slot_width: 4,
        key_dim: 6,
        b_select: 2,
        value_bins: 4,
        enc_hidden: 8,
        enc_out: 6,
        score_hidden: 6,
        role_hidden: 5,
        predict_hidden: 6,
        verify_hidden: 6,
        ..NetConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn selection_invariants_hold_for_any_state_and_temperature(
        seed in 0u64..10_000,
        tau in 0.0f64..3.0,
        scale in 0.01f64..5.0,
    ) {
        let cfg = small_cfg();
        let mut rng = SeededRng::new(seed);
        let store = fresh_store(&cfg, 10, &mut rng).unwrap();

        let mut tape = Tape::new();
        let p = BoundParams::bind(&mut tape, &store).unwrap();
        let batch = 3;
        let dim = cfg.state_dim();
        let data: Vec<f64> = (0..batch * dim).map(|_| rng.range(-scale, scale)).collect();
        let h = tape.input(NdArray::from_vec(&[batch, dim], data).unwrap());
        let cb = conscious_step(&mut tape, &p, &cfg, h, None, tau, &mut rng).unwrap();

        let group = cfg.b_select + 1;
        for s in &cb.samples {
            prop_assert_eq!(s.selected.len(), group);
            for w in s.selected.windows(2) {
                prop_assert!(w[0] < w[1], "selected slots must be distinct and ascending");
            }
            prop_assert!(s.selected.contains(&s.a_slot));
            prop_assert!(s.b_slots.iter().all(|b| *b != s.a_slot));
            prop_assert!(s.selected.iter().all(|&i| i < cfg.slots));
        }

        let probs = tape.value(cb.probs).clone();
        for b in 0..batch {
            let row = &probs.data()[b * cfg.slots..(b + 1) * cfg.slots];
            let sum: f64 = row.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9, "attention row must normalize, got {}", sum);
            prop_assert!(row.iter().all(|v| *v >= 0.0 && v.is_finite()));
        }

        let st = tape.value(cb.st_select).clone();
        let a = tape.value(cb.a_onehot).clone();
        for b in 0..batch {
            let st_row = &st.data()[b * cfg.slots..(b + 1) * cfg.slots];
            let a_row = &a.data()[b * cfg.slots..(b + 1) * cfg.slots];
            let st_sum: f64 = st_row.iter().sum();
            let a_sum: f64 = a_row.iter().sum();
            prop_assert!((st_sum - group as f64).abs() < 1e-9);
            prop_assert!((a_sum - 1.0).abs() < 1e-9);
            prop_assert_eq!(
                a_row.iter().position(|v| *v == 1.0),
                Some(cb.samples[b].a_slot)
            );
        }
    }
}

//! Runs the trained model over whole trajectories and collects everything
//! evaluation needs per timestep: probe features, emitted statements,
//! verifier scores, and ground-truth labels.

use cplab_env::Trajectory;
use cplab_nets::{
    conscious_step, encode_frames, gru_step, predict, verify_one, zero_state, BinMap, BoundParams,
    ConsciousBatch, NetConfig, Statement,
};
use cplab_tensor::{NdArray, ParameterStore, SeededRng, Tape};
use cplab_train::RunConfig;

use crate::error::{HarnessError, Result};

/// Everything recorded at one timestep of an evaluated trajectory.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub t: usize,
    /// Conscious-state probe features: selected content, attention row,
    /// selection indicator.
    pub conscious: Vec<f64>,
    /// The full representation state, for the ceiling probe.
    pub full_h: Vec<f64>,
    /// Same layout as `conscious` but built from uniformly random slots.
    pub random_slots: Vec<f64>,
    /// First coordinate of every slot of h_t (the slot readout convention).
    pub readouts: Vec<f64>,
    pub selected: Vec<usize>,
    pub statement: Statement,
    /// Verifier score of the statement against h at t + horizon, when that
    /// state exists within the trajectory.
    pub verifier_score: Option<f64>,
    /// Realized bin of the A-slot readout at t + horizon.
    pub realized_bin: Option<usize>,
}

/// One trajectory's worth of evaluation records plus the ground truth
/// needed for labels.
pub struct TrajectoryEval {
    pub trajectory: Trajectory,
    pub steps: Vec<StepRecord>,
}

/// Dimension of the `conscious` / `random_slots` feature vectors.
pub fn conscious_feature_dim(cfg: &NetConfig) -> usize {
    cfg.content_dim() + 2 * cfg.slots
}

fn indicator(slots: &[usize], m: usize) -> Vec<f64> {
    let mut v = vec![0.0; m];
    for &s in slots {
        v[s] = 1.0;
    }
    v
}

/// Deterministic (temperature zero) sweep of the model down one trajectory.
///
/// The conscious chain is carried across the whole trajectory: each step's
/// bottleneck call sees the summary of the previous step's. `rng` only
/// drives the random-slot control features.
pub fn eval_trajectory(
    cfg: &RunConfig,
    store: &ParameterStore,
    trajectory: Trajectory,
    rng: &mut SeededRng,
) -> Result<TrajectoryEval> {
    let net = &cfg.net;
    let horizon = cfg.train.horizon;
    let len = trajectory.len();
    if len <= horizon {
        return Err(HarnessError::Data(format!(
            "trajectory of {len} steps cannot resolve horizon {horizon}"
        )));
    }
    let obs_dim = cfg.env.obs_dim();
    let bins = BinMap::new(net.value_bins);
    let group = net.b_select + 1;

    let mut tape = Tape::new();
    let p = BoundParams::bind(&mut tape, store)?;

    let mut flat = Vec::with_capacity(len * obs_dim);
    for obs in &trajectory.observations {
        flat.extend_from_slice(obs.as_slice());
    }
    let all_obs = tape.input(NdArray::from_vec(&[len, obs_dim], flat)?);
    let encoded = encode_frames(&mut tape, &p, all_obs)?;

    let mut h = zero_state(&mut tape, 1, net);
    let mut h_nodes = Vec::with_capacity(len);
    for t in 0..len {
        let x = tape.gather_rows(encoded, &[t])?;
        h = gru_step(&mut tape, &p, x, h)?;
        h_nodes.push(h);
    }

    let keys = store
        .get("keys.table")
        .ok_or_else(|| HarnessError::Data("parameter store lacks keys.table".into()))?
        .clone();
    let throwaway = &mut SeededRng::new(0);

    let mut batches: Vec<ConsciousBatch> = Vec::with_capacity(len);
    let mut pred_nodes = Vec::with_capacity(len);
    for t in 0..len {
        let cb = {
            let prev = batches.last();
            conscious_step(&mut tape, &p, net, h_nodes[t], prev, 0.0, throwaway)?
        };
        let pred = predict(&mut tape, &p, &cb)?;
        pred_nodes.push(pred.probs);
        batches.push(cb);
    }

    let mut steps = Vec::with_capacity(len);
    for t in 0..len {
        let cb = &batches[t];
        let sample = &cb.samples[0];

        let probs = tape.value(pred_nodes[t]).data().to_vec();
        let (argmax_bin, max_prob) = probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, v)| (i, *v))
            .unwrap();
        let statement = Statement {
            a_slot: sample.a_slot,
            horizon,
            argmax_bin,
            max_prob,
            b_slots: sample.b_slots.clone(),
        };

        let h_vals = tape.value(h_nodes[t]).data().to_vec();
        let attn = tape.value(cb.probs).data().to_vec();

        let mut conscious = tape.value(sample.content).data().to_vec();
        conscious.extend_from_slice(&attn);
        conscious.extend(indicator(&sample.selected, net.slots));

        // Control features: identical layout, slots drawn uniformly.
        let mut pool: Vec<usize> = (0..net.slots).collect();
        rng.shuffle(&mut pool);
        let mut rand_slots: Vec<usize> = pool[..group].to_vec();
        rand_slots.sort_unstable();
        let mut random = Vec::with_capacity(conscious.len());
        for &s in &rand_slots {
            random.extend_from_slice(&h_vals[s * net.slot_width..(s + 1) * net.slot_width]);
            random.extend_from_slice(&keys.data()[s * net.key_dim..(s + 1) * net.key_dim]);
        }
        random.extend(std::iter::repeat(1.0 / net.slots as f64).take(net.slots));
        random.extend(indicator(&rand_slots, net.slots));

        let (verifier_score, realized_bin) = if t + horizon < len {
            let future_vals = tape.value(h_nodes[t + horizon]).clone();
            let future = tape.constant(future_vals.clone());
            let score = verify_one(&mut tape, &p, net, cb, pred_nodes[t], future)?;
            let realized = bins.bin_of(future_vals.data()[sample.a_slot * net.slot_width]);
            (Some(tape.value(score).item()), Some(realized))
        } else {
            (None, None)
        };

        let readouts: Vec<f64> = (0..net.slots).map(|s| h_vals[s * net.slot_width]).collect();
        steps.push(StepRecord {
            t,
            conscious,
            full_h: h_vals,
            random_slots: random,
            readouts,
            selected: sample.selected.clone(),
            statement,
            verifier_score,
            realized_bin,
        });
    }

    Ok(TrajectoryEval { trajectory, steps })
}

/// Samples `count` fresh trajectories and evaluates the model on each.
pub fn eval_fresh_trajectories(
    cfg: &RunConfig,
    store: &ParameterStore,
    count: usize,
    length: usize,
    rng: &mut SeededRng,
) -> Result<Vec<TrajectoryEval>> {
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let traj = cplab_env::sample_trajectory(&cfg.env, rng, length)?;
        out.push(eval_trajectory(cfg, store, traj, rng)?);
    }
    Ok(out)
}

/// True when `pile` is still standing in the world state at step `t`.
pub fn standing_at(traj: &Trajectory, pile: usize, t: usize) -> bool {
    traj.states[t].piles[pile].is_standing()
}

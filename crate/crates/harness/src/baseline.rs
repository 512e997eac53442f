//! The pixel-space contrast system: a recurrent next-frame predictor with
//! per-cell channel distributions, trained on the same trajectory stream as
//! the slot model, and evaluated on the fall event by rollout sampling.

use cplab_env::{EnvConfig, Trajectory, CH_BLOCK, CH_LEAN_LEFT, CH_LEAN_RIGHT};
use cplab_tensor::optim::AdamHyper;
use cplab_tensor::tape::NodeId;
use cplab_tensor::{NdArray, ParameterStore, SeededRng, Tape};
use cplab_train::{fresh_episode, RunConfig, TrajectoryBuffer};

use crate::auc::rank_auc;
use crate::error::{HarnessError, Result};
use crate::probe::ProbeReport;

pub const LATENT_DIM: usize = 48;
pub const HIDDEN_DIM: usize = 96;
const LEARNING_RATE: f64 = 1e-3;
pub const ROLLOUTS: usize = 32;

/// Recurrent pixel predictor: a latent carries history, a head maps
/// (frame, latent) to per-cell channel logits for the next frame.
pub struct BaselineModel {
    pub store: ParameterStore,
    pub obs_dim: usize,
}

fn glorot(rng: &mut SeededRng, rows: usize, cols: usize) -> NdArray {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.range(-bound, bound)).collect();
    NdArray::from_vec(&[rows, cols], data).expect("shape matches data")
}

impl BaselineModel {
    pub fn init(obs_dim: usize, rng: &mut SeededRng) -> Result<BaselineModel> {
        let mut store = ParameterStore::new();
        store.insert("base.w_lo", glorot(rng, obs_dim, LATENT_DIM))?;
        store.insert("base.w_ll", glorot(rng, LATENT_DIM, LATENT_DIM))?;
        store.insert("base.b_l", NdArray::zeros(&[1, LATENT_DIM]))?;
        store.insert("base.w1", glorot(rng, obs_dim + LATENT_DIM, HIDDEN_DIM))?;
        store.insert("base.b1", NdArray::zeros(&[1, HIDDEN_DIM]))?;
        store.insert("base.w2", glorot(rng, HIDDEN_DIM, obs_dim))?;
        store.insert("base.b2", NdArray::zeros(&[1, obs_dim]))?;
        Ok(BaselineModel { store, obs_dim })
    }
}

struct Bound {
    w_lo: NodeId,
    w_ll: NodeId,
    b_l: NodeId,
    w1: NodeId,
    b1: NodeId,
    w2: NodeId,
    b2: NodeId,
}

impl Bound {
    fn bind(tape: &mut Tape, store: &ParameterStore) -> Result<Bound> {
        Ok(Bound {
            w_lo: store.bind(tape, "base.w_lo")?,
            w_ll: store.bind(tape, "base.w_ll")?,
            b_l: store.bind(tape, "base.b_l")?,
            w1: store.bind(tape, "base.w1")?,
            b1: store.bind(tape, "base.b1")?,
            w2: store.bind(tape, "base.w2")?,
            b2: store.bind(tape, "base.b2")?,
        })
    }

    /// latent' = tanh(frame W_lo + latent W_ll + b).
    fn latent_step(&self, tape: &mut Tape, frame: NodeId, latent: NodeId) -> Result<NodeId> {
        let a = tape.matmul(frame, self.w_lo)?;
        let b = tape.matmul(latent, self.w_ll)?;
        let s = tape.add(a, b)?;
        let s = tape.add(s, self.b_l)?;
        Ok(tape.tanh(s))
    }

    /// Per-cell channel logits for the next frame, flat [rows, obs_dim].
    fn head(&self, tape: &mut Tape, frame: NodeId, latent: NodeId) -> Result<NodeId> {
        let x = tape.concat(&[frame, latent], 1)?;
        let h = tape.matmul(x, self.w1)?;
        let h = tape.add(h, self.b1)?;
        let h = tape.tanh(h);
        let logits = tape.matmul(h, self.w2)?;
        Ok(tape.add(logits, self.b2)?)
    }
}

/// Channel index of every cell of a one-hot frame.
fn frame_channels(frame: &[f64], channels: usize) -> Vec<usize> {
    frame
        .chunks(channels)
        .map(|cell| {
            cell.iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(i, _)| i)
                .unwrap()
        })
        .collect()
}

/// Trains the baseline on the identical episode stream the slot model sees:
/// same seed forks, same buffer schedule, same number of update steps. Each
/// update unrolls the latent over a window and scores next-frame
/// cross-entropy on the final transition. Returns the model and the loss
/// curve.
pub fn train_baseline(cfg: &RunConfig, seed: u64) -> Result<(BaselineModel, Vec<f64>)> {
    cfg.validate()?;
    let obs_dim = cfg.env.obs_dim();
    let channels = cfg.env.channels();
    let t = &cfg.train;

    let root = SeededRng::new(seed);
    let mut init_rng = root.fork("baseline-init");
    let mut env_rng = root.fork("env");
    let mut train_rng = root.fork("baseline-train");

    let model = BaselineModel::init(obs_dim, &mut init_rng)?;
    let mut store = model.store;
    let hyper = AdamHyper::with_lr(LEARNING_RATE);

    let mut buffer = TrajectoryBuffer::new(t.buffer_episodes, t.window);
    for _ in 0..t.buffer_episodes {
        buffer.push(fresh_episode(&cfg.env, &mut env_rng, t.episode_length)?);
    }

    let bsz = t.batch_size;
    let mut curve = Vec::with_capacity(t.steps);
    for step in 0..t.steps {
        if step > 0 && step % t.refresh_every == 0 {
            buffer.push(fresh_episode(&cfg.env, &mut env_rng, t.episode_length)?);
        }
        let picks = buffer.sample_windows(&mut train_rng, bsz)?;

        let mut tape = Tape::new();
        let b = Bound::bind(&mut tape, &store)?;
        let mut latent = tape.constant(NdArray::zeros(&[bsz, LATENT_DIM]));
        let mut frame = tape.constant(buffer.obs_batch(&picks, 0)?);
        for wt in 1..t.window - 1 {
            latent = b.latent_step(&mut tape, frame, latent)?;
            frame = tape.constant(buffer.obs_batch(&picks, wt)?);
        }
        let logits = b.head(&mut tape, frame, latent)?;
        let target_frame = buffer.obs_batch(&picks, t.window - 1)?;
        let mut targets = Vec::with_capacity(bsz * obs_dim / channels);
        for row in 0..bsz {
            let row_data = &target_frame.data()[row * obs_dim..(row + 1) * obs_dim];
            targets.extend(frame_channels(row_data, channels));
        }
        let cells = obs_dim / channels;
        let per_cell = tape.reshape(logits, &[bsz * cells, channels])?;
        let loss = tape.cross_entropy_logits(per_cell, &targets)?;
        let v = tape.value(loss).item();
        if !v.is_finite() {
            return Err(HarnessError::Numerical(format!(
                "baseline loss non-finite at step {step}"
            )));
        }
        curve.push(v);
        let grads = tape.backward(loss)?;
        store.adam_step(grads.by_param(), hyper)?;
    }

    Ok((BaselineModel { store, obs_dim }, curve))
}

/// Teacher-forced latent at every timestep of a trajectory; row `t`
/// summarizes observations strictly before `t`. These are the baseline's
/// probe features.
pub fn baseline_latents(model: &BaselineModel, traj: &Trajectory) -> Result<Vec<Vec<f64>>> {
    let mut tape = Tape::new();
    let b = Bound::bind(&mut tape, &model.store)?;
    let mut latent = tape.constant(NdArray::zeros(&[1, LATENT_DIM]));
    let mut out = Vec::with_capacity(traj.len());
    for obs in &traj.observations {
        out.push(tape.value(latent).data().to_vec());
        let frame =
            tape.constant(NdArray::from_vec(&[1, model.obs_dim], obs.as_slice().to_vec())?);
        latent = b.latent_step(&mut tape, frame, latent)?;
    }
    Ok(out)
}

/// True when the frame still shows a standing pile of the given height at
/// `col`: every cell of the column stack reads as a pile channel.
pub fn frame_shows_standing(env: &EnvConfig, frame: &[f64], col: usize, height: usize) -> bool {
    let g = env.grid;
    (0..height.max(1)).all(|i| cell_shows_pile(env, frame, g - 1 - i, col))
}

/// Samples `ROLLOUTS` futures of length `horizon` from `(frame, latent)`
/// and returns, per pile, the fraction of rollouts whose final frame no
/// longer renders the base of that pile's column as a pile channel.
///
/// The base cell is the event readout because it is occupied by standing
/// piles of every height and cleared by scatter and settling, so its
/// untrained base rate carries no height information and the conjunction
/// over a whole column does not compound per-cell sampling error against
/// taller piles. Both properties favor the baseline; the comparison stays
/// honest.
fn rollout_fall_fractions(
    env: &EnvConfig,
    store: &ParameterStore,
    frame0: &[f64],
    latent0: &[f64],
    horizon: usize,
    cols: &[usize],
    rng: &mut SeededRng,
) -> Result<Vec<f64>> {
    let obs_dim = frame0.len();
    let channels = env.channels();
    let cells = obs_dim / channels;
    let n = ROLLOUTS;
    let mut tape = Tape::new();
    let b = Bound::bind(&mut tape, store)?;

    let mut frames = NdArray::from_vec(&[n, obs_dim], frame0.repeat(n))?;
    let mut latents = NdArray::from_vec(&[n, LATENT_DIM], latent0.repeat(n))?;
    for _ in 0..horizon {
        let f = tape.constant(frames.clone());
        let l = tape.constant(latents.clone());
        let logits = b.head(&mut tape, f, l)?;
        let per_cell = tape.reshape(logits, &[n * cells, channels])?;
        let probs = tape.softmax(per_cell);
        let probs_vals = tape.value(probs).clone();

        let mut next = vec![0.0; n * obs_dim];
        for cell in 0..n * cells {
            let row = &probs_vals.data()[cell * channels..(cell + 1) * channels];
            let pick = rng.categorical(row);
            next[cell * channels + pick] = 1.0;
        }
        let next = NdArray::from_vec(&[n, obs_dim], next)?;

        let new_latent = b.latent_step(&mut tape, f, l)?;
        latents = tape.value(new_latent).clone();
        frames = next;
    }

    let mut fractions = Vec::with_capacity(cols.len());
    for &col in cols {
        let fallen = (0..n)
            .filter(|&r| {
                let row = &frames.data()[r * obs_dim..(r + 1) * obs_dim];
                !cell_shows_pile(env, row, env.grid - 1, col)
            })
            .count();
        fractions.push(fallen as f64 / n as f64);
    }
    Ok(fractions)
}

/// Does the cell at `(row, col)` render as part of a pile (block or either
/// lean marker)?
fn cell_shows_pile(env: &EnvConfig, frame: &[f64], row: usize, col: usize) -> bool {
    let ch = env.channels();
    let base = (row * env.grid + col) * ch;
    let cell = &frame[base..base + ch];
    let channel = cell
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    channel == CH_BLOCK || channel == CH_LEAN_LEFT || channel == CH_LEAN_RIGHT
}

/// Event-prediction AUC of the baseline, one report per pile, computed the
/// same way as the probes: the rollout fall fraction is the score, the true
/// fall-within-horizon outcome is the label. Only standing piles at
/// timesteps with a resolvable future enter the dataset.
pub fn eval_baseline(
    model: &BaselineModel,
    env: &EnvConfig,
    trajectories: &[&Trajectory],
    horizon: usize,
    rng: &mut SeededRng,
) -> Result<Vec<ProbeReport>> {
    let piles = env.piles;
    let mut scores: Vec<Vec<f64>> = vec![Vec::new(); piles];
    let mut labels: Vec<Vec<bool>> = vec![Vec::new(); piles];

    for traj in trajectories {
        let latents = baseline_latents(model, traj)?;
        for t in 0..traj.len().saturating_sub(horizon) {
            let state = &traj.states[t];
            let standing: Vec<usize> = state
                .piles
                .iter()
                .filter(|p| p.is_standing())
                .map(|p| p.col)
                .collect();
            if standing.is_empty() {
                continue;
            }
            let fractions = rollout_fall_fractions(
                env,
                &model.store,
                traj.observations[t].as_slice(),
                &latents[t],
                horizon,
                &standing,
                rng,
            )?;
            let mut k = 0;
            for (pile, p) in state.piles.iter().enumerate() {
                if p.is_standing() {
                    scores[pile].push(fractions[k]);
                    labels[pile].push(traj.falls_within(pile, t, horizon));
                    k += 1;
                }
            }
        }
    }

    let mut reports = Vec::with_capacity(piles);
    for pile in 0..piles {
        let auc = rank_auc(&scores[pile], &labels[pile])?;
        let n = scores[pile].len();
        let n_pos = labels[pile].iter().filter(|l| **l).count();
        let hits = scores[pile]
            .iter()
            .zip(&labels[pile])
            .filter(|(s, l)| (**s > 0.5) == **l)
            .count();
        reports.push(ProbeReport {
            source: "baseline-rollout".into(),
            pile,
            auc,
            accuracy: hits as f64 / n.max(1) as f64,
            n,
            n_pos,
        });
    }
    Ok(reports)
}

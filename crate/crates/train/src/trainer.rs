//! The training loop: sampling windows, building the step graph, Adam updates.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use cplab_nets::{
    conscious_step, encode_frames, gru_step, predict, verify_pairwise, zero_state,
    BinMap, BoundParams, ConsciousBatch, NetConfig,
};
use cplab_nets::params::fresh_store;
use cplab_tensor::{checkpoint, NdArray, ParameterStore, SeededRng, Tape};
use cplab_tensor::optim::AdamHyper;
use cplab_tensor::tape::NodeId;

use crate::buffer::{fresh_episode, TrajectoryBuffer, WindowPick};
use crate::config::RunConfig;
use crate::error::{Result, TrainError};
use crate::losses::{
    diversity_regularizer, entropy_of_rows, nce_loss, prediction_loss, variance_floor_penalty,
};

/// Per-step loss values and selection statistics, all read off the forward pass.
#[derive(Debug, Clone)]
pub struct LossBreakdown {
    pub total: f64,
    pub nce: f64,
    pub prediction: f64,
    /// Attention entropy (the term is *subtracted*; higher entropy lowers the loss).
    pub entropy_reg: f64,
    /// Entropy of the batch A-slot usage distribution (also subtracted).
    pub diversity_reg: f64,
    pub var_floor: f64,
    /// How many samples in the batch selected each slot (A or B).
    pub slot_usage: Vec<usize>,
    /// How many samples picked each slot as A.
    pub a_counts: Vec<usize>,
}

#[derive(Serialize)]
struct MetricsRow<'a> {
    step: usize,
    total: f64,
    nce: f64,
    pred: f64,
    ent: f64,
    div: f64,
    tau: f64,
    slot_usage: &'a [usize],
}

/// Paths produced by a completed [`Trainer::run`].
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub metrics_path: PathBuf,
    pub final_checkpoint: PathBuf,
}

/// Replaces one slot of every hidden state row with a fixed constant value.
///
/// Used to create a trivially predictable variable: the slot carries no
/// information and never changes, so a bottleneck chasing predictability
/// alone will happily collapse onto it.
pub fn plant_constant_slot(
    tape: &mut Tape,
    h: NodeId,
    slot: usize,
    value: f64,
    cfg: &NetConfig,
) -> Result<NodeId> {
    let shape = tape.value(h).shape().to_vec();
    let (rows, dim) = (shape[0], shape[1]);
    let w = cfg.slot_width;
    let mut keep = vec![1.0; rows * dim];
    for r in 0..rows {
        for c in 0..w {
            keep[r * dim + slot * w + c] = 0.0;
        }
    }
    let masked = tape.mask(h, &keep)?;
    let mut row = vec![0.0; dim];
    for c in 0..w {
        row[slot * w + c] = value;
    }
    let fill = tape.constant(NdArray::from_vec(&[1, dim], row)?);
    Ok(tape.add(masked, fill)?)
}

/// Holds everything a training run mutates: parameters, optimizer state,
/// replay buffer, RNG streams, temperature schedule.
pub struct Trainer {
    pub cfg: RunConfig,
    pub store: ParameterStore,
    pub step: usize,
    pub tau: f64,
    pub bins: BinMap,
    buffer: TrajectoryBuffer,
    env_rng: SeededRng,
    train_rng: SeededRng,
    hyper: AdamHyper,
}

impl Trainer {
    /// Validates the config, initializes parameters, and pre-fills the
    /// trajectory buffer. All randomness descends from `seed` through
    /// labelled forks, so identical (config, seed) pairs produce identical
    /// runs.
    pub fn new(cfg: RunConfig, seed: u64) -> Result<Trainer> {
        cfg.validate()?;
        let root = SeededRng::new(seed);
        let mut init_rng = root.fork("init");
        let mut env_rng = root.fork("env");
        let train_rng = root.fork("train");

        let store = fresh_store(&cfg.net, cfg.env.obs_dim(), &mut init_rng)?;
        let mut buffer = TrajectoryBuffer::new(cfg.train.buffer_episodes, cfg.train.window);
        for _ in 0..cfg.train.buffer_episodes {
            buffer.push(fresh_episode(&cfg.env, &mut env_rng, cfg.train.episode_length)?);
        }

        let tau = cfg.train.tau_init;
        let bins = BinMap::new(cfg.net.value_bins);
        let hyper = AdamHyper::with_lr(cfg.train.learning_rate);
        Ok(Trainer {
            cfg,
            store,
            step: 0,
            tau,
            bins,
            buffer,
            env_rng,
            train_rng,
            hyper,
        })
    }

    /// Number of episodes currently held by the replay buffer.
    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }

    /// One optimizer update: possibly refresh the buffer, sample a batch of
    /// windows, build the graph, backprop, Adam.
    pub fn train_step(&mut self) -> Result<LossBreakdown> {
        if self.step > 0 && self.step % self.cfg.train.refresh_every == 0 {
            let ep = fresh_episode(&self.cfg.env, &mut self.env_rng, self.cfg.train.episode_length)?;
            self.buffer.push(ep);
        }
        let picks = self
            .buffer
            .sample_windows(&mut self.train_rng, self.cfg.train.batch_size)?;
        let out = self.update_on(&picks)?;
        self.step += 1;
        self.tau = (self.tau * self.cfg.train.tau_decay).max(self.cfg.train.tau_floor);
        Ok(out)
    }

    fn update_on(&mut self, picks: &[WindowPick]) -> Result<LossBreakdown> {
        let net = self.cfg.net.clone();
        let tc = self.cfg.train.clone();
        let bsz = tc.batch_size;
        let c_idx = tc.conscious_index();
        let dim = self.cfg.env.obs_dim();

        let mut tape = Tape::new();
        let p = BoundParams::bind(&mut tape, &self.store)?;

        // Encode every frame of every window in one batched pass, then walk
        // the recurrence over views into the result.
        let mut all = Vec::with_capacity(tc.window * bsz * dim);
        for t in 0..tc.window {
            let batch = self.buffer.obs_batch(picks, t)?;
            all.extend_from_slice(batch.data());
        }
        let obs_all = tape.input(NdArray::from_vec(&[tc.window * bsz, dim], all)?);
        let x_all = encode_frames(&mut tape, &p, obs_all)?;

        let mut h = zero_state(&mut tape, bsz, &net);
        let mut states = Vec::with_capacity(tc.window);
        for t in 0..tc.window {
            let idx: Vec<usize> = (t * bsz..(t + 1) * bsz).collect();
            let x = tape.gather_rows(x_all, &idx)?;
            h = gru_step(&mut tape, &p, x, h)?;
            if tc.plant_slot >= 0 {
                h = plant_constant_slot(&mut tape, h, tc.plant_slot as usize, 0.5, &net)?;
            }
            states.push(h);
        }

        // Chain bottleneck calls from the window start up to the step that
        // leaves exactly `horizon` transitions of lookahead.
        let mut prev: Option<ConsciousBatch> = None;
        for t in 0..=c_idx {
            let cb = conscious_step(
                &mut tape,
                &p,
                &net,
                states[t],
                prev.as_ref(),
                self.tau,
                &mut self.train_rng,
            )?;
            prev = Some(cb);
        }
        let cb = prev.expect("conscious_index >= 0 by config validation");

        let pred = predict(&mut tape, &p, &cb)?;

        // The verifier treats the future state as ground truth, so it enters
        // the graph as a detached constant: no gradient flows back through
        // the recurrence from the future side.
        let fut_vals = tape.value(states[tc.window - 1]).clone();
        let futures = tape.constant(fut_vals.clone());

        let mut targets = Vec::with_capacity(bsz);
        for (b, s) in cb.samples.iter().enumerate() {
            let v = fut_vals.data()[b * net.state_dim() + s.a_slot * net.slot_width];
            targets.push(self.bins.bin_of(v));
        }

        let pair = verify_pairwise(&mut tape, &p, &net, &cb, pred.probs, futures)?;
        let nce = nce_loss(&mut tape, pair)?;
        let pl = prediction_loss(&mut tape, pred.probs, &targets)?;
        let ent = entropy_of_rows(&mut tape, cb.probs)?;
        let (_usage, div) = diversity_regularizer(&mut tape, cb.a_onehot)?;
        let vf = variance_floor_penalty(&mut tape, states[c_idx], tc.var_floor)?;

        let n_w = tape.scale(nce, tc.nce_weight);
        let p_w = tape.scale(pl, tc.prediction_weight);
        let e_w = tape.scale(ent, -tc.entropy_weight);
        let d_w = tape.scale(div, -tc.diversity_weight);
        let v_w = tape.scale(vf, tc.var_floor_weight);
        let mut total = tape.add(n_w, p_w)?;
        total = tape.add(total, e_w)?;
        total = tape.add(total, d_w)?;
        total = tape.add(total, v_w)?;

        let mut slot_usage = vec![0usize; net.slots];
        let mut a_counts = vec![0usize; net.slots];
        for s in &cb.samples {
            for &sel in &s.selected {
                slot_usage[sel] += 1;
            }
            a_counts[s.a_slot] += 1;
        }
        let breakdown = LossBreakdown {
            total: tape.value(total).item(),
            nce: tape.value(nce).item(),
            prediction: tape.value(pl).item(),
            entropy_reg: tape.value(ent).item(),
            diversity_reg: tape.value(div).item(),
            var_floor: tape.value(vf).item(),
            slot_usage,
            a_counts,
        };
        if !breakdown.total.is_finite() {
            return Err(TrainError::NonFinite {
                step: self.step,
                detail: format!(
                    "nce={} pred={} ent={} div={} vf={} picks={:?}",
                    breakdown.nce,
                    breakdown.prediction,
                    breakdown.entropy_reg,
                    breakdown.diversity_reg,
                    breakdown.var_floor,
                    picks
                ),
            });
        }

        let grads = tape.backward(total)?;
        self.store.adam_step(grads.by_param(), self.hyper)?;
        Ok(breakdown)
    }

    /// Runs the configured number of steps, streaming one JSON metrics line
    /// per step and saving periodic plus final checkpoints under `out_dir`.
    /// `on_step` fires after every update with the step index just finished.
    pub fn run(
        &mut self,
        out_dir: &Path,
        mut on_step: impl FnMut(usize, &LossBreakdown),
    ) -> Result<RunArtifacts> {
        std::fs::create_dir_all(out_dir)?;
        let metrics_path = out_dir.join("metrics.jsonl");
        let mut mw = BufWriter::new(File::create(&metrics_path)?);

        while self.step < self.cfg.train.steps {
            let idx = self.step;
            let tau_used = self.tau;
            let bd = self.train_step()?;
            let row = MetricsRow {
                step: idx,
                total: bd.total,
                nce: bd.nce,
                pred: bd.prediction,
                ent: bd.entropy_reg,
                div: bd.diversity_reg,
                tau: tau_used,
                slot_usage: &bd.slot_usage,
            };
            serde_json::to_writer(&mut mw, &row)?;
            mw.write_all(b"\n")?;
            if (idx + 1) % self.cfg.train.checkpoint_every == 0 {
                let path = out_dir.join(format!("checkpoint_{:06}.bin", idx + 1));
                checkpoint::save(&self.store, &path)?;
            }
            on_step(idx, &bd);
        }
        mw.flush()?;

        let final_checkpoint = out_dir.join("checkpoint_final.bin");
        checkpoint::save(&self.store, &final_checkpoint)?;
        Ok(RunArtifacts {
            metrics_path,
            final_checkpoint,
        })
    }
}

/// Saves the parameter store to `path` in the versioned binary format.
pub fn save_checkpoint(store: &ParameterStore, path: &Path) -> Result<()> {
    Ok(checkpoint::save(store, path)?)
}

/// Loads a parameter store previously written by [`save_checkpoint`].
pub fn load_checkpoint(path: &Path) -> Result<ParameterStore> {
    Ok(checkpoint::load(path)?)
}

//! Run configuration: training hyperparameters plus the environment and
//! network configs, loadable from one flat key=value TOML file.

use std::path::Path;

use cplab_env::EnvConfig;
use cplab_nets::NetConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TrainError};

/// Training-loop hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Prediction horizon K in environment steps.
    pub horizon: usize,
    /// Unroll window length; the conscious step runs at `window - horizon - 1`.
    pub window: usize,
    pub batch_size: usize,
    /// In-batch negatives per positive; must equal `batch_size - 1`.
    pub negatives: usize,
    pub learning_rate: f64,
    /// Weight on the attention-entropy bonus (enters the total negatively).
    pub entropy_weight: f64,
    /// Weight on the slot-usage diversity bonus (enters negatively).
    pub diversity_weight: f64,
    pub prediction_weight: f64,
    pub nce_weight: f64,
    /// Weight on the batch-variance floor penalty that guards the
    /// all-constant degenerate representation.
    pub var_floor_weight: f64,
    /// Minimum per-coordinate batch variance before the penalty engages.
    pub var_floor: f64,
    pub steps: usize,
    pub seed: u64,
    /// Ring-buffer capacity in episodes.
    pub buffer_episodes: usize,
    pub episode_length: usize,
    /// A fresh episode replaces the oldest every this many steps.
    pub refresh_every: usize,
    pub tau_init: f64,
    pub tau_decay: f64,
    pub tau_floor: f64,
    pub checkpoint_every: usize,
    /// Test hook: force this slot of every representation to a constant
    /// value (trivially predictable). Negative disables.
    pub plant_slot: i64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            horizon: 5,
            window: 12,
            batch_size: 32,
            negatives: 31,
            learning_rate: 3e-4,
            entropy_weight: 0.01,
            diversity_weight: 1.0,
            prediction_weight: 1.0,
            nce_weight: 1.0,
            var_floor_weight: 1.0,
            var_floor: 0.05,
            steps: 20_000,
            seed: 0,
            buffer_episodes: 256,
            episode_length: 64,
            refresh_every: 8,
            tau_init: 1.0,
            tau_decay: 0.999,
            tau_floor: 0.1,
            checkpoint_every: 1000,
            plant_slot: -1,
        }
    }
}

impl TrainConfig {
    /// Window index at which the conscious step that drives the losses runs.
    pub fn conscious_index(&self) -> usize {
        self.window - self.horizon - 1
    }

    pub fn validate(&self, net: &NetConfig) -> Result<()> {
        let err = |m: String| Err(TrainError::Config(m));
        if self.window <= self.horizon {
            return err(format!("window {} must exceed horizon {}", self.window, self.horizon));
        }
        if self.batch_size < 2 {
            return err("batch_size must be at least 2 for in-batch negatives".into());
        }
        if self.negatives != self.batch_size - 1 {
            return err(format!(
                "negatives {} must equal batch_size - 1 = {} (in-batch contrastive)",
                self.negatives,
                self.batch_size - 1
            ));
        }
        for (name, v) in [
            ("learning_rate", self.learning_rate),
            ("entropy_weight", self.entropy_weight),
            ("diversity_weight", self.diversity_weight),
            ("prediction_weight", self.prediction_weight),
            ("nce_weight", self.nce_weight),
            ("var_floor_weight", self.var_floor_weight),
            ("var_floor", self.var_floor),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return err(format!("{name} must be a finite non-negative number, got {v}"));
            }
        }
        if self.learning_rate == 0.0 {
            return err("learning_rate must be positive".into());
        }
        if self.episode_length < self.window {
            return err(format!(
                "episode_length {} must cover a window of {}",
                self.episode_length, self.window
            ));
        }
        if self.buffer_episodes == 0 || self.refresh_every == 0 || self.checkpoint_every == 0 {
            return err("buffer_episodes, refresh_every, checkpoint_every must be positive".into());
        }
        if !(self.tau_decay > 0.0 && self.tau_decay <= 1.0) {
            return err(format!("tau_decay {} must lie in (0, 1]", self.tau_decay));
        }
        if self.tau_floor < 0.0 || self.tau_init < self.tau_floor {
            return err(format!(
                "need tau_init >= tau_floor >= 0, got {} and {}",
                self.tau_init, self.tau_floor
            ));
        }
        if self.plant_slot >= net.slots as i64 {
            return err(format!(
                "plant_slot {} outside 0..{} (or negative to disable)",
                self.plant_slot, net.slots
            ));
        }
        Ok(())
    }

    /// Temperature after `step` completed updates.
    pub fn tau_at(&self, step: usize) -> f64 {
        (self.tau_init * self.tau_decay.powi(step as i32)).max(self.tau_floor)
    }
}

/// Everything one run needs: world, architecture, and training settings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub net: NetConfig,
    pub train: TrainConfig,
}

/// Flat serialized form: every field of the three configs as a top-level
/// key, so config files stay a plain key=value list.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FlatConfig {
    grid: usize,
    piles: usize,
    max_height: usize,
    offset_bound: i64,
    fall_threshold: i64,
    nudge_probs: [f64; 3],
    distractors: usize,
    scatter_steps: usize,
    lean_threshold: i64,
    distractor_colors: usize,

    slots: usize,
    slot_width: usize,
    key_dim: usize,
    b_select: usize,
    value_bins: usize,
    enc_hidden: usize,
    enc_out: usize,
    score_hidden: usize,
    role_hidden: usize,
    predict_hidden: usize,
    verify_hidden: usize,

    horizon: usize,
    window: usize,
    batch_size: usize,
    negatives: usize,
    learning_rate: f64,
    entropy_weight: f64,
    diversity_weight: f64,
    prediction_weight: f64,
    nce_weight: f64,
    var_floor_weight: f64,
    var_floor: f64,
    steps: usize,
    seed: u64,
    buffer_episodes: usize,
    episode_length: usize,
    refresh_every: usize,
    tau_init: f64,
    tau_decay: f64,
    tau_floor: f64,
    checkpoint_every: usize,
    plant_slot: i64,
}

impl Default for FlatConfig {
    fn default() -> Self {
        RunConfig::default().flatten()
    }
}

impl RunConfig {
    fn flatten(&self) -> FlatConfig {
        let (e, n, t) = (&self.env, &self.net, &self.train);
        FlatConfig {
            grid: e.grid,
            piles: e.piles,
            max_height: e.max_height,
            offset_bound: e.offset_bound,
            fall_threshold: e.fall_threshold,
            nudge_probs: e.nudge_probs,
            distractors: e.distractors,
            scatter_steps: e.scatter_steps,
            lean_threshold: e.lean_threshold,
            distractor_colors: e.distractor_colors,
            slots: n.slots,
            slot_width: n.slot_width,
            key_dim: n.key_dim,
            b_select: n.b_select,
            value_bins: n.value_bins,
            enc_hidden: n.enc_hidden,
            enc_out: n.enc_out,
            score_hidden: n.score_hidden,
            role_hidden: n.role_hidden,
            predict_hidden: n.predict_hidden,
            verify_hidden: n.verify_hidden,
            horizon: t.horizon,
            window: t.window,
            batch_size: t.batch_size,
            negatives: t.negatives,
            learning_rate: t.learning_rate,
            entropy_weight: t.entropy_weight,
            diversity_weight: t.diversity_weight,
            prediction_weight: t.prediction_weight,
            nce_weight: t.nce_weight,
            var_floor_weight: t.var_floor_weight,
            var_floor: t.var_floor,
            steps: t.steps,
            seed: t.seed,
            buffer_episodes: t.buffer_episodes,
            episode_length: t.episode_length,
            refresh_every: t.refresh_every,
            tau_init: t.tau_init,
            tau_decay: t.tau_decay,
            tau_floor: t.tau_floor,
            checkpoint_every: t.checkpoint_every,
            plant_slot: t.plant_slot,
        }
    }

    fn from_flat(f: FlatConfig) -> Self {
        RunConfig {
            env: EnvConfig {
                grid: f.grid,
                piles: f.piles,
                max_height: f.max_height,
                offset_bound: f.offset_bound,
                fall_threshold: f.fall_threshold,
                nudge_probs: f.nudge_probs,
                distractors: f.distractors,
                scatter_steps: f.scatter_steps,
                lean_threshold: f.lean_threshold,
                distractor_colors: f.distractor_colors,
            },
            net: NetConfig {
                slots: f.slots,
                slot_width: f.slot_width,
                key_dim: f.key_dim,
                b_select: f.b_select,
                value_bins: f.value_bins,
                enc_hidden: f.enc_hidden,
                enc_out: f.enc_out,
                score_hidden: f.score_hidden,
                role_hidden: f.role_hidden,
                predict_hidden: f.predict_hidden,
                verify_hidden: f.verify_hidden,
            },
            train: TrainConfig {
                horizon: f.horizon,
                window: f.window,
                batch_size: f.batch_size,
                negatives: f.negatives,
                learning_rate: f.learning_rate,
                entropy_weight: f.entropy_weight,
                diversity_weight: f.diversity_weight,
                prediction_weight: f.prediction_weight,
                nce_weight: f.nce_weight,
                var_floor_weight: f.var_floor_weight,
                var_floor: f.var_floor,
                steps: f.steps,
                seed: f.seed,
                buffer_episodes: f.buffer_episodes,
                episode_length: f.episode_length,
                refresh_every: f.refresh_every,
                tau_init: f.tau_init,
                tau_decay: f.tau_decay,
                tau_floor: f.tau_floor,
                checkpoint_every: f.checkpoint_every,
                plant_slot: f.plant_slot,
            },
        }
    }

    /// Parse a flat key=value TOML string. Unknown keys are rejected;
    /// omitted keys take their defaults.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let flat: FlatConfig =
            toml::from_str(text).map_err(|e| TrainError::Config(e.to_string()))?;
        let cfg = RunConfig::from_flat(flat);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        RunConfig::from_toml_str(&text)
    }

    /// Serialize back to the flat form (used for run manifests).
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(&self.flatten()).map_err(|e| TrainError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate().map_err(|e| TrainError::Config(e.to_string()))?;
        self.net.validate().map_err(|e| TrainError::Config(e.to_string()))?;
        self.train.validate(&self.net)
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{EnvError, Result};

/// World shape and dynamics constants. Everything numeric lives here so runs
/// can vary the world without recompiling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    /// Side length of the square grid.
    pub grid: usize,
    /// Number of piles.
    pub piles: usize,
    /// Heights are drawn from 1..=max_height.
    pub max_height: usize,
    /// Offsets are clamped to [-offset_bound, offset_bound].
    pub offset_bound: i64,
    /// A pile falls when |offset| * height exceeds this.
    pub fall_threshold: i64,
    /// Probabilities of nudges -1, 0, +1 in that order.
    pub nudge_probs: [f64; 3],
    /// Number of random-walking distractors.
    pub distractors: usize,
    /// Steps a fallen pile spends rescattering its blocks before settling.
    pub scatter_steps: usize,
    /// Lean channels render only when |offset| reaches this; smaller offsets
    /// are invisible in a single frame.
    pub lean_threshold: i64,
    /// Distinct distractor colors, one observation channel each.
    pub distractor_colors: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            grid: 12,
            piles: 3,
            max_height: 4,
            offset_bound: 3,
            fall_threshold: 5,
            nudge_probs: [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            distractors: 4,
            scatter_steps: 3,
            lean_threshold: 2,
            distractor_colors: 2,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid < 2 * self.piles + 2 {
            return Err(EnvError::InvalidConfig(format!(
                "grid {} must be at least 2*piles+2 = {}",
                self.grid,
                2 * self.piles + 2
            )));
        }
        if self.fall_threshold < 1 {
            return Err(EnvError::InvalidConfig(format!(
                "fall_threshold {} must be at least 1",
                self.fall_threshold
            )));
        }
        if self.piles == 0 {
            return Err(EnvError::InvalidConfig("need at least one pile".into()));
        }
        if self.max_height == 0 {
            return Err(EnvError::InvalidConfig("max_height must be at least 1".into()));
        }
        if self.offset_bound < 0 {
            return Err(EnvError::InvalidConfig("offset_bound must be non-negative".into()));
        }
        if self.lean_threshold < 1 {
            return Err(EnvError::InvalidConfig("lean_threshold must be at least 1".into()));
        }
        if self.scatter_steps == 0 {
            return Err(EnvError::InvalidConfig("scatter_steps must be at least 1".into()));
        }
        if self.distractor_colors == 0 {
            return Err(EnvError::InvalidConfig("need at least one distractor color".into()));
        }
        let sum: f64 = self.nudge_probs.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(EnvError::InvalidConfig(format!(
                "nudge probabilities sum to {sum}, not 1"
            )));
        }
        if self.nudge_probs.iter().any(|&p| p < 0.0) {
            return Err(EnvError::InvalidConfig("nudge probabilities must be non-negative".into()));
        }
        Ok(())
    }

    /// Observation channels: empty, block, lean-left, lean-right, then one
    /// per distractor color.
    pub fn channels(&self) -> usize {
        4 + self.distractor_colors
    }

    /// Length of the flattened observation vector.
    pub fn obs_dim(&self) -> usize {
        self.grid * self.grid * self.channels()
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{NetError, Result};

/// Architecture hyperparameters for the representation RNN, the conscious
/// bottleneck, the predictor head, and the verifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetConfig {
    /// Number of named slots in the representation state.
    pub slots: usize,
    /// Width of each slot value vector.
    pub slot_width: usize,
    /// Dimension of the learned per-slot key vectors.
    pub key_dim: usize,
    /// Number of conditioning slots B selected alongside the target slot A.
    pub b_select: usize,
    /// Number of discrete bins for the predicted slot readout.
    pub value_bins: usize,
    /// Hidden width of the two-layer observation encoder.
    pub enc_hidden: usize,
    /// Output width of the observation encoder (GRU input size).
    pub enc_out: usize,
    /// Hidden width of the attention score MLP.
    pub score_hidden: usize,
    /// Hidden width of the role head that picks A among the selected slots.
    pub role_hidden: usize,
    /// Hidden width of the predictor MLP.
    pub predict_hidden: usize,
    /// Hidden width of the verifier MLP.
    pub verify_hidden: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            slots: 16,
            slot_width: 8,
            key_dim: 16,
            b_select: 3,
            value_bins: 16,
            enc_hidden: 64,
            enc_out: 48,
            score_hidden: 32,
            role_hidden: 16,
            predict_hidden: 32,
            verify_hidden: 48,
        }
    }
}

impl NetConfig {
    /// Flattened representation state dimension (`slots * slot_width`).
    pub fn state_dim(&self) -> usize {
        self.slots * self.slot_width
    }

    /// Per-slot feature width seen by the score and role MLPs:
    /// slot value, slot key, and the pooled summary of the previous
    /// conscious content (one key plus value per selected slot).
    pub fn slot_feature_dim(&self) -> usize {
        self.slot_width + self.key_dim + self.content_item_dim()
    }

    /// Width of one conscious content item (key plus value).
    pub fn content_item_dim(&self) -> usize {
        self.key_dim + self.slot_width
    }

    /// Total width of the conscious content vector: `b_select + 1` items.
    pub fn content_dim(&self) -> usize {
        (self.b_select + 1) * self.content_item_dim()
    }

    /// Predictor input width: pooled B content plus the A key.
    pub fn predict_input_dim(&self) -> usize {
        self.content_item_dim() + self.key_dim
    }

    /// Verifier input width: retrieved future slot value, predicted
    /// distribution, pooled B content, and the A key.
    pub fn verify_input_dim(&self) -> usize {
        self.slot_width + self.value_bins + self.content_item_dim() + self.key_dim
    }

    pub fn validate(&self) -> Result<()> {
        if self.slots < 2 {
            return Err(NetError::InvalidConfig("slots must be at least 2".into()));
        }
        if self.slot_width == 0 || self.key_dim == 0 {
            return Err(NetError::InvalidConfig(
                "slot_width and key_dim must be positive".into(),
            ));
        }
        if self.b_select == 0 || self.b_select + 1 > self.slots {
            return Err(NetError::InvalidConfig(format!(
                "b_select must be in 1..slots (got {} with {} slots)",
                self.b_select, self.slots
            )));
        }
        if self.value_bins < 2 {
            return Err(NetError::InvalidConfig("value_bins must be at least 2".into()));
        }
        for (name, v) in [
            ("enc_hidden", self.enc_hidden),
            ("enc_out", self.enc_out),
            ("score_hidden", self.score_hidden),
            ("role_hidden", self.role_hidden),
            ("predict_hidden", self.predict_hidden),
            ("verify_hidden", self.verify_hidden),
        ] {
            if v == 0 {
                return Err(NetError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// Uniform binning of a scalar readout over a fixed range.
///
/// Slot values come out of a tanh-gated recurrence, so the readout range
/// is pinned to `[-1, 1]`; values outside are clamped to the edge bins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinMap {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl BinMap {
    pub fn new(bins: usize) -> Self {
        Self { lo: -1.0, hi: 1.0, bins }
    }

    /// Index of the bin containing `x`, clamped into `0..bins`.
    pub fn bin_of(&self, x: f64) -> usize {
        let span = self.hi - self.lo;
        let raw = ((x - self.lo) / span * self.bins as f64).floor();
        (raw.max(0.0) as usize).min(self.bins - 1)
    }

    /// Center of bin `i`, used when rendering resolved statements.
    pub fn center(&self, i: usize) -> f64 {
        let span = self.hi - self.lo;
        self.lo + span * (i as f64 + 0.5) / self.bins as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = NetConfig::default();
        c.validate().unwrap();
        assert_eq!(c.state_dim(), 128);
        assert_eq!(c.content_item_dim(), 24);
        assert_eq!(c.content_dim(), 96);
        assert_eq!(c.slot_feature_dim(), 48);
        assert_eq!(c.predict_input_dim(), 40);
        assert_eq!(c.verify_input_dim(), 64);
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut c = NetConfig::default();
        c.b_select = 16;
        assert!(c.validate().is_err());
        let mut c = NetConfig::default();
        c.slots = 1;
        assert!(c.validate().is_err());
        let mut c = NetConfig::default();
        c.value_bins = 1;
        assert!(c.validate().is_err());
    }

    #[test]
    fn bin_map_covers_range() {
        let b = BinMap::new(16);
        assert_eq!(b.bin_of(-1.0), 0);
        assert_eq!(b.bin_of(-2.0), 0);
        assert_eq!(b.bin_of(0.999), 15);
        assert_eq!(b.bin_of(2.0), 15);
        assert_eq!(b.bin_of(0.0), 8);
        assert_eq!(b.bin_of(-1e-12), 7);
        for i in 0..16 {
            assert_eq!(b.bin_of(b.center(i)), i);
        }
    }
}

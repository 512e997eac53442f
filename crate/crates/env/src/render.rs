//! Observation rendering: one-hot channel grid, deliberately coarse.

use serde::{Deserialize, Serialize};

use crate::config::EnvConfig;
use crate::world::{PileStatus, WorldState};

pub const CH_EMPTY: usize = 0;
pub const CH_BLOCK: usize = 1;
pub const CH_LEAN_LEFT: usize = 2;
pub const CH_LEAN_RIGHT: usize = 3;
/// Distractor color c renders on channel CH_COLOR_BASE + c.
pub const CH_COLOR_BASE: usize = 4;

/// One-hot G x G x C grid flattened row-major as (row, col, channel).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub grid: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Observation {
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn channel_at(&self, row: usize, col: usize) -> usize {
        let base = (row * self.grid + col) * self.channels;
        let cell = &self.data[base..base + self.channels];
        cell.iter().position(|&v| v == 1.0).expect("one-hot cell")
    }
}

/// Pure projection of the world onto the grid. Offsets below the lean
/// threshold render exactly like offset zero; scattered and settled blocks
/// render as plain blocks.
pub fn render(config: &EnvConfig, state: &WorldState) -> Observation {
    let g = config.grid;
    let ch = config.channels();
    let mut data = vec![0.0; g * g * ch];
    for i in 0..g * g {
        data[i * ch + CH_EMPTY] = 1.0;
    }
    let set = |r: usize, c: usize, channel: usize, data: &mut Vec<f64>| {
        let base = (r * g + c) * ch;
        for v in &mut data[base..base + ch] {
            *v = 0.0;
        }
        data[base + channel] = 1.0;
    };

    for pile in &state.piles {
        let channel = match pile.status {
            PileStatus::Standing if pile.offset <= -config.lean_threshold => CH_LEAN_LEFT,
            PileStatus::Standing if pile.offset >= config.lean_threshold => CH_LEAN_RIGHT,
            _ => CH_BLOCK,
        };
        for (r, c) in pile.cells(g) {
            set(r, c, channel, &mut data);
        }
    }
    for d in &state.distractors {
        set(d.row, d.col, CH_COLOR_BASE + d.color, &mut data);
    }

    Observation { grid: g, channels: ch, data }
}

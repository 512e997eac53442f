//! World state, initial placement, and the one-nudge-per-step dynamics.

use cplab_tensor::SeededRng;
use serde::{Deserialize, Serialize};

use crate::config::EnvConfig;
use crate::error::{EnvError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum PileStatus {
    Standing,
    /// Blocks rescatter each step while `remaining` counts down to zero.
    Scattering { remaining: usize },
    /// Blocks rest wherever the last scatter left them.
    Settled,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pile {
    /// Column on the grid; never changes.
    pub col: usize,
    pub height: usize,
    /// Lean in abstract units; only its coarse sign is ever rendered.
    pub offset: i64,
    pub status: PileStatus,
    /// Scattered block cells (row, col); empty while standing.
    pub blocks: Vec<(usize, usize)>,
}

impl Pile {
    pub fn is_standing(&self) -> bool {
        self.status == PileStatus::Standing
    }

    /// Cells occupied by this pile in the current status.
    pub fn cells(&self, grid: usize) -> Vec<(usize, usize)> {
        match self.status {
            PileStatus::Standing => (0..self.height).map(|i| (grid - 1 - i, self.col)).collect(),
            _ => self.blocks.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Distractor {
    pub row: usize,
    pub col: usize,
    pub color: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldState {
    pub step: u64,
    pub piles: Vec<Pile>,
    pub distractors: Vec<Distractor>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    Fell,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    /// Step counter of the state in which the pile is first scattering.
    pub step: u64,
    pub pile: usize,
    pub kind: EventKind,
}

/// Occupancy grid over every pile block and distractor.
fn occupancy(config: &EnvConfig, piles: &[Pile], distractors: &[Distractor]) -> Vec<bool> {
    let g = config.grid;
    let mut occ = vec![false; g * g];
    for pile in piles {
        for (r, c) in pile.cells(g) {
            occ[r * g + c] = true;
        }
    }
    for d in distractors {
        occ[d.row * g + d.col] = true;
    }
    occ
}

/// Draw `count` distinct empty cells, uniformly without replacement.
fn draw_empty_cells(
    occ: &[bool],
    grid: usize,
    count: usize,
    rng: &mut SeededRng,
) -> Result<Vec<(usize, usize)>> {
    let mut empty: Vec<usize> = (0..grid * grid).filter(|&i| !occ[i]).collect();
    if empty.len() < count {
        return Err(EnvError::Placement {
            what: format!("{count} empty cells needed, {} available", empty.len()),
            attempts: 0,
        });
    }
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let j = k + rng.below(empty.len() - k);
        empty.swap(k, j);
        out.push((empty[k] / grid, empty[k] % grid));
    }
    Ok(out)
}

/// Fresh world: standing piles at separated random columns, random heights,
/// random offsets below the fall line, distractors on empty cells.
pub fn reset(config: &EnvConfig, rng: &mut SeededRng) -> Result<WorldState> {
    config.validate()?;
    let g = config.grid;

    const ATTEMPTS: usize = 1000;
    let mut cols: Option<Vec<usize>> = None;
    'outer: for _ in 0..ATTEMPTS {
        let mut candidate: Vec<usize> = (0..config.piles).map(|_| rng.below(g)).collect();
        candidate.sort_unstable();
        for w in candidate.windows(2) {
            if w[1] - w[0] < 2 {
                continue 'outer;
            }
        }
        cols = Some(candidate);
        break;
    }
    let cols = cols.ok_or_else(|| EnvError::Placement {
        what: format!("{} pile columns with pairwise gap >= 2 on grid {}", config.piles, g),
        attempts: ATTEMPTS,
    })?;

    let mut piles = Vec::with_capacity(config.piles);
    for col in cols {
        let height = 1 + rng.below(config.max_height);
        // enumerate offsets that keep the pile standing, pick uniformly
        let valid: Vec<i64> = (-config.offset_bound..=config.offset_bound)
            .filter(|o| o.abs() * height as i64 <= config.fall_threshold)
            .collect();
        let offset = valid[rng.below(valid.len())];
        piles.push(Pile { col, height, offset, status: PileStatus::Standing, blocks: Vec::new() });
    }

    let occ = occupancy(config, &piles, &[]);
    let cells = draw_empty_cells(&occ, g, config.distractors, rng)?;
    let distractors = cells
        .into_iter()
        .map(|(row, col)| Distractor { row, col, color: rng.below(config.distractor_colors) })
        .collect();

    Ok(WorldState { step: 0, piles, distractors })
}

/// Advance one step: progress scattering piles, nudge one pile, walk the
/// distractors. Returns the new state and any fell events.
pub fn step(config: &EnvConfig, state: &WorldState, rng: &mut SeededRng) -> (WorldState, Vec<EventRecord>) {
    let g = config.grid;
    let mut next = state.clone();
    next.step += 1;
    let mut events = Vec::new();

    // scattering piles rescatter, then settle when the countdown ends
    for i in 0..next.piles.len() {
        let PileStatus::Scattering { remaining } = next.piles[i].status else { continue };
        if remaining == 1 {
            next.piles[i].status = PileStatus::Settled;
            continue;
        }
        next.piles[i].status = PileStatus::Scattering { remaining: remaining - 1 };
        rescatter(config, &mut next, i, rng);
    }

    // one uniformly chosen pile gets a nudge; the fall test runs on the new offset
    let chosen = rng.below(next.piles.len());
    let nudge = rng.categorical(&config.nudge_probs) as i64 - 1;
    if next.piles[chosen].is_standing() {
        let pile = &mut next.piles[chosen];
        pile.offset = (pile.offset + nudge).clamp(-config.offset_bound, config.offset_bound);
        if pile.offset.abs() * pile.height as i64 > config.fall_threshold {
            pile.status = PileStatus::Scattering { remaining: config.scatter_steps };
            rescatter(config, &mut next, chosen, rng);
            events.push(EventRecord { step: next.step, pile: chosen, kind: EventKind::Fell });
        }
    }

    // distractors walk one cell, staying put when blocked
    for i in 0..next.distractors.len() {
        let occ = occupancy(config, &next.piles, &next.distractors);
        let d = &next.distractors[i];
        let (r, c) = (d.row as i64, d.col as i64);
        let (nr, nc) = match rng.below(4) {
            0 => (r - 1, c),
            1 => (r + 1, c),
            2 => (r, c - 1),
            _ => (r, c + 1),
        };
        let color_shift = rng.below(3) as i64 - 1;
        let d = &mut next.distractors[i];
        d.color = (d.color as i64 + color_shift).rem_euclid(config.distractor_colors as i64) as usize;
        if (0..g as i64).contains(&nr) && (0..g as i64).contains(&nc) && !occ[nr as usize * g + nc as usize] {
            d.row = nr as usize;
            d.col = nc as usize;
        }
    }

    (next, events)
}

/// Throw a pile's blocks onto fresh uniformly random empty cells.
fn rescatter(config: &EnvConfig, state: &mut WorldState, pile: usize, rng: &mut SeededRng) {
    let height = state.piles[pile].height;
    state.piles[pile].blocks.clear();
    let occ = occupancy(config, &state.piles, &state.distractors);
    let cells = draw_empty_cells(&occ, config.grid, height, rng)
        .expect("grid has far more cells than blocks");
    state.piles[pile].blocks = cells;
}

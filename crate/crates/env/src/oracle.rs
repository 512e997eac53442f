//! Exact fall probability by enumerating every (pile choice, nudge)
//! sequence up to the horizon.

use crate::config::EnvConfig;
use crate::error::{EnvError, Result};
use crate::world::WorldState;

const PATH_GUARD: u64 = 10_000_000;

/// Probability that `pile` is scattering or settled at or before `horizon`
/// steps from `state`. Distractors and scatter positions are irrelevant to
/// the event and are ignored.
pub fn oracle_fall_prob(
    config: &EnvConfig,
    state: &WorldState,
    pile: usize,
    horizon: usize,
) -> Result<f64> {
    if pile >= state.piles.len() {
        return Err(EnvError::PileIndex { index: pile, count: state.piles.len() });
    }
    let branches = (state.piles.len() * 3) as u64;
    let paths = branches.checked_pow(horizon as u32).unwrap_or(u64::MAX);
    if paths > PATH_GUARD {
        return Err(EnvError::PathGuard { paths, limit: PATH_GUARD });
    }

    let mut offsets: Vec<i64> = state.piles.iter().map(|p| p.offset).collect();
    let mut standing: Vec<bool> = state.piles.iter().map(|p| p.is_standing()).collect();
    if !standing[pile] {
        return Ok(1.0);
    }
    let heights: Vec<i64> = state.piles.iter().map(|p| p.height as i64).collect();
    Ok(enumerate(config, &mut offsets, &mut standing, &heights, pile, horizon))
}

fn enumerate(
    config: &EnvConfig,
    offsets: &mut [i64],
    standing: &mut [bool],
    heights: &[i64],
    target: usize,
    depth: usize,
) -> f64 {
    if !standing[target] {
        return 1.0;
    }
    if depth == 0 {
        return 0.0;
    }
    let pile_prob = 1.0 / offsets.len() as f64;
    let mut total = 0.0;
    for chosen in 0..offsets.len() {
        for (nudge_idx, &nudge_prob) in config.nudge_probs.iter().enumerate() {
            if nudge_prob == 0.0 {
                continue;
            }
            let weight = pile_prob * nudge_prob;
            let nudge = nudge_idx as i64 - 1;
            if !standing[chosen] {
                // nudging a fallen pile changes nothing
                total += weight * enumerate(config, offsets, standing, heights, target, depth - 1);
                continue;
            }
            let saved = offsets[chosen];
            offsets[chosen] = (saved + nudge).clamp(-config.offset_bound, config.offset_bound);
            let fell = offsets[chosen].abs() * heights[chosen] > config.fall_threshold;
            if fell {
                standing[chosen] = false;
            }
            total += weight * enumerate(config, offsets, standing, heights, target, depth - 1);
            standing[chosen] = true;
            offsets[chosen] = saved;
        }
    }
    total
}

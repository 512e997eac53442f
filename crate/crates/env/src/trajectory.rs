//! Sampled episodes: observations for the learner, ground truth for
//! evaluation only.

use std::io::Write;

use cplab_tensor::SeededRng;
use serde::Serialize;

use crate::config::EnvConfig;
use crate::error::{EnvError, Result};
use crate::render::{render, Observation};
use crate::world::{reset, step, EventRecord, WorldState};

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub states: Vec<WorldState>,
    pub observations: Vec<Observation>,
    pub events: Vec<EventRecord>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Events whose resulting state has step counter `t`.
    pub fn events_at(&self, t: u64) -> Vec<EventRecord> {
        self.events.iter().copied().filter(|e| e.step == t).collect()
    }

    /// Whether `pile` falls in the window (t, t+k]; the label for horizon
    /// prediction at time t.
    pub fn falls_within(&self, pile: usize, t: usize, k: usize) -> bool {
        self.events
            .iter()
            .any(|e| e.pile == pile && e.step > t as u64 && e.step <= (t + k) as u64)
    }

    /// One JSON object per step: {"t", "obs", "events", "truth"}.
    pub fn write_jsonl(&self, mut w: impl Write) -> Result<()> {
        #[derive(Serialize)]
        struct StepRecord<'a> {
            t: u64,
            obs: &'a [f64],
            events: Vec<EventRecord>,
            truth: &'a WorldState,
        }
        for (state, obs) in self.states.iter().zip(&self.observations) {
            let record = StepRecord {
                t: state.step,
                obs: obs.as_slice(),
                events: self.events_at(state.step),
                truth: state,
            };
            serde_json::to_writer(&mut w, &record)?;
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Roll the world forward for `length` observed steps from a fresh reset.
pub fn sample_trajectory(config: &EnvConfig, rng: &mut SeededRng, length: usize) -> Result<Trajectory> {
    if length == 0 {
        return Err(EnvError::EmptyTrajectory);
    }
    let mut states = Vec::with_capacity(length);
    let mut observations = Vec::with_capacity(length);
    let mut events = Vec::new();

    let mut state = reset(config, rng)?;
    observations.push(render(config, &state));
    states.push(state.clone());
    for _ in 1..length {
        let (next, mut evs) = step(config, &state, rng);
        events.append(&mut evs);
        observations.push(render(config, &next));
        states.push(next.clone());
        state = next;
    }
    Ok(Trajectory { states, observations, events })
}

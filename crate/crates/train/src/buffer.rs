//! Ring buffer of rendered episodes and window sampling.

use std::collections::VecDeque;

use cplab_env::{sample_trajectory, EnvConfig, Trajectory};
use cplab_tensor::{NdArray, SeededRng};

use crate::error::{Result, TrainError};

/// One episode's rendered observation rows.
#[derive(Debug, Clone)]
pub struct Episode {
    obs: Vec<Vec<f64>>,
}

impl Episode {
    pub fn from_trajectory(traj: &Trajectory) -> Episode {
        let obs = traj.observations.iter().map(|o| o.as_slice().to_vec()).collect();
        Episode { obs }
    }

    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }
}

/// A sampled window: episode index and start offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowPick {
    pub episode: usize,
    pub start: usize,
}

/// Fixed-capacity ring of episodes; oldest evicted first. Sampled windows
/// always lie fully inside one episode.
#[derive(Debug)]
pub struct TrajectoryBuffer {
    episodes: VecDeque<Episode>,
    capacity: usize,
    window: usize,
}

impl TrajectoryBuffer {
    pub fn new(capacity: usize, window: usize) -> TrajectoryBuffer {
        TrajectoryBuffer { episodes: VecDeque::with_capacity(capacity), capacity, window }
    }

    pub fn push(&mut self, ep: Episode) {
        debug_assert!(ep.len() >= self.window);
        if self.episodes.len() == self.capacity {
            self.episodes.pop_front();
        }
        self.episodes.push_back(ep);
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    /// Sample a batch of window starts uniformly over (episode, start).
    pub fn sample_windows(&self, rng: &mut SeededRng, count: usize) -> Result<Vec<WindowPick>> {
        if self.episodes.is_empty() {
            return Err(TrainError::BufferEmpty);
        }
        let mut picks = Vec::with_capacity(count);
        for _ in 0..count {
            let episode = rng.below(self.episodes.len());
            let span = self.episodes[episode].len() - self.window + 1;
            let start = rng.below(span);
            picks.push(WindowPick { episode, start });
        }
        Ok(picks)
    }

    /// Observation batch for window step `t`: row `i` is observation
    /// `start_i + t` of episode `i`. Shape `[count, obs_dim]`.
    pub fn obs_batch(&self, picks: &[WindowPick], t: usize) -> Result<NdArray> {
        let dim = self.episodes[picks[0].episode].obs[0].len();
        let mut data = Vec::with_capacity(picks.len() * dim);
        for p in picks {
            let row = &self.episodes[p.episode].obs[p.start + t];
            data.extend_from_slice(row);
        }
        Ok(NdArray::from_vec(&[picks.len(), dim], data)?)
    }
}

/// Sample one fresh episode from the environment and render it.
pub fn fresh_episode(cfg: &EnvConfig, rng: &mut SeededRng, length: usize) -> Result<Episode> {
    let traj = sample_trajectory(cfg, rng, length)?;
    Ok(Episode::from_trajectory(&traj))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn episode(len: usize, tag: f64) -> Episode {
        Episode { obs: (0..len).map(|i| vec![tag, i as f64]).collect() }
    }

    #[test]
    fn ring_evicts_oldest() {
        let mut buf = TrajectoryBuffer::new(2, 4);
        buf.push(episode(8, 0.0));
        buf.push(episode(8, 1.0));
        buf.push(episode(8, 2.0));
        assert_eq!(buf.len(), 2);
        let picks = vec![WindowPick { episode: 0, start: 0 }];
        let batch = buf.obs_batch(&picks, 0).unwrap();
        assert_eq!(batch.data()[0], 1.0, "episode 0 should now be the second pushed");
    }

    #[test]
    fn windows_stay_inside_episodes() {
        let mut buf = TrajectoryBuffer::new(4, 5);
        for i in 0..4 {
            buf.push(episode(9, i as f64));
        }
        let mut rng = SeededRng::new(3);
        for _ in 0..200 {
            for p in buf.sample_windows(&mut rng, 8).unwrap() {
                assert!(p.start + 5 <= 9, "window must fit: start {}", p.start);
            }
        }
    }

    #[test]
    fn obs_batch_gathers_correct_rows() {
        let mut buf = TrajectoryBuffer::new(3, 2);
        for i in 0..3 {
            buf.push(episode(6, i as f64));
        }
        let picks =
            vec![WindowPick { episode: 2, start: 3 }, WindowPick { episode: 0, start: 1 }];
        let b0 = buf.obs_batch(&picks, 0).unwrap();
        assert_eq!(b0.shape(), &[2, 2]);
        assert_eq!(b0.data(), &[2.0, 3.0, 0.0, 1.0]);
        let b1 = buf.obs_batch(&picks, 1).unwrap();
        assert_eq!(b1.data(), &[2.0, 4.0, 0.0, 2.0]);
    }

    #[test]
    fn empty_buffer_rejected() {
        let buf = TrajectoryBuffer::new(2, 4);
        let mut rng = SeededRng::new(1);
        assert!(matches!(buf.sample_windows(&mut rng, 1), Err(TrainError::BufferEmpty)));
    }

    #[test]
    fn fresh_episode_has_requested_length() {
        let cfg = EnvConfig::default();
        let mut rng = SeededRng::new(5);
        let ep = fresh_episode(&cfg, &mut rng, 16).unwrap();
        assert_eq!(ep.len(), 16);
        assert!(!ep.is_empty());
    }
}

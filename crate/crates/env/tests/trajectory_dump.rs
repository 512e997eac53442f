//! Trajectory sampling and the line-oriented JSON dump.

use cplab_env::{sample_trajectory, EnvConfig, EnvError};
use cplab_tensor::SeededRng;
use serde_json::Value;

#[test]
fn requested_length_is_exact() {
    let config = EnvConfig::default();
    let traj = sample_trajectory(&config, &mut SeededRng::new(3), 50).unwrap();
    assert_eq!(traj.observations.len(), 50);
    assert_eq!(traj.states.len(), 50);
}

#[test]
fn zero_length_is_rejected() {
    let config = EnvConfig::default();
    assert!(matches!(
        sample_trajectory(&config, &mut SeededRng::new(3), 0),
        Err(EnvError::EmptyTrajectory)
    ));
}

#[test]
fn same_seed_gives_byte_identical_dumps() {
    let config = EnvConfig::default();
    let dump = |seed: u64| {
        let traj = sample_trajectory(&config, &mut SeededRng::new(seed), 30).unwrap();
        let mut buf = Vec::new();
        traj.write_jsonl(&mut buf).unwrap();
        buf
    };
    assert_eq!(dump(11), dump(11));
}

#[test]
fn different_seeds_give_different_trajectories() {
    let config = EnvConfig::default();
    for pair in 0..10u64 {
        let a = sample_trajectory(&config, &mut SeededRng::new(pair * 2 + 1), 64).unwrap();
        let b = sample_trajectory(&config, &mut SeededRng::new(pair * 2 + 2), 64).unwrap();
        let differ = a.events != b.events || a.states != b.states;
        assert!(differ, "seed pair {pair} produced identical trajectories");
    }
}

#[test]
fn dump_lines_carry_the_expected_fields() {
    let config = EnvConfig::default();
    let traj = sample_trajectory(&config, &mut SeededRng::new(21), 12).unwrap();
    let mut buf = Vec::new();
    traj.write_jsonl(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 12);
    for (t, line) in lines.iter().enumerate() {
        let v: Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["t"].as_u64().unwrap(), t as u64);
        assert_eq!(v["obs"].as_array().unwrap().len(), config.obs_dim());
        assert!(v["events"].is_array());
        assert!(v["truth"].is_object());
        assert_eq!(v["truth"]["step"].as_u64().unwrap(), t as u64);
    }
}

#[test]
fn events_at_matches_full_log() {
    let config = EnvConfig::default();
    let traj = sample_trajectory(&config, &mut SeededRng::new(17), 80).unwrap();
    let collected: usize = (0..80).map(|t| traj.events_at(t as u64).len()).sum();
    assert_eq!(collected, traj.events.len());
}

#[test]
fn falls_within_window_agrees_with_event_log() {
    let config = EnvConfig::default();
    let traj = sample_trajectory(&config, &mut SeededRng::new(29), 60).unwrap();
    for event in &traj.events {
        let s = event.step as usize;
        assert!(traj.falls_within(event.pile, s - 1, 1));
        assert!(traj.falls_within(event.pile, s.saturating_sub(5), 5 + s.min(5)));
        assert!(!traj.falls_within(event.pile, s, 60));
    }
}

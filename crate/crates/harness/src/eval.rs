//! Assembles the full evaluation report: probes over four feature sources,
//! the oracle ceiling, baseline rollout AUC, the slot-factor mutual
//! information table, and verifier-statement calibration.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use cplab_env::oracle_fall_prob;
use cplab_tensor::{ParameterStore, SeededRng};
use cplab_train::RunConfig;
use serde::Serialize;

use crate::auc::rank_auc;
use crate::baseline::{baseline_latents, eval_baseline, BaselineModel};
use crate::error::{HarnessError, Result};
use crate::features::{eval_fresh_trajectories, standing_at};
use crate::mi::{bin_values, mi_binned};
use crate::probe::{probe_outcome, ProbeReport};
use crate::statements::{collect_statements, resolve_statements, StatementRow};

pub const MI_BINS: usize = 16;

#[derive(Debug, Clone)]
pub struct EvalOptions {
    /// Fresh trajectories to evaluate on.
    pub trajectories: usize,
    pub trajectory_length: usize,
    /// Cap on exact-oracle evaluations per pile (enumeration is costly).
    pub oracle_points: usize,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            trajectories: 24,
            trajectory_length: 64,
            oracle_points: 2000,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MiEntry {
    pub slot: usize,
    pub factor: String,
    pub mi: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct MiReport {
    pub matrix: Vec<MiEntry>,
    /// Selection-frequency-weighted mean MI over slots, averaged over factors.
    pub selected_mean: f64,
    /// Uniform mean over slots (the expectation under random selection).
    pub random_mean: f64,
    pub n: usize,
}

#[derive(Debug, Serialize)]
pub struct EvalReport {
    pub seed: u64,
    pub horizon: usize,
    pub trajectories: usize,
    pub conscious_auc: f64,
    pub full_h_auc: f64,
    pub random_slot_auc: f64,
    pub oracle_auc: f64,
    pub baseline_auc: Option<f64>,
    pub baseline_latent_auc: Option<f64>,
    pub verifier_statement_auc: f64,
    pub statements_resolved: usize,
    pub statements_unresolved: usize,
    pub statements_came_true: usize,
    pub probe_reports: Vec<ProbeReport>,
    pub oracle_reports: Vec<ProbeReport>,
    pub baseline_reports: Vec<ProbeReport>,
    pub mi: MiReport,
    pub wall_clock_secs: f64,
}

fn mean_auc(reports: &[ProbeReport]) -> f64 {
    reports.iter().map(|r| r.auc).sum::<f64>() / reports.len().max(1) as f64
}

/// Runs every evaluation against one trained parameter store. When a
/// baseline model is supplied its rollout AUC and latent probe join the
/// report. Deterministic given `seed`.
pub fn evaluate(
    cfg: &RunConfig,
    store: &ParameterStore,
    baseline: Option<&BaselineModel>,
    seed: u64,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    let start = Instant::now();
    let horizon = cfg.train.horizon;
    let piles = cfg.env.piles;
    let mut rng = SeededRng::new(seed).fork("eval");

    let evals = eval_fresh_trajectories(
        cfg,
        store,
        opts.trajectories,
        opts.trajectory_length,
        &mut rng,
    )?;

    let baseline_latent: Option<Vec<Vec<Vec<f64>>>> = match baseline {
        Some(model) => {
            let mut all = Vec::with_capacity(evals.len());
            for ev in &evals {
                all.push(baseline_latents(model, &ev.trajectory)?);
            }
            Some(all)
        }
        None => None,
    };

    // Per-pile probe datasets over every resolvable timestep with the pile
    // still standing.
    let mut probe_reports = Vec::new();
    let mut latent_reports = Vec::new();
    for pile in 0..piles {
        let mut conscious = Vec::new();
        let mut full_h = Vec::new();
        let mut random = Vec::new();
        let mut latent = Vec::new();
        let mut labels = Vec::new();
        for (ei, ev) in evals.iter().enumerate() {
            let len = ev.trajectory.len();
            for t in 0..len.saturating_sub(horizon) {
                if !standing_at(&ev.trajectory, pile, t) {
                    continue;
                }
                let step = &ev.steps[t];
                conscious.push(step.conscious.clone());
                full_h.push(step.full_h.clone());
                random.push(step.random_slots.clone());
                if let Some(bl) = &baseline_latent {
                    latent.push(bl[ei][t].clone());
                }
                labels.push(ev.trajectory.falls_within(pile, t, horizon));
            }
        }
        push_unless_underpowered(
            &mut probe_reports,
            probe_outcome("conscious", pile, &conscious, &labels, seed),
        )?;
        push_unless_underpowered(
            &mut probe_reports,
            probe_outcome("full-h", pile, &full_h, &labels, seed),
        )?;
        push_unless_underpowered(
            &mut probe_reports,
            probe_outcome("random-slots", pile, &random, &labels, seed),
        )?;
        if baseline.is_some() {
            push_unless_underpowered(
                &mut latent_reports,
                probe_outcome("baseline-latent", pile, &latent, &labels, seed),
            )?;
        }
    }
    if probe_reports.is_empty() {
        return Err(HarnessError::Underpowered(
            "no pile had enough probe data; evaluate more or longer trajectories".into(),
        ));
    }

    // Exact-oracle scores on a deterministic subsample of timesteps; the
    // same points drive the MI table so each enumeration is paid once.
    let mut points: Vec<(usize, usize)> = Vec::new();
    for (ei, ev) in evals.iter().enumerate() {
        for t in 0..ev.trajectory.len().saturating_sub(horizon) {
            points.push((ei, t));
        }
    }
    let stride = (points.len() / opts.oracle_points.max(1)).max(1);
    let sampled: Vec<(usize, usize)> = points.into_iter().step_by(stride).collect();

    let mut oracle_scores: Vec<Vec<f64>> = vec![Vec::new(); piles];
    let mut oracle_labels: Vec<Vec<bool>> = vec![Vec::new(); piles];
    let mut readout_samples: Vec<Vec<f64>> = vec![Vec::new(); cfg.net.slots];
    let mut height_samples = Vec::new();
    let mut offset_samples = Vec::new();
    let mut selection_counts = vec![0usize; cfg.net.slots];
    let mut selection_total = 0usize;
    for &(ei, t) in &sampled {
        let ev = &evals[ei];
        let state = &ev.trajectory.states[t];
        let mut best: Option<(usize, f64)> = None;
        for pile in 0..piles {
            if !state.piles[pile].is_standing() {
                continue;
            }
            let p = oracle_fall_prob(&cfg.env, state, pile, horizon)?;
            oracle_scores[pile].push(p);
            oracle_labels[pile].push(ev.trajectory.falls_within(pile, t, horizon));
            if best.map(|(_, bp)| p > bp).unwrap_or(true) {
                best = Some((pile, p));
            }
        }
        let Some((target_pile, _)) = best else { continue };
        let target = &state.piles[target_pile];
        height_samples.push(target.height as f64);
        offset_samples.push(target.offset as f64);
        for (slot, sample) in readout_samples.iter_mut().enumerate() {
            sample.push(ev.steps[t].readouts[slot]);
        }
        for &s in &ev.steps[t].selected {
            selection_counts[s] += 1;
        }
        selection_total += ev.steps[t].selected.len();
    }

    let mut oracle_reports = Vec::with_capacity(piles);
    for pile in 0..piles {
        let auc = match rank_auc(&oracle_scores[pile], &oracle_labels[pile]) {
            Ok(auc) => auc,
            Err(HarnessError::Underpowered(_)) => continue,
            Err(e) => return Err(e),
        };
        let n = oracle_scores[pile].len();
        oracle_reports.push(ProbeReport {
            source: "oracle".into(),
            pile,
            auc,
            accuracy: f64::NAN,
            n,
            n_pos: oracle_labels[pile].iter().filter(|l| **l).count(),
        });
    }

    let mi = match mi_table(
        &readout_samples,
        &height_samples,
        &offset_samples,
        &selection_counts,
        selection_total,
    ) {
        Ok(mi) => mi,
        Err(HarnessError::Underpowered(_)) => MiReport {
            matrix: Vec::new(),
            selected_mean: f64::NAN,
            random_mean: f64::NAN,
            n: height_samples.len(),
        },
        Err(e) => return Err(e),
    };

    let statements = collect_statements(&evals);
    let resolved_count = statements.iter().filter(|s| s.resolved_bin.is_some()).count();
    let came_true_count = statements
        .iter()
        .filter(|s| s.came_true() == Some(true))
        .count();
    let verifier_auc = match resolve_statements(&statements) {
        Ok(res) => res.auc,
        Err(HarnessError::Underpowered(_)) => f64::NAN,
        Err(e) => return Err(e),
    };

    let baseline_reports = match baseline {
        Some(model) => {
            let trajs: Vec<&cplab_env::Trajectory> =
                evals.iter().map(|e| &e.trajectory).collect();
            let mut roll_rng = SeededRng::new(seed).fork("baseline-rollouts");
            eval_baseline(model, &cfg.env, &trajs, horizon, &mut roll_rng)?
        }
        None => Vec::new(),
    };

    let report = EvalReport {
        seed,
        horizon,
        trajectories: evals.len(),
        conscious_auc: mean_auc(&by_source(&probe_reports, "conscious")),
        full_h_auc: mean_auc(&by_source(&probe_reports, "full-h")),
        random_slot_auc: mean_auc(&by_source(&probe_reports, "random-slots")),
        oracle_auc: mean_auc(&oracle_reports),
        baseline_auc: (!baseline_reports.is_empty()).then(|| mean_auc(&baseline_reports)),
        baseline_latent_auc: (!latent_reports.is_empty()).then(|| mean_auc(&latent_reports)),
        verifier_statement_auc: verifier_auc,
        statements_resolved: resolved_count,
        statements_unresolved: statements.len() - resolved_count,
        statements_came_true: came_true_count,
        probe_reports: probe_reports.into_iter().chain(latent_reports).collect(),
        oracle_reports,
        baseline_reports,
        mi,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    };
    Ok(report)
}

fn by_source(reports: &[ProbeReport], source: &str) -> Vec<ProbeReport> {
    reports.iter().filter(|r| r.source == source).cloned().collect()
}

/// Keep the report when there is one; drop piles with too little data and
/// propagate every other failure.
fn push_unless_underpowered(
    out: &mut Vec<ProbeReport>,
    result: Result<ProbeReport>,
) -> Result<()> {
    match result {
        Ok(report) => {
            out.push(report);
            Ok(())
        }
        Err(HarnessError::Underpowered(_)) => Ok(()),
        Err(e) => Err(e),
    }
}

fn mi_table(
    readouts: &[Vec<f64>],
    heights: &[f64],
    offsets: &[f64],
    selection_counts: &[usize],
    selection_total: usize,
) -> Result<MiReport> {
    let n = heights.len();
    if n < 50 {
        return Err(HarnessError::Underpowered(format!(
            "MI table needs a reasonable sample, got {n} points"
        )));
    }
    let height_bins = bin_values(heights, MI_BINS)?;
    let offset_bins = bin_values(offsets, MI_BINS)?;
    let slots = readouts.len();

    let mut matrix = Vec::with_capacity(slots * 2);
    let mut per_slot_mean = vec![0.0; slots];
    for (slot, series) in readouts.iter().enumerate() {
        let r = bin_values(series, MI_BINS)?;
        for (name, target) in [("height", &height_bins), ("offset", &offset_bins)] {
            let mi = mi_binned(&r, target, MI_BINS)?;
            per_slot_mean[slot] += mi / 2.0;
            matrix.push(MiEntry {
                slot,
                factor: name.into(),
                mi,
                n,
            });
        }
    }

    let uniform = per_slot_mean.iter().sum::<f64>() / slots as f64;
    let weighted = if selection_total > 0 {
        per_slot_mean
            .iter()
            .zip(selection_counts)
            .map(|(mi, c)| mi * *c as f64)
            .sum::<f64>()
            / selection_total as f64
    } else {
        0.0
    };
    Ok(MiReport {
        matrix,
        selected_mean: weighted,
        random_mean: uniform,
        n,
    })
}

/// Writes report.json plus the plot-ready CSV files into `out_dir`.
pub fn write_report(report: &EvalReport, statements: &[StatementRow], out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let json = serde_json::to_string_pretty(report)?;
    std::fs::write(out_dir.join("report.json"), json)?;

    let mut auc = String::from("seed,source,auc\n");
    for r in report
        .probe_reports
        .iter()
        .chain(&report.oracle_reports)
        .chain(&report.baseline_reports)
    {
        auc.push_str(&format!("{},{}/pile{},{}\n", report.seed, r.source, r.pile, r.auc));
    }
    std::fs::write(out_dir.join("auc_by_seed.csv"), auc)?;

    let mut mi = String::from("slot,factor,mi,n\n");
    for e in &report.mi.matrix {
        mi.push_str(&format!("{},{},{},{}\n", e.slot, e.factor, e.mi, e.n));
    }
    std::fs::write(out_dir.join("mi_matrix.csv"), mi)?;

    let mut w = std::fs::File::create(out_dir.join("statements.tsv"))?;
    crate::statements::write_statements_tsv(statements, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Converts a metrics.jsonl training stream into loss_curve.csv.
pub fn write_loss_curve(metrics_path: &Path, out_path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(metrics_path)?;
    let mut csv = String::from("step,total,nce,pred\n");
    for line in text.lines() {
        let row: serde_json::Value = serde_json::from_str(line)?;
        csv.push_str(&format!(
            "{},{},{},{}\n",
            row["step"], row["total"], row["nce"], row["pred"]
        ));
    }
    std::fs::write(out_path, csv)?;
    Ok(())
}

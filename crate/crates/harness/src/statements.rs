//! Statement logs: flattening evaluated trajectories into the tab-separated
//! dump format and scoring the verifier against statement outcomes.

use std::io::Write;

use crate::auc::rank_auc;
use crate::error::{HarnessError, Result};
use crate::features::TrajectoryEval;

/// One emitted statement with its resolution state. Score and resolved bin
/// stay empty until the trajectory reaches t + K.
#[derive(Debug, Clone, serde::Serialize)]
pub struct StatementRow {
    /// Trajectory the statement came from (index into the evaluated set).
    pub trajectory: usize,
    pub t: usize,
    pub horizon: usize,
    pub a_slot: usize,
    pub argmax_bin: usize,
    pub max_prob: f64,
    pub b_slots: Vec<usize>,
    pub verifier_score: Option<f64>,
    pub resolved_bin: Option<usize>,
    pub utterance: String,
}

impl StatementRow {
    /// True outcome once resolved: the realized bin matched the prediction.
    pub fn came_true(&self) -> Option<bool> {
        self.resolved_bin.map(|r| r == self.argmax_bin)
    }
}

/// Summary of scoring the verifier as a truth estimator over statements.
#[derive(Debug, Clone, serde::Serialize)]
pub struct StatementResolution {
    pub auc: f64,
    pub resolved: usize,
    pub unresolved: usize,
    pub came_true: usize,
}

/// Flattens evaluated trajectories into statement rows.
pub fn collect_statements(evals: &[TrajectoryEval]) -> Vec<StatementRow> {
    let mut rows = Vec::new();
    for (traj_idx, ev) in evals.iter().enumerate() {
        for step in &ev.steps {
            rows.push(StatementRow {
                trajectory: traj_idx,
                t: step.t,
                horizon: step.statement.horizon,
                a_slot: step.statement.a_slot,
                argmax_bin: step.statement.argmax_bin,
                max_prob: step.statement.max_prob,
                b_slots: step.statement.b_slots.clone(),
                verifier_score: step.verifier_score,
                resolved_bin: step.realized_bin,
                utterance: step.statement.render(),
            });
        }
    }
    rows
}

/// Writes the tab-separated statement dump, one line per statement, with a
/// header row. Unresolved statements leave score and bin empty.
pub fn write_statements_tsv(rows: &[StatementRow], mut w: impl Write) -> Result<()> {
    writeln!(
        w,
        "t\tK\tA_id\targmax_bin\tmax_p\tB_ids\tverifier_score\tresolved_bin\tutterance"
    )?;
    for r in rows {
        let b_ids =
            r.b_slots.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
        let score = r.verifier_score.map(|s| s.to_string()).unwrap_or_default();
        let bin = r.resolved_bin.map(|b| b.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.t, r.horizon, r.a_slot, r.argmax_bin, r.max_prob, b_ids, score, bin, r.utterance
        )?;
    }
    Ok(())
}

const MIN_RESOLVED: usize = 200;

/// AUC of the verifier score against whether each resolved statement came
/// true. Unresolved statements are skipped and counted.
pub fn resolve_statements(rows: &[StatementRow]) -> Result<StatementResolution> {
    let mut scores = Vec::new();
    let mut truths = Vec::new();
    let mut unresolved = 0;
    for r in rows {
        match (r.verifier_score, r.came_true()) {
            (Some(s), Some(t)) => {
                scores.push(s);
                truths.push(t);
            }
            _ => unresolved += 1,
        }
    }
    if scores.len() < MIN_RESOLVED {
        return Err(HarnessError::Underpowered(format!(
            "verifier calibration needs at least {MIN_RESOLVED} resolved statements, got {}",
            scores.len()
        )));
    }
    let auc = rank_auc(&scores, &truths)?;
    Ok(StatementResolution {
        auc,
        resolved: scores.len(),
        unresolved,
        came_true: truths.iter().filter(|t| **t).count(),
    })
}

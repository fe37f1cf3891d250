//! Run-level majority voting and plan-level weighted voting.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::OrchestratorError;
use crate::types::RunResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteMethod {
    Majority,
    Weighted,
}

impl VoteMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            VoteMethod::Majority => "majority",
            VoteMethod::Weighted => "weighted",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteOutcome {
    pub winner: String,
    pub tally: BTreeMap<String, f64>,
    pub method: VoteMethod,
    /// Whether the top tally was shared and a tie-break decided the winner.
    pub tie_broken: bool,
}

/// Per-answer statistics gathered during a tally.
struct Entry {
    score: f64,
    /// Secondary key: larger wins.
    secondary: f64,
    /// Tertiary key: smaller wins.
    first_index: u64,
}

/// Relative float equality used for tally ties.
fn tally_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * 1f64.max(a.abs()).max(b.abs())
}

fn resolve(entries: BTreeMap<String, Entry>, method: VoteMethod, exact: bool) -> VoteOutcome {
    let top = entries.values().map(|e| e.score).fold(f64::NEG_INFINITY, f64::max);
    let tied = |s: f64| if exact { s == top } else { tally_eq(s, top) };
    let contenders: Vec<(&String, &Entry)> = entries.iter().filter(|(_, e)| tied(e.score)).collect();
    let tie_broken = contenders.len() > 1;
    let (winner, _) = contenders
        .into_iter()
        .min_by(|(_, a), (_, b)| {
            b.secondary
                .total_cmp(&a.secondary)
                .then(a.first_index.cmp(&b.first_index))
        })
        .expect("at least one answer");
    VoteOutcome {
        winner: winner.clone(),
        tally: entries.iter().map(|(k, e)| (k.clone(), e.score)).collect(),
        method,
        tie_broken,
    }
}

/// Count runs per canonical answer. Ties go to the answer with the higher
/// single-run confidence, then to the answer given by the lowest run id.
///
/// Only valid runs vote; when no run is valid, all runs do.
pub fn majority_vote(runs: &[RunResult]) -> Result<VoteOutcome, OrchestratorError> {
    if runs.is_empty() {
        return Err(OrchestratorError::NoRuns);
    }
    let any_valid = runs.iter().any(RunResult::is_valid);
    let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
    for r in runs.iter().filter(|r| !any_valid || r.is_valid()) {
        let e = entries.entry(r.canonical_answer.clone()).or_insert(Entry {
            score: 0.0,
            secondary: f64::NEG_INFINITY,
            first_index: u64::MAX,
        });
        e.score += 1.0;
        e.secondary = e.secondary.max(r.confidence);
        e.first_index = e.first_index.min(u64::from(r.run_id));
    }
    Ok(resolve(entries, VoteMethod::Majority, true))
}

/// Sum plan weights per answer; `plan_answers[k]` belongs to plan index `k`.
/// Ties go to the answer with the largest single weight, then to the one
/// backed by the lowest plan index.
pub fn weighted_vote(plan_answers: &[(String, f64)]) -> Result<VoteOutcome, OrchestratorError> {
    if plan_answers.is_empty() {
        return Err(OrchestratorError::NoRuns);
    }
    if plan_answers.iter().any(|(_, w)| !(w.is_finite() && *w >= 0.0)) {
        return Err(OrchestratorError::InvalidWeights);
    }
    if plan_answers.iter().all(|(_, w)| *w == 0.0) {
        return Err(OrchestratorError::InvalidWeights);
    }
    let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
    for (k, (ans, w)) in plan_answers.iter().enumerate() {
        let e = entries.entry(ans.clone()).or_insert(Entry {
            score: 0.0,
            secondary: f64::NEG_INFINITY,
            first_index: u64::MAX,
        });
        e.score += w;
        e.secondary = e.secondary.max(*w);
        e.first_index = e.first_index.min(k as u64);
    }
    Ok(resolve(entries, VoteMethod::Weighted, false))
}

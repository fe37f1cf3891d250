//! Regret accounting with the split into filtering and within-shortlist loss.

use serde::{Deserialize, Serialize};

use super::DiagnosticsError;

/// One decision with the true mean reward of every agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretStep {
    pub mu: Vec<f64>,
    /// Indices into `mu` that survived screening.
    pub candidates: Vec<usize>,
    pub chosen: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretTrace {
    pub instantaneous: Vec<f64>,
    pub cumulative: Vec<f64>,
    /// Loss from screening out the best agent: `max_all μ − max_shortlist μ`.
    pub filtering: Vec<f64>,
    /// Loss inside the shortlist: `max_shortlist μ − μ_chosen`.
    pub within: Vec<f64>,
    pub bound: Option<f64>,
}

fn max_of(it: impl Iterator<Item = f64>) -> f64 {
    it.fold(f64::NEG_INFINITY, f64::max)
}

/// Per-step and cumulative regret. `bound` is reported alongside unchanged.
pub fn regret_trace(steps: &[RegretStep], bound: Option<f64>) -> Result<RegretTrace, DiagnosticsError> {
    let mut out = RegretTrace {
        instantaneous: Vec::with_capacity(steps.len()),
        cumulative: Vec::with_capacity(steps.len()),
        filtering: Vec::with_capacity(steps.len()),
        within: Vec::with_capacity(steps.len()),
        bound,
    };
    let mut total = 0.0;
    for (i, s) in steps.iter().enumerate() {
        let bad = |msg: &str| DiagnosticsError::InvalidStep {
            step: i,
            msg: msg.to_string(),
        };
        if s.candidates.is_empty() || s.candidates.iter().any(|c| *c >= s.mu.len()) {
            return Err(bad("candidate index out of range"));
        }
        if !s.candidates.contains(&s.chosen) {
            return Err(bad("chosen agent is not a candidate"));
        }
        let best_all = max_of(s.mu.iter().copied());
        let best_short = max_of(s.candidates.iter().map(|c| s.mu[*c]));
        let chosen = s.mu[s.chosen];
        let inst = best_all - chosen;
        total += inst;
        out.instantaneous.push(inst);
        out.cumulative.push(total);
        out.filtering.push(best_all - best_short);
        out.within.push(best_short - chosen);
    }
    Ok(out)
}

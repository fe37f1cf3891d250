//! Shaped post-vote rewards.

use serde::{Deserialize, Serialize};

use super::{normalize_answer, OrchestratorError};
use crate::types::RunResult;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardParams {
    pub b_win: f64,
    pub b_corr: f64,
    pub p_inc: f64,
    pub lambda_lat: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            b_win: 0.5,
            b_corr: 0.5,
            p_inc: 0.5,
            lambda_lat: 0.1,
        }
    }
}

impl RewardParams {
    pub fn new(b_win: f64, b_corr: f64, p_inc: f64, lambda_lat: f64) -> Result<Self, OrchestratorError> {
        let p = Self {
            b_win,
            b_corr,
            p_inc,
            lambda_lat,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), OrchestratorError> {
        let all = [self.b_win, self.b_corr, self.p_inc, self.lambda_lat];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(OrchestratorError::InvalidRewardParams);
        }
        Ok(())
    }

    /// Closed interval every shaped reward falls in.
    pub fn bounds(&self) -> (f64, f64) {
        (-self.p_inc - self.lambda_lat, 1.0 + self.b_win + self.b_corr)
    }
}

/// Whether the voted answer matches the normalized gold label.
pub fn is_correct(y_star: &str, gold: &str) -> bool {
    normalize_answer(gold) == y_star
}

/// `1[valid] + b_win·1[y_i = y*] + 1[gold]·(b_corr·1[correct] − p_inc·1[¬correct]) − λ_lat·sqrt(latency)`.
pub fn shaped_reward(run: &RunResult, y_star: &str, gold: Option<&str>, params: &RewardParams) -> f64 {
    let valid = if run.is_valid() { 1.0 } else { 0.0 };
    let agrees = if run.is_valid() && run.canonical_answer == y_star {
        params.b_win
    } else {
        0.0
    };
    let correctness = match gold {
        Some(g) if is_correct(y_star, g) => params.b_corr,
        Some(_) => -params.p_inc,
        None => 0.0,
    };
    let latency = run.latency_norm.clamp(0.0, 1.0);
    valid + agrees + correctness - params.lambda_lat * latency.sqrt()
}

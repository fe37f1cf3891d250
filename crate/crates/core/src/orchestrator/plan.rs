//! Decomposition plans and the plan provider interface.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::OrchestratorError;
use crate::types::{AgentId, Subtask};

/// One decomposition of a task into a subtask chain, with the match score of
/// the agent routed to each step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub plan_index: u32,
    pub planner: Option<AgentId>,
    pub chain: Vec<Subtask>,
    pub step_scores: Vec<f64>,
}

/// Mean of the per-step match scores along a plan's chain.
pub fn plan_weight(step_scores: &[f64]) -> Result<f64, OrchestratorError> {
    if step_scores.is_empty() {
        return Err(OrchestratorError::EmptyChain);
    }
    Ok(step_scores.iter().sum::<f64>() / step_scores.len() as f64)
}

/// A planner's output could not be turned into a chain.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("plan from {planner} could not be parsed: {reason}")]
pub struct PlanParseError {
    pub planner: AgentId,
    pub reason: String,
}

pub trait PlanProvider {
    /// Produce plan number `plan_index` for `task`, drafted by `planner`.
    fn plan(
        &self,
        task: &Subtask,
        planner: &AgentId,
        plan_index: u32,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<Subtask>, PlanParseError>;
}

/// Seeded stand-in for an LLM planner: splits the task requirement into one
/// to three contiguous word chunks. Every step sees the task input; only the
/// last step carries the task's gold answer.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDecomposer {
    pub max_steps: usize,
    /// Probability that a drafted plan is unparseable.
    pub parse_fail_rate: f64,
}

impl Default for SyntheticDecomposer {
    fn default() -> Self {
        Self {
            max_steps: 3,
            parse_fail_rate: 0.0,
        }
    }
}

impl PlanProvider for SyntheticDecomposer {
    fn plan(
        &self,
        task: &Subtask,
        planner: &AgentId,
        _plan_index: u32,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<Subtask>, PlanParseError> {
        if self.parse_fail_rate > 0.0 && rng.random::<f64>() < self.parse_fail_rate {
            return Err(PlanParseError {
                planner: planner.clone(),
                reason: "missing subtask list".into(),
            });
        }
        let words: Vec<&str> = task.requirement.split_whitespace().collect();
        let max = self.max_steps.max(1).min(words.len().max(1));
        let n = rng.random_range(1..=max);
        let mut chain = Vec::with_capacity(n);
        for m in 0..n {
            let lo = m * words.len() / n;
            let hi = (m + 1) * words.len() / n;
            let mut s = task.clone();
            s.requirement = if words.is_empty() {
                task.requirement.clone()
            } else {
                words[lo..hi].join(" ")
            };
            if m + 1 < n {
                s.gold = None;
            }
            chain.push(s);
        }
        Ok(chain)
    }
}

/// Planner that always returns the same fixed chain length, for tests and
/// counting experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedDecomposer {
    pub steps: usize,
}

impl PlanProvider for FixedDecomposer {
    fn plan(
        &self,
        task: &Subtask,
        _planner: &AgentId,
        _plan_index: u32,
        _rng: &mut dyn RngCore,
    ) -> Result<Vec<Subtask>, PlanParseError> {
        Ok((0..self.steps.max(1))
            .map(|m| {
                let mut s = task.clone();
                if m + 1 < self.steps {
                    s.gold = None;
                }
                s
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn weight_examples() {
        assert_eq!(plan_weight(&[0.8]).unwrap(), 0.8);
        assert!((plan_weight(&[0.6, 0.8, 1.0]).unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(plan_weight(&[0.0, 0.0]).unwrap(), 0.0);
        assert!(plan_weight(&[]).is_err());
    }

    #[test]
    fn synthetic_plans_cover_requirement() {
        let mut task = Subtask::new("gsm8k-1", "add the numbers then double the sum");
        task.gold = Some("10".into());
        let d = SyntheticDecomposer::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let chain = d.plan(&task, &"P".into(), 0, &mut rng).unwrap();
            assert!((1..=3).contains(&chain.len()));
            let joined: Vec<String> = chain.iter().map(|s| s.requirement.clone()).collect();
            assert_eq!(joined.join(" "), task.requirement);
            assert_eq!(chain.last().unwrap().gold.as_deref(), Some("10"));
        }
    }

    #[test]
    fn parse_failures_are_reported() {
        let d = SyntheticDecomposer {
            max_steps: 3,
            parse_fail_rate: 1.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(d.plan(&Subtask::new("t", "x"), &"P".into(), 0, &mut rng).is_err());
    }
}

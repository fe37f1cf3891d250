//! Agent execution interface and a seeded simulated executor.

use std::collections::BTreeMap;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::types::{AgentId, AgentProfile, Subtask};

/// Raw output of one successful execution.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecOutput {
    pub raw_output: String,
    pub confidence: f64,
    pub latency_ms: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{agent} failed: {reason}")]
pub struct ExecError {
    pub agent: AgentId,
    pub reason: String,
    pub latency_ms: f64,
}

pub trait Executor {
    /// Run `subtask` on `agent`. `memory` holds the canonical answers of
    /// earlier steps in the same plan.
    fn execute(
        &mut self,
        agent: &AgentProfile,
        subtask: &Subtask,
        memory: &str,
        run_id: u32,
        rng: &mut dyn RngCore,
    ) -> Result<ExecOutput, ExecError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimAgent {
    /// Probability of a correct answer, per dataset tag.
    #[serde(default)]
    pub accuracy: BTreeMap<String, f64>,
    pub default_accuracy: f64,
    pub failure_rate: f64,
    pub latency_ms: f64,
}

impl Default for SimAgent {
    fn default() -> Self {
        Self {
            accuracy: BTreeMap::new(),
            default_accuracy: 0.7,
            failure_rate: 0.0,
            latency_ms: 500.0,
        }
    }
}

/// Answers correctly with a per-agent, per-dataset probability; wrong answers
/// come from a small pool of distractors so they can collide in a vote.
/// Subtasks without gold get a synthetic per-step reference answer.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimulatedExecutor {
    pub agents: BTreeMap<AgentId, SimAgent>,
    pub distractors: usize,
}

impl SimulatedExecutor {
    pub fn new(agents: BTreeMap<AgentId, SimAgent>) -> Self {
        Self { agents, distractors: 3 }
    }

    pub fn accuracy(&self, agent: &AgentId, dataset: &str) -> f64 {
        let a = self.agents.get(agent).cloned().unwrap_or_default();
        a.accuracy.get(dataset).copied().unwrap_or(a.default_accuracy)
    }
}

impl Executor for SimulatedExecutor {
    fn execute(
        &mut self,
        agent: &AgentProfile,
        subtask: &Subtask,
        _memory: &str,
        _run_id: u32,
        rng: &mut dyn RngCore,
    ) -> Result<ExecOutput, ExecError> {
        let sim = self.agents.get(&agent.id).cloned().unwrap_or_default();
        let jitter = 0.8 + 0.4 * rng.random::<f64>();
        let latency_ms = sim.latency_ms * jitter;
        if rng.random::<f64>() < sim.failure_rate {
            return Err(ExecError {
                agent: agent.id.clone(),
                reason: "simulated failure".into(),
                latency_ms,
            });
        }
        let reference = subtask
            .gold
            .clone()
            .unwrap_or_else(|| format!("{} / {}", subtask.task_id, subtask.requirement));
        let acc = sim
            .accuracy
            .get(&subtask.dataset_tag)
            .copied()
            .unwrap_or(sim.default_accuracy);
        let correct = rng.random::<f64>() < acc;
        let answer = if correct {
            reference
        } else {
            format!("wrong-{}", rng.random_range(0..self.distractors.max(1)))
        };
        let confidence = if correct {
            0.6 + 0.4 * rng.random::<f64>()
        } else {
            0.2 + 0.5 * rng.random::<f64>()
        };
        Ok(ExecOutput {
            raw_output: serde_json::json!({ "final_answer": answer }).to_string(),
            confidence,
            latency_ms,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn perfect_agent_answers_gold() {
        let mut agents = BTreeMap::new();
        agents.insert(
            AgentId::from("A"),
            SimAgent {
                default_accuracy: 1.0,
                ..SimAgent::default()
            },
        );
        let mut ex = SimulatedExecutor::new(agents);
        let mut task = Subtask::new("gsm8k-1", "q");
        task.gold = Some("42".into());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = ex
            .execute(&AgentProfile::new("A", "x"), &task, "", 0, &mut rng)
            .unwrap();
        assert_eq!(crate::orchestrator::extract_and_normalize(&out.raw_output), "42");
    }

    #[test]
    fn failing_agent_errors() {
        let mut agents = BTreeMap::new();
        agents.insert(
            AgentId::from("A"),
            SimAgent {
                failure_rate: 1.0,
                ..SimAgent::default()
            },
        );
        let mut ex = SimulatedExecutor::new(agents);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(ex
            .execute(&AgentProfile::new("A", "x"), &Subtask::new("t", "q"), "", 0, &mut rng)
            .is_err());
    }
}

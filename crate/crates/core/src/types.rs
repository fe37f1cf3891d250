//! Shared domain vocabulary: agents, subtasks, runs and step records.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bandit::ContextVector;

/// Opaque agent identifier. Ordering is lexicographic and is used for every
/// deterministic tie-break in the router.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(String);

impl AgentId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AgentId {
    fn from(s: &str) -> Self {
        Self(s.to_string())
    }
}

/// Static capability identity of one candidate agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub id: AgentId,
    #[serde(default)]
    pub capability_text: String,
    #[serde(default)]
    pub capability_tags: Vec<String>,
    #[serde(default)]
    pub capability_embedding: Option<Vec<f64>>,
    /// Smoothed historical success estimate in `[0, 1]`.
    #[serde(default = "half")]
    pub prior_success: f64,
}

fn half() -> f64 {
    0.5
}

impl AgentProfile {
    pub fn new(id: impl Into<String>, capability_text: impl Into<String>) -> Self {
        Self {
            id: AgentId::new(id),
            capability_text: capability_text.into(),
            capability_tags: Vec::new(),
            capability_embedding: None,
            prior_success: 0.5,
        }
    }

    /// Text used for matching: the declared capability text, or the tags when
    /// no text was declared.
    pub fn matching_text(&self) -> String {
        if self.capability_text.trim().is_empty() {
            self.capability_tags.join(" ")
        } else {
            self.capability_text.clone()
        }
    }
}

/// Laplace-smoothed success estimate `(successes + 1) / (trials + 2)`.
pub fn laplace_prior(successes: u64, trials: u64) -> f64 {
    debug_assert!(successes <= trials);
    (successes as f64 + 1.0) / (trials as f64 + 2.0)
}

/// `min(1, latency / cap)`, with negative latencies mapped to zero.
pub fn normalize_latency(latency_ms: f64, cap_ms: f64) -> f64 {
    if cap_ms <= 0.0 || !latency_ms.is_finite() {
        return 1.0;
    }
    (latency_ms.max(0.0) / cap_ms).min(1.0)
}

/// Runtime signals for one agent: load, normalized latency, reputation and
/// availability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    /// Normalized queue depth, `>= 0`.
    #[serde(default)]
    pub load: f64,
    /// Normalized recent latency in `[0, 1]`.
    #[serde(default)]
    pub latency_norm: f64,
    /// Historical reliability in `[0, 1]`.
    #[serde(default = "one")]
    pub reputation: f64,
    #[serde(default = "yes")]
    pub available: bool,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

impl Default for AgentState {
    fn default() -> Self {
        Self {
            load: 0.0,
            latency_norm: 0.0,
            reputation: 1.0,
            available: true,
        }
    }
}

impl AgentState {
    /// Availability as the 0/1 flag used in scores and contexts.
    pub fn availability(&self) -> f64 {
        if self.available {
            1.0
        } else {
            0.0
        }
    }

    pub(crate) fn check(&self) -> Result<(), &'static str> {
        if !(self.load.is_finite() && self.load >= 0.0) {
            return Err("load must be finite and >= 0");
        }
        if !(0.0..=1.0).contains(&self.latency_norm) {
            return Err("latency_norm must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.reputation) {
            return Err("reputation must lie in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AnswerFormat {
    Numeric,
    McqToken,
    Code,
    ShortText,
    BracketsOnly,
    Json,
    #[default]
    Unspecified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subtask {
    pub task_id: String,
    pub requirement: String,
    #[serde(default)]
    pub input_text: String,
    #[serde(default)]
    pub answer_format: AnswerFormat,
    #[serde(default)]
    pub allowed_tokens: Option<Vec<String>>,
    #[serde(default)]
    pub gold: Option<String>,
    #[serde(default)]
    pub dataset_tag: String,
}

impl Subtask {
    pub fn new(task_id: impl Into<String>, requirement: impl Into<String>) -> Self {
        let task_id = task_id.into();
        let dataset_tag = dataset_tag_of(&task_id);
        Self {
            task_id,
            requirement: requirement.into(),
            input_text: String::new(),
            answer_format: AnswerFormat::Unspecified,
            allowed_tokens: None,
            gold: None,
            dataset_tag,
        }
    }

    pub fn with_input(mut self, input: impl Into<String>) -> Self {
        self.input_text = input.into();
        self
    }

    /// Requirement and input joined by a single space; the embedding path
    /// matches against this text.
    pub fn full_text(&self) -> String {
        if self.input_text.is_empty() {
            self.requirement.clone()
        } else {
            format!("{} {}", self.requirement, self.input_text)
        }
    }

    pub fn check(&self) -> Result<(), &'static str> {
        if self.answer_format == AnswerFormat::McqToken && self.allowed_tokens.as_ref().is_none_or(|t| t.is_empty()) {
            return Err("MCQ_TOKEN subtasks need a non-empty allowed_tokens list");
        }
        Ok(())
    }
}

/// Task-type prefix of a task id: everything before the first `-`, `_`, `/`
/// or `:` separator.
pub fn dataset_tag_of(task_id: &str) -> String {
    task_id
        .split(['-', '/', ':'])
        .next()
        .unwrap_or("")
        .split('_')
        .next()
        .unwrap_or("")
        .to_string()
}

/// Outcome of one executor run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run_id: u32,
    pub raw_output: String,
    pub canonical_answer: String,
    pub confidence: f64,
    /// Executor-reported success.
    pub valid: bool,
    pub latency_norm: f64,
    pub agent: AgentId,
}

impl RunResult {
    /// A valid run reported success and produced a non-empty canonical answer.
    pub fn is_valid(&self) -> bool {
        self.valid && !self.canonical_answer.is_empty()
    }
}

/// One routed execution step awaiting its delayed reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub task_id: String,
    pub plan_index: u32,
    pub step_index: u32,
    pub run_id: u32,
    pub agent: AgentId,
    pub context: ContextVector,
    pub match_score: f64,
    pub latency_norm: f64,
    /// Logical step counter assigned at selection time.
    pub timestamp: u64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laplace_prior_smooths_towards_half() {
        assert_eq!(laplace_prior(0, 0), 0.5);
        assert_eq!(laplace_prior(8, 8), 0.9);
        assert_eq!(laplace_prior(0, 8), 0.1);
    }

    #[test]
    fn latency_is_capped() {
        assert_eq!(normalize_latency(250.0, 1000.0), 0.25);
        assert_eq!(normalize_latency(5000.0, 1000.0), 1.0);
        assert_eq!(normalize_latency(-3.0, 1000.0), 0.0);
    }

    #[test]
    fn dataset_tag_is_task_prefix() {
        assert_eq!(dataset_tag_of("gsm8k-0012"), "gsm8k");
        assert_eq!(dataset_tag_of("medqa_17"), "medqa");
        assert_eq!(dataset_tag_of("plain"), "plain");
    }

    #[test]
    fn mcq_requires_tokens() {
        let mut s = Subtask::new("bbh-1", "pick one");
        s.answer_format = AnswerFormat::McqToken;
        assert!(s.check().is_err());
        s.allowed_tokens = Some(vec!["(A)".into()]);
        assert!(s.check().is_ok());
    }

    #[test]
    fn validity_needs_answer() {
        let r = RunResult {
            run_id: 0,
            raw_output: String::new(),
            canonical_answer: String::new(),
            confidence: 1.0,
            valid: true,
            latency_norm: 0.0,
            agent: "A".into(),
        };
        assert!(!r.is_valid());
    }
}

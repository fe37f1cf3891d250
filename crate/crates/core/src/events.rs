//! Append-only event log with JSONL serialization.
//!
//! Every record carries the logical step counter and the seed of the run that
//! produced it. Records are discriminated by a `"kind"` field. Lines whose kind
//! is `"header"` are provenance stamps written by the CLI and are skipped on
//! read.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::AgentId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    ColdStart,
    Train,
    Test,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::ColdStart, Phase::Train, Phase::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::ColdStart => "cold_start",
            Phase::Train => "train",
            Phase::Test => "test",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Plan,
    Subtask,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub agent: AgentId,
    pub stage1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ucb: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionEvent {
    pub step: u64,
    pub seed: u64,
    pub task_id: String,
    pub level: Level,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<Phase>,
    pub policy: String,
    pub candidates: Vec<ScoredCandidate>,
    pub chosen: AgentId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionEvent {
    pub step: u64,
    pub seed: u64,
    pub task_id: String,
    pub agent: AgentId,
    pub run_id: u32,
    pub latency_norm: f64,
    pub valid: bool,
    #[serde(default)]
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub service_ok: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoteEvent {
    pub step: u64,
    pub seed: u64,
    pub task_id: String,
    pub method: String,
    pub winner: String,
    pub tally: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<Phase>,
    /// Plan whose answer carried the weighted vote, with its planning agent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_plan: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_planner: Option<AgentId>,
    /// Plans requested; 0 when the task was not decomposed.
    #[serde(default)]
    pub plan_count: u32,
    #[serde(default)]
    pub plan_parse_fail: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardEvent {
    pub step: u64,
    pub seed: u64,
    pub task_id: String,
    pub run_id: u32,
    pub agent: AgentId,
    pub reward: f64,
}

/// A bandit update, with enough of the ridge state to rebuild uncertainty
/// traces from the log alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateEvent {
    pub step: u64,
    pub seed: u64,
    pub agent: AgentId,
    pub reward: f64,
    pub t: u64,
    pub theta_delta: f64,
    pub a_inv_diag: Vec<f64>,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShockEvent {
    pub step: u64,
    pub seed: u64,
    pub targets: Vec<AgentId>,
    pub error_rate_boost: f64,
    pub latency_multiplier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    Selection(SelectionEvent),
    Execution(ExecutionEvent),
    Vote(VoteEvent),
    Reward(RewardEvent),
    Update(UpdateEvent),
    Shock(ShockEvent),
}

impl Event {
    pub fn step(&self) -> u64 {
        match self {
            Event::Selection(e) => e.step,
            Event::Execution(e) => e.step,
            Event::Vote(e) => e.step,
            Event::Reward(e) => e.step,
            Event::Update(e) => e.step,
            Event::Shock(e) => e.step,
        }
    }
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Single-writer, append-only sequence of events.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    events: Vec<Event>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, event: Event) {
        self.events.push(event);
    }

    pub fn extend(&mut self, other: EventLog) {
        self.events.extend(other.events);
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Event> {
        self.events.iter()
    }

    pub fn selections(&self) -> impl Iterator<Item = &SelectionEvent> {
        self.events.iter().filter_map(|e| match e {
            Event::Selection(s) => Some(s),
            _ => None,
        })
    }

    pub fn votes(&self) -> impl Iterator<Item = &VoteEvent> {
        self.events.iter().filter_map(|e| match e {
            Event::Vote(v) => Some(v),
            _ => None,
        })
    }

    pub fn updates(&self) -> impl Iterator<Item = &UpdateEvent> {
        self.events.iter().filter_map(|e| match e {
            Event::Update(u) => Some(u),
            _ => None,
        })
    }

    pub fn executions(&self) -> impl Iterator<Item = &ExecutionEvent> {
        self.events.iter().filter_map(|e| match e {
            Event::Execution(x) => Some(x),
            _ => None,
        })
    }

    pub fn shocks(&self) -> impl Iterator<Item = &ShockEvent> {
        self.events.iter().filter_map(|e| match e {
            Event::Shock(s) => Some(s),
            _ => None,
        })
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self, LogError> {
        let mut log = EventLog::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || is_header(trimmed) {
                continue;
            }
            let event = serde_json::from_str(trimmed).map_err(|source| LogError::Parse { line: i + 1, source })?;
            log.push(event);
        }
        Ok(log)
    }
}

fn is_header(line: &str) -> bool {
    line.starts_with("{\"kind\":\"header\"")
}

impl<'a> IntoIterator for &'a EventLog {
    type Item = &'a Event;
    type IntoIter = std::slice::Iter<'a, Event>;

    fn into_iter(self) -> Self::IntoIter {
        self.events.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_carries_kind_discriminator() {
        let mut log = EventLog::new();
        log.push(Event::Reward(RewardEvent {
            step: 3,
            seed: 7,
            task_id: "t".into(),
            run_id: 0,
            agent: "A".into(),
            reward: 1.5,
        }));
        log.push(Event::Shock(ShockEvent {
            step: 4,
            seed: 7,
            targets: vec!["A".into()],
            error_rate_boost: 0.8,
            latency_multiplier: 3.0,
        }));
        let text = log.to_jsonl();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("{\"kind\":\"reward\""));
        assert!(lines[1].starts_with("{\"kind\":\"shock\""));
        let back = EventLog::read_jsonl(text.as_bytes()).unwrap();
        assert_eq!(back, log);
    }

    #[test]
    fn header_lines_are_skipped_and_bad_lines_numbered() {
        let text = "{\"kind\":\"header\",\"seed\":1}\n\n{\"kind\":\"nope\"}\n";
        match EventLog::read_jsonl(text.as_bytes()) {
            Err(LogError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}

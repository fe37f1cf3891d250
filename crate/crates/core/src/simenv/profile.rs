//! Per-agent empirical profiles aggregated from call logs.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::types::AgentId;
use crate::workload::Bin;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    Timeout,
    HttpError,
    ParseError,
    EmptyOutput,
    InvalidJson,
}

impl ErrorKind {
    /// Fixed order used for categorical sampling.
    pub const ALL: [ErrorKind; 5] = [
        ErrorKind::Timeout,
        ErrorKind::HttpError,
        ErrorKind::ParseError,
        ErrorKind::EmptyOutput,
        ErrorKind::InvalidJson,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::Timeout => "timeout",
            ErrorKind::HttpError => "http_error",
            ErrorKind::ParseError => "parse_error",
            ErrorKind::EmptyOutput => "empty_output",
            ErrorKind::InvalidJson => "invalid_json",
        }
    }
}

/// One observed call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallLog {
    pub agent: AgentId,
    pub latency_ms: f64,
    #[serde(default)]
    pub cost: f64,
    #[serde(default)]
    pub error: Option<ErrorKind>,
    #[serde(default)]
    pub difficulty: Option<Bin>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyQuantiles {
    pub p50: f64,
    pub p95: f64,
}

/// Error rates and latency quantiles for one population of calls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeModel {
    pub error_rates: BTreeMap<ErrorKind, f64>,
    pub latency: LatencyQuantiles,
}

impl OutcomeModel {
    pub fn error_total(&self) -> f64 {
        self.error_rates.values().sum()
    }

    pub fn rate(&self, kind: ErrorKind) -> f64 {
        self.error_rates.get(&kind).copied().unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<(), String> {
        for (k, r) in &self.error_rates {
            if !(0.0..=1.0).contains(r) {
                return Err(format!("{} rate {r} outside [0, 1]", k.as_str()));
            }
        }
        if self.error_total() > 1.0 + 1e-12 {
            return Err(format!("error rates sum to {} > 1", self.error_total()));
        }
        let LatencyQuantiles { p50, p95 } = self.latency;
        if !(p50 > 0.0 && p50.is_finite() && p95.is_finite() && p50 <= p95) {
            return Err(format!("latency quantiles need 0 < p50 <= p95, got {p50}/{p95}"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalProfile {
    pub agent: AgentId,
    pub avg_cost: f64,
    #[serde(default)]
    pub n_calls: u64,
    #[serde(flatten)]
    pub model: OutcomeModel,
    /// Optional per-difficulty models; missing bins fall back to `model`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub strata: BTreeMap<Bin, OutcomeModel>,
}

impl EmpiricalProfile {
    pub fn validate(&self) -> Result<(), SimError> {
        let wrap = |msg: String| SimError::InvalidProfile {
            agent: self.agent.to_string(),
            msg,
        };
        if !(self.avg_cost >= 0.0 && self.avg_cost.is_finite()) {
            return Err(wrap("avg_cost must be finite and >= 0".into()));
        }
        self.model.validate().map_err(wrap)?;
        for m in self.strata.values() {
            m.validate().map_err(wrap)?;
        }
        Ok(())
    }

    pub fn model_for(&self, bin: Option<Bin>) -> &OutcomeModel {
        bin.and_then(|b| self.strata.get(&b)).unwrap_or(&self.model)
    }
}

/// Nearest-rank quantile: the smallest value with at least `q·n` values at
/// or below it. `sorted` must be ascending and non-empty.
pub fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let rank = ((q * n as f64) - 1e-9).ceil().max(1.0) as usize;
    sorted[rank.min(n) - 1]
}

fn model_from(rows: &[&CallLog]) -> OutcomeModel {
    let n = rows.len() as f64;
    let mut error_rates: BTreeMap<ErrorKind, f64> = ErrorKind::ALL.iter().map(|k| (*k, 0.0)).collect();
    for r in rows {
        if let Some(e) = r.error {
            *error_rates.get_mut(&e).expect("all kinds present") += 1.0;
        }
    }
    error_rates.values_mut().for_each(|v| *v /= n);
    let mut lat: Vec<f64> = rows.iter().map(|r| r.latency_ms).collect();
    lat.sort_by(f64::total_cmp);
    OutcomeModel {
        error_rates,
        latency: LatencyQuantiles {
            p50: nearest_rank(&lat, 0.5),
            p95: nearest_rank(&lat, 0.95),
        },
    }
}

/// Aggregate one agent's call logs into a profile.
pub fn profile_from_logs(agent: &AgentId, logs: &[CallLog]) -> Result<EmpiricalProfile, SimError> {
    let rows: Vec<&CallLog> = logs.iter().filter(|l| &l.agent == agent).collect();
    if rows.is_empty() {
        return Err(SimError::EmptyLogs(agent.to_string()));
    }
    if rows.iter().any(|r| !(r.latency_ms >= 0.0 && r.latency_ms.is_finite())) {
        return Err(SimError::InvalidProfile {
            agent: agent.to_string(),
            msg: "negative or non-finite latency in logs".into(),
        });
    }
    let mut by_bin: BTreeMap<Bin, Vec<&CallLog>> = BTreeMap::new();
    for r in &rows {
        if let Some(b) = r.difficulty {
            by_bin.entry(b).or_default().push(r);
        }
    }
    Ok(EmpiricalProfile {
        agent: agent.clone(),
        avg_cost: rows.iter().map(|r| r.cost).sum::<f64>() / rows.len() as f64,
        n_calls: rows.len() as u64,
        model: model_from(&rows),
        strata: by_bin.iter().map(|(b, rs)| (*b, model_from(rs))).collect(),
    })
}

/// Profiles for every agent that appears in the logs.
pub fn profiles_from_logs(logs: &[CallLog]) -> Result<BTreeMap<AgentId, EmpiricalProfile>, SimError> {
    if logs.is_empty() {
        return Err(SimError::EmptyLogs("<all>".into()));
    }
    let agents: std::collections::BTreeSet<&AgentId> = logs.iter().map(|l| &l.agent).collect();
    agents
        .into_iter()
        .map(|a| profile_from_logs(a, logs).map(|p| (a.clone(), p)))
        .collect()
}

pub fn read_profiles<R: BufRead>(r: R) -> Result<BTreeMap<AgentId, EmpiricalProfile>, SimError> {
    let mut out = BTreeMap::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| SimError::Io(e.to_string()))?;
        if line.trim().is_empty() || line.starts_with("{\"kind\":\"header\"") {
            continue;
        }
        let p: EmpiricalProfile = serde_json::from_str(&line).map_err(|e| SimError::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?;
        p.validate()?;
        out.insert(p.agent.clone(), p);
    }
    Ok(out)
}

pub fn write_profiles<W: Write>(profiles: &BTreeMap<AgentId, EmpiricalProfile>, mut w: W) -> std::io::Result<()> {
    for p in profiles.values() {
        serde_json::to_writer(&mut w, p)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_call_logs<R: BufRead>(r: R) -> Result<Vec<CallLog>, SimError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| SimError::Io(e.to_string()))?;
        if line.trim().is_empty() || line.starts_with("{\"kind\":\"header\"") {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| SimError::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?);
    }
    Ok(out)
}

const SHIPPED_PROFILES: &str = include_str!("../../fixtures/profiles_synthetic.jsonl");
const SHIPPED_POOL: &str = include_str!("../../fixtures/pool_synthetic.toml");

/// Synthetic five-agent profiles with heterogeneous error rates and latency tails.
pub fn shipped_profiles() -> BTreeMap<AgentId, EmpiricalProfile> {
    read_profiles(SHIPPED_PROFILES.as_bytes()).expect("shipped fixture is valid")
}

/// Agent pool matching [`shipped_profiles`].
pub fn shipped_pool() -> crate::pool::AgentPool {
    crate::pool::AgentPool::from_toml(SHIPPED_POOL, std::path::Path::new(".")).expect("shipped fixture is valid")
}

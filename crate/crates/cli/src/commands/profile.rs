//! `profile`: aggregate raw call logs into per-agent empirical profiles.

use anyhow::{Context, Result};
use serde::Serialize;

use beacon_core::simenv::{profiles_from_logs, read_call_logs, ErrorKind};

use super::fmt;
use crate::config::ExperimentConfig;
use crate::output::{read_input, Outputs};

#[derive(Serialize)]
struct ProfileRow {
    agent: String,
    n_calls: u64,
    avg_cost: String,
    error_total: String,
    timeout: String,
    http_error: String,
    parse_error: String,
    empty_output: String,
    invalid_json: String,
    p50_ms: String,
    p95_ms: String,
}

pub fn run(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let path = cfg
        .profile
        .logs
        .as_deref()
        .context("profile needs call logs (profile.logs or --logs)")?;
    let text = read_input(path)?;
    let logs = read_call_logs(text.as_bytes()).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    let profiles = profiles_from_logs(&logs)?;
    let rows: Vec<ProfileRow> = profiles
        .values()
        .map(|p| {
            let m = &p.model;
            ProfileRow {
                agent: p.agent.to_string(),
                n_calls: p.n_calls,
                avg_cost: fmt(p.avg_cost),
                error_total: fmt(m.error_total()),
                timeout: fmt(m.rate(ErrorKind::Timeout)),
                http_error: fmt(m.rate(ErrorKind::HttpError)),
                parse_error: fmt(m.rate(ErrorKind::ParseError)),
                empty_output: fmt(m.rate(ErrorKind::EmptyOutput)),
                invalid_json: fmt(m.rate(ErrorKind::InvalidJson)),
                p50_ms: fmt(m.latency.p50),
                p95_ms: fmt(m.latency.p95),
            }
        })
        .collect();
    let list: Vec<_> = profiles.values().collect();
    out.jsonl("profiles.jsonl", &list)?;
    out.csv("profiles.csv", &rows)?;
    Ok(())
}

//! `replay`: profile-driven replay of one prompt stream under each policy,
//! with an optional availability shock.

use anyhow::{Context, Result};
use serde::Serialize;

use beacon_core::simenv::{
    recovery_metrics, rolling_rate, run_replay, PromptItem, RecoveryTime, ReplayConfig, ShockEffect, ShockSpec,
};
use beacon_core::workload::synthetic_prompt_stream;

use super::{fmt, load_pool, load_profiles, read_jsonl};
use crate::config::{policy_kind, ExperimentConfig};
use crate::output::Outputs;

#[derive(Serialize)]
struct SummaryRow {
    policy: String,
    pre: String,
    post: String,
    recovery_time: String,
    worst_window: String,
}

pub fn replay_config(cfg: &ExperimentConfig) -> ReplayConfig {
    let r = &cfg.replay;
    ReplayConfig {
        steps: r.steps,
        top_l: cfg.stage1.top_l,
        weights: cfg.stage1.weights,
        sla_ms: r.sla_ms,
        lambda: cfg.policy.lambda,
        beta: cfg.policy.beta,
        features: cfg.policy.features,
        shock: r.shock_at.map(|t0| ShockSpec {
            targets: r.shock_targets.clone(),
            effect: ShockEffect {
                error_rate_boost: r.error_rate_boost,
                latency_multiplier: r.latency_multiplier,
            },
            ..ShockSpec::at(t0)
        }),
        ..ReplayConfig::default()
    }
}

pub fn run(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let r = &cfg.replay;
    anyhow::ensure!(!r.policies.is_empty(), "replay.policies is empty");
    let pool = load_pool(r.pool.as_deref())?;
    let profiles = load_profiles(r.profiles.as_deref())?;
    let stream: Vec<PromptItem> = match &r.prompts {
        Some(p) => read_jsonl(p)?,
        None => synthetic_prompt_stream(r.steps as usize, cfg.seed),
    };
    let rc = replay_config(cfg);

    let mut summary = Vec::new();
    let mut rolling: Vec<Vec<f64>> = Vec::new();
    for name in &r.policies {
        let kind = policy_kind(name, &cfg.policy, r.shock_at)?;
        let trace = run_replay(&stream, &pool, &profiles, kind, &rc, cfg.seed)
            .with_context(|| format!("replaying policy {name}"))?;
        out.jsonl(&format!("trace-{name}.jsonl"), trace.log.events())?;
        rolling.push(rolling_rate(&trace.service_ok, r.window));
        let ok = &trace.service_ok;
        let overall = ok.iter().filter(|x| **x).count() as f64 / ok.len() as f64;
        let row = match trace.shock_at {
            Some(t0) => {
                let m = recovery_metrics(ok, t0, r.window, r.threshold)
                    .with_context(|| format!("recovery metrics for {name}"))?;
                tracing::info!(policy = %name, targets = ?trace.shock_targets, "shock applied");
                SummaryRow {
                    policy: name.clone(),
                    pre: fmt(m.pre_rate),
                    post: fmt(m.post_rate),
                    recovery_time: RecoveryTime(m.recovery_time).to_string(),
                    worst_window: fmt(m.worst_window),
                }
            }
            None => SummaryRow {
                policy: name.clone(),
                pre: fmt(overall),
                post: String::new(),
                recovery_time: String::new(),
                worst_window: rolling
                    .last()
                    .and_then(|v| v.iter().copied().reduce(f64::min))
                    .map_or(String::new(), fmt),
            },
        };
        summary.push(row);
    }
    out.csv("summary.csv", &summary)?;

    // Rolling success per policy, indexed by the last step of each window.
    let mut headers = vec!["step".to_string()];
    headers.extend(r.policies.iter().cloned());
    let n = rolling.iter().map(Vec::len).min().unwrap_or(0);
    let rows: Vec<Vec<String>> = (0..n)
        .map(|i| {
            let mut row = vec![(i + r.window - 1).to_string()];
            row.extend(rolling.iter().map(|v| fmt(v[i])));
            row
        })
        .collect();
    out.csv_table("rolling.csv", &headers, &rows)?;
    Ok(())
}

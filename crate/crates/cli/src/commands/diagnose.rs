//! `diagnose`: radar scores, selection distributions and uncertainty
//! shrinkage from a recorded event log.

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::json;

use beacon_core::diagnostics::{
    radar_from_log, selection_distribution, shrinkage_report, uncertainty_from_log, RadarConfig, RadarReport,
    FEATURE_NAMES,
};
use beacon_core::events::{EventLog, Level, Phase};

use super::fmt;
use crate::config::ExperimentConfig;
use crate::output::{read_input, Outputs};

#[derive(Serialize)]
struct ShareRow {
    level: &'static str,
    phase: &'static str,
    agent: String,
    share: String,
    total: usize,
}

#[derive(Serialize)]
struct ShrinkRow {
    dim: usize,
    name: String,
    early: String,
    late: String,
    rel_drop: String,
}

/// Each section is computed independently; sections the log cannot support
/// are skipped with a warning. The run fails only if none can be computed.
pub fn run(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let d = &cfg.diagnose;
    let path = d
        .log
        .as_deref()
        .context("diagnose needs a log (diagnose.log or --log)")?;
    let text = read_input(path)?;
    let log = EventLog::read_jsonl(text.as_bytes()).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    let radar_cfg = RadarConfig {
        tau_weight: d.tau_weight,
        window: d.window,
        tau_smooth: d.tau_smooth,
        target: d.target.clone(),
    };
    let mut summary = serde_json::Map::new();

    match radar_from_log(&log, None, &radar_cfg) {
        Ok(r) => {
            let headers: Vec<String> = RadarReport::COLUMNS.iter().map(|c| c.to_string()).collect();
            out.csv_table("radar.csv", &headers, &[r.values().iter().map(|v| fmt(*v)).collect()])?;
            summary.insert("radar".into(), json!(r));
        }
        Err(e) => tracing::warn!(%e, "radar skipped"),
    }

    let mut shares = Vec::new();
    for (level, lname) in [(Level::Plan, "plan"), (Level::Subtask, "subtask")] {
        let phases = std::iter::once(None).chain(Phase::ALL.iter().copied().map(Some));
        for phase in phases {
            let Ok(rep) = selection_distribution(&log, level, phase) else {
                continue;
            };
            for (agent, share) in &rep.shares {
                shares.push(ShareRow {
                    level: lname,
                    phase: phase.map_or("all", |p| p.as_str()),
                    agent: agent.to_string(),
                    share: fmt(*share),
                    total: rep.total,
                });
            }
        }
    }
    if shares.is_empty() {
        tracing::warn!("log has no selections; distribution skipped");
    } else {
        summary.insert("distribution_rows".into(), json!(shares.len()));
        out.csv("distribution.csv", &shares)?;
    }

    match uncertainty_from_log(&log) {
        Ok(points) => {
            let mut headers = vec!["t".to_string(), "trace".into(), "theta_delta".into()];
            headers.extend(FEATURE_NAMES.iter().map(|n| format!("diag_{n}")));
            let rows: Vec<Vec<String>> = points
                .iter()
                .map(|p| {
                    let mut row = vec![p.t.to_string(), fmt(p.trace), fmt(p.theta_delta)];
                    row.extend(p.diag.iter().map(|v| fmt(*v)));
                    row
                })
                .collect();
            out.csv_table("uncertainty.csv", &headers, &rows)?;
            let shrink = shrinkage_report(&points)?;
            let rows: Vec<ShrinkRow> = shrink
                .iter()
                .map(|s| ShrinkRow {
                    dim: s.dim,
                    name: s.name.clone(),
                    early: fmt(s.early),
                    late: fmt(s.late),
                    rel_drop: fmt(s.rel_drop),
                })
                .collect();
            out.csv("shrinkage.csv", &rows)?;
            summary.insert("shrinkage".into(), json!(shrink));
        }
        Err(e) => tracing::warn!(%e, "uncertainty skipped"),
    }

    anyhow::ensure!(
        !summary.is_empty(),
        "{}: no diagnostic could be computed from this log",
        path.display()
    );
    out.json("diagnose.json", &summary)?;
    Ok(())
}

//! `route`: run tasks end to end through the two-stage router against
//! simulated agents.

use std::collections::BTreeMap;

use anyhow::{Context, Result};
use serde::Serialize;

use beacon_core::bandit::{Policy, CONTEXT_DIM};
use beacon_core::events::{EventLog, Phase};
use beacon_core::orchestrator::{PipelineConfig, Router, SimAgent, SimulatedExecutor, SyntheticDecomposer};
use beacon_core::types::Subtask;
use beacon_core::workload::{build_phases, synthetic_prompt_stream};

use super::{load_pool, load_profiles, read_jsonl};
use crate::config::{policy_kind, ExperimentConfig};
use crate::output::Outputs;

#[derive(Serialize)]
struct OutcomeRow {
    task_id: String,
    phase: String,
    winner: String,
    correct: Option<bool>,
    n_updates: usize,
    wall_steps: u64,
}

/// Tasks tagged with their phase. Fewer tasks than phases run untagged.
fn phased(tasks: Vec<Subtask>, ratios: [u32; 3], seed: u64) -> Result<Vec<(Option<Phase>, Subtask)>> {
    let phases = ratios.iter().filter(|r| **r > 0).count();
    if tasks.len() < phases {
        return Ok(tasks.into_iter().map(|t| (None, t)).collect());
    }
    let split = build_phases(&tasks, ratios, seed).context("splitting tasks into phases")?;
    let tag = |p: Phase, ts: Vec<Subtask>| ts.into_iter().map(move |t| (Some(p), t));
    Ok(tag(Phase::ColdStart, split.cold)
        .chain(tag(Phase::Train, split.train))
        .chain(tag(Phase::Test, split.test))
        .collect())
}

pub fn run(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let rc = &cfg.route;
    let pool = load_pool(rc.pool.as_deref())?;
    let profiles = load_profiles(rc.profiles.as_deref())?;
    let agents: BTreeMap<_, _> = pool
        .ids()
        .into_iter()
        .map(|id| {
            let mut a = SimAgent {
                default_accuracy: rc.accuracy,
                ..SimAgent::default()
            };
            if let Some(p) = profiles.get(&id) {
                a.failure_rate = p.model.error_total();
                a.latency_ms = p.model.latency.p50;
            }
            (id, a)
        })
        .collect();
    let mut executor = SimulatedExecutor::new(agents);

    let tasks: Vec<Subtask> = match &rc.tasks {
        Some(p) => read_jsonl(p)?,
        // Synthetic tasks get a gold answer so outcomes carry correctness.
        None => synthetic_prompt_stream(rc.n_tasks, cfg.seed)
            .into_iter()
            .map(|p| Subtask {
                gold: Some(format!("answer {}", p.task.task_id)),
                ..p.task
            })
            .collect(),
    };
    anyhow::ensure!(!tasks.is_empty(), "no tasks to route");
    let tasks = phased(tasks, rc.ratios, cfg.seed)?;

    let kind = policy_kind(&cfg.policy.kind, &cfg.policy, None)?;
    let policy = Policy::new(kind, CONTEXT_DIM, cfg.policy.lambda, cfg.policy.beta)?;
    let pipeline = PipelineConfig {
        plan_k: rc.plan_k,
        cot_p: rc.cot_p,
        top_l: cfg.stage1.top_l.unwrap_or(PipelineConfig::default().top_l),
        weights: cfg.stage1.weights,
        reward: rc.reward,
        credit: rc.credit,
        features: cfg.policy.features,
        ..PipelineConfig::default()
    };
    let mut router = Router::new(pool, policy, pipeline, cfg.seed)?;
    let planner = SyntheticDecomposer {
        parse_fail_rate: rc.plan_parse_fail,
        ..SyntheticDecomposer::default()
    };

    let mut log = EventLog::new();
    let mut rows = Vec::with_capacity(tasks.len());
    for (phase, task) in &tasks {
        let o = router
            .run_task(task, &planner, &mut executor, *phase, &mut log)
            .with_context(|| format!("routing task {}", task.task_id))?;
        tracing::debug!(task = %o.task_id, winner = %o.winner, "routed");
        rows.push(OutcomeRow {
            task_id: o.task_id,
            phase: phase.map_or("", |p| p.as_str()).to_string(),
            winner: o.winner,
            correct: o.correct,
            n_updates: o.n_updates,
            wall_steps: o.wall_steps,
        });
    }
    out.jsonl("trace.jsonl", log.events())?;
    out.csv("outcomes.csv", &rows)?;
    let correct = rows.iter().filter(|r| r.correct == Some(true)).count();
    tracing::info!(tasks = rows.len(), correct, "route finished");
    Ok(())
}

//! Semi-real replay: route a prompt stream over profiled agents, sample
//! outcomes from the profiles, and learn from service-level success.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::outcome::{sample_outcome, service_ok, ShockEffect};
use super::profile::EmpiricalProfile;
use super::SimError;
use crate::bandit::{Arm, Beta, ContextVector, FeatureConfig, Policy, PolicyKind, RidgeState, CONTEXT_DIM};
use crate::events::{
    Event, EventLog, ExecutionEvent, Level, RewardEvent, ScoredCandidate, SelectionEvent, ShockEvent, UpdateEvent,
};
use crate::matching::{top_l_filter, Constraints, Stage1Weights};
use crate::pool::AgentPool;
use crate::types::{normalize_latency, AgentId, AgentState, Subtask};
use crate::workload::Bin;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShockSpec {
    pub t0: u64,
    /// Agents to degrade; empty means the agent the router currently favors:
    /// the one it would pick most often over the next `lookback` prompts from
    /// its state at `t0` (ties to the smallest id).
    #[serde(default)]
    pub targets: Vec<AgentId>,
    pub effect: ShockEffect,
    #[serde(default = "default_lookback")]
    pub lookback: usize,
}

fn default_lookback() -> usize {
    ShockSpec::DEFAULT_LOOKBACK
}

impl ShockSpec {
    pub const DEFAULT_EFFECT: ShockEffect = ShockEffect {
        error_rate_boost: 0.8,
        latency_multiplier: 3.0,
    };
    pub const DEFAULT_LOOKBACK: usize = 50;

    pub fn at(t0: u64) -> Self {
        Self {
            t0,
            targets: Vec::new(),
            effect: Self::DEFAULT_EFFECT,
            lookback: Self::DEFAULT_LOOKBACK,
        }
    }
}

/// One prompt of the replayed stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptItem {
    pub task: Subtask,
    #[serde(default)]
    pub bin: Option<Bin>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayConfig {
    pub steps: u64,
    /// Shortlist size; `None` keeps every available agent.
    pub top_l: Option<usize>,
    pub weights: Stage1Weights,
    pub sla_ms: Option<f64>,
    pub latency_cap_ms: f64,
    pub lambda: f64,
    pub beta: Beta,
    pub features: FeatureConfig,
    pub shock: Option<ShockSpec>,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        Self {
            steps: 1000,
            top_l: None,
            weights: Stage1Weights::default(),
            sla_ms: None,
            latency_cap_ms: 10_000.0,
            lambda: 1.0,
            beta: Beta::default(),
            features: FeatureConfig::default(),
            shock: Some(ShockSpec::at(300)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayTrace {
    pub policy: String,
    pub seed: u64,
    pub log: EventLog,
    pub service_ok: Vec<bool>,
    pub chosen: Vec<AgentId>,
    pub shock_at: Option<u64>,
    pub shock_targets: Vec<AgentId>,
    pub final_ridge: RidgeState,
}

/// Static runtime signals derived from a profile: no load, median latency,
/// and reliability equal to the profiled success rate.
pub fn profile_state(profile: &EmpiricalProfile, latency_cap_ms: f64, available: bool) -> AgentState {
    AgentState {
        load: 0.0,
        latency_norm: normalize_latency(profile.model.latency.p50, latency_cap_ms),
        reputation: (1.0 - profile.model.error_total()).clamp(0.0, 1.0),
        available,
    }
}

fn build_arms(
    pool: &AgentPool,
    task: &Subtask,
    cfg: &ReplayConfig,
    l: usize,
    constraints: &Constraints,
) -> Result<Vec<Arm>, SimError> {
    let cands = top_l_filter(pool, task, &cfg.weights, l, constraints, None)?;
    Ok(cands
        .entries()
        .iter()
        .map(|c| Arm {
            id: c.id.clone(),
            x: ContextVector::from_features(
                c.match_score,
                pool.state(&c.id).expect("candidate from pool"),
                &cfg.features,
            ),
            stage1: c.stage1_score,
        })
        .collect())
}

fn most_selected(chosen: &[AgentId], pool: &AgentPool) -> AgentId {
    let mut counts: BTreeMap<&AgentId, usize> = BTreeMap::new();
    for c in chosen {
        *counts.entry(c).or_insert(0) += 1;
    }
    counts
        .into_iter()
        .max_by(|(a, ca), (b, cb)| ca.cmp(cb).then(b.cmp(a)))
        .map(|(id, _)| id.clone())
        .unwrap_or_else(|| pool.ids()[0].clone())
}

pub fn run_replay(
    stream: &[PromptItem],
    pool: &AgentPool,
    profiles: &BTreeMap<AgentId, EmpiricalProfile>,
    kind: PolicyKind,
    cfg: &ReplayConfig,
    seed: u64,
) -> Result<ReplayTrace, SimError> {
    if stream.is_empty() {
        return Err(SimError::EmptyStream);
    }
    let mut local = pool.clone();
    for id in pool.ids() {
        let profile = profiles
            .get(&id)
            .ok_or_else(|| SimError::MissingProfile(id.to_string()))?;
        profile.validate()?;
        let available = pool.state(&id).is_some_and(|s| s.available);
        local.set_state(&id, profile_state(profile, cfg.latency_cap_ms, available))?;
    }
    let mut policy = Policy::new(kind, CONTEXT_DIM, cfg.lambda, cfg.beta)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut log = EventLog::new();
    let mut oks = Vec::with_capacity(cfg.steps as usize);
    let mut chosen: Vec<AgentId> = Vec::with_capacity(cfg.steps as usize);
    let mut targets: Vec<AgentId> = Vec::new();
    let l = cfg.top_l.unwrap_or(local.len());
    let constraints = Constraints {
        latency_cap_ms: cfg.latency_cap_ms,
        ..Constraints::default()
    };

    for t in 0..cfg.steps {
        if let Some(shock) = cfg.shock.as_ref().filter(|s| s.t0 == t) {
            targets = if shock.targets.is_empty() {
                // Dry run on copies: what the router would pick next, without
                // touching the real policy or random stream.
                let mut probe = policy.clone();
                let mut probe_rng = rng.clone();
                let mut picks = Vec::with_capacity(shock.lookback);
                for k in 0..shock.lookback.max(1) as u64 {
                    let item = &stream[((t + k) % stream.len() as u64) as usize];
                    let arms = build_arms(&local, &item.task, cfg, l, &constraints)?;
                    picks.push(probe.select(&arms, 0, &mut probe_rng)?.id);
                }
                vec![most_selected(&picks, &local)]
            } else {
                shock.targets.clone()
            };
            log.push(Event::Shock(ShockEvent {
                step: t,
                seed,
                targets: targets.clone(),
                error_rate_boost: shock.effect.error_rate_boost,
                latency_multiplier: shock.effect.latency_multiplier,
            }));
        }
        let item = &stream[(t % stream.len() as u64) as usize];
        let arms = build_arms(&local, &item.task, cfg, l, &constraints)?;
        let sel = policy.select(&arms, 0, &mut rng)?;
        let profile = &profiles[&sel.id];
        let shocked = cfg.shock.as_ref().filter(|s| t >= s.t0 && targets.contains(&sel.id));
        let call = sample_outcome(profile, item.bin, shocked.map(|s| &s.effect), &mut rng);
        let ok = service_ok(&call, cfg.sla_ms);
        let r = if ok { 1.0 } else { 0.0 };
        log.push(Event::Selection(SelectionEvent {
            step: t,
            seed,
            task_id: item.task.task_id.clone(),
            level: Level::Subtask,
            phase: None,
            policy: policy.name().into(),
            candidates: arms
                .iter()
                .enumerate()
                .map(|(i, a)| ScoredCandidate {
                    agent: a.id.clone(),
                    stage1: a.stage1,
                    ucb: sel.scores.as_ref().map(|s| s[i]),
                })
                .collect(),
            chosen: sel.id.clone(),
        }));
        log.push(Event::Execution(ExecutionEvent {
            step: t,
            seed,
            task_id: item.task.task_id.clone(),
            agent: sel.id.clone(),
            run_id: 0,
            latency_norm: normalize_latency(call.latency_ms, cfg.latency_cap_ms),
            valid: call.contract_valid,
            answer: String::new(),
            service_ok: Some(ok),
            error: call.error.map(|e| e.as_str().to_string()),
            correct: None,
        }));
        log.push(Event::Reward(RewardEvent {
            step: t,
            seed,
            task_id: item.task.task_id.clone(),
            run_id: 0,
            agent: sel.id.clone(),
            reward: r,
        }));
        if let Some(info) = policy.update(&arms[sel.index].x, r)? {
            log.push(Event::Update(UpdateEvent {
                step: t,
                seed,
                agent: sel.id.clone(),
                reward: r,
                t: info.t,
                theta_delta: info.theta_delta,
                a_inv_diag: policy.ridge().a_inv().diag(),
                theta: policy.ridge().theta().to_vec(),
            }));
        }
        oks.push(ok);
        chosen.push(sel.id);
    }
    Ok(ReplayTrace {
        policy: policy.name().into(),
        seed,
        log,
        service_ok: oks,
        chosen,
        shock_at: cfg.shock.as_ref().map(|s| s.t0),
        shock_targets: targets,
        final_ridge: policy.ridge().clone(),
    })
}

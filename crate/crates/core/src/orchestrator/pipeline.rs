//! Task execution: Plan-K fan-out, CoT-P runs per subtask, voting, shaped
//! rewards and delayed credit.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    extract_and_normalize, is_correct, majority_vote, plan_weight, shaped_reward, weighted_vote, Executor,
    OrchestratorError, PlanProvider, RewardParams, VoteMethod,
};
use crate::bandit::{Arm, FeatureConfig, Policy};
use crate::events::{
    Event, EventLog, ExecutionEvent, Level, Phase, RewardEvent, ScoredCandidate, SelectionEvent, UpdateEvent, VoteEvent,
};
use crate::matching::{top_l_filter, Constraints, Embedder, Stage1Weights};
use crate::pool::AgentPool;
use crate::types::{normalize_latency, AgentId, RunResult, StepRecord, Subtask};

/// When bandit updates are applied relative to the vote.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CreditMode {
    /// Every record is credited with its shaped reward once the task vote
    /// resolves.
    #[default]
    PostVote,
    /// Every record is credited with its validity indicator right after
    /// execution and the post-vote pass is skipped.
    PreVoteValidity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub plan_k: u32,
    pub cot_p: u32,
    pub top_l: usize,
    pub weights: Stage1Weights,
    pub constraints: Constraints,
    pub reward: RewardParams,
    pub credit: CreditMode,
    pub features: FeatureConfig,
    pub latency_cap_ms: f64,
    /// Smoothing factor for the per-agent latency moving average.
    pub latency_ema: f64,
    /// Maximum length in characters of the running memory handed to later
    /// steps of a plan.
    pub memory_cap: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            plan_k: 3,
            cot_p: 3,
            top_l: 3,
            weights: Stage1Weights::default(),
            constraints: Constraints::default(),
            reward: RewardParams::default(),
            credit: CreditMode::PostVote,
            features: FeatureConfig::default(),
            latency_cap_ms: 10_000.0,
            latency_ema: 0.2,
            memory_cap: 2_000,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), OrchestratorError> {
        if self.plan_k == 0 || self.cot_p == 0 {
            return Err(OrchestratorError::InvalidConfig("plan_k and cot_p must be >= 1".into()));
        }
        if self.top_l == 0 {
            return Err(OrchestratorError::InvalidConfig("top_l must be >= 1".into()));
        }
        if self.latency_cap_ms.is_nan() || self.latency_cap_ms <= 0.0 || !(0.0..=1.0).contains(&self.latency_ema) {
            return Err(OrchestratorError::InvalidConfig(
                "latency_cap_ms must be positive and latency_ema in [0, 1]".into(),
            ));
        }
        self.weights.validate()?;
        self.reward.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskOutcome {
    pub task_id: String,
    pub winner: String,
    pub correct: Option<bool>,
    pub n_updates: usize,
    pub wall_steps: u64,
    #[serde(skip)]
    pub records: Vec<StepRecord>,
    #[serde(skip)]
    pub rewards: Vec<f64>,
}

/// Apply one bandit update per record, in timestamp order.
/// `rewards[i]` belongs to `records[i]`. Returns the number of update calls.
pub fn post_vote_credit(
    policy: &mut Policy,
    records: &[StepRecord],
    rewards: &[f64],
    seed: u64,
    log: &mut EventLog,
) -> Result<usize, OrchestratorError> {
    if records.len() != rewards.len() {
        return Err(OrchestratorError::MissingReward {
            records: records.len(),
            rewards: rewards.len(),
        });
    }
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by_key(|&i| records[i].timestamp);
    for i in order {
        credit_one(policy, &records[i], rewards[i], seed, log)?;
    }
    Ok(records.len())
}

fn credit_one(
    policy: &mut Policy,
    rec: &StepRecord,
    r: f64,
    seed: u64,
    log: &mut EventLog,
) -> Result<(), OrchestratorError> {
    if let Some(info) = policy.update(&rec.context, r)? {
        let ridge = policy.ridge();
        log.push(Event::Update(UpdateEvent {
            step: rec.timestamp,
            seed,
            agent: rec.agent.clone(),
            reward: r,
            t: info.t,
            theta_delta: info.theta_delta,
            a_inv_diag: ridge.a_inv().diag(),
            theta: ridge.theta().to_vec(),
        }));
    }
    Ok(())
}

/// Runs within one subtask step, with their records.
struct StepRuns {
    runs: Vec<RunResult>,
    records: Vec<StepRecord>,
}

/// Stateful router: agent pool, selection policy and a logical clock.
pub struct Router {
    pool: AgentPool,
    policy: Policy,
    embedder: Option<Box<dyn Embedder>>,
    cfg: PipelineConfig,
    seed: u64,
    rng: ChaCha8Rng,
    clock: u64,
}

impl Router {
    pub fn new(pool: AgentPool, policy: Policy, cfg: PipelineConfig, seed: u64) -> Result<Self, OrchestratorError> {
        cfg.validate()?;
        Ok(Self {
            pool,
            policy,
            embedder: None,
            cfg,
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            clock: 0,
        })
    }

    pub fn with_embedder(mut self, embedder: Box<dyn Embedder>) -> Self {
        self.embedder = Some(embedder);
        self
    }

    pub fn pool(&self) -> &AgentPool {
        &self.pool
    }

    pub fn pool_mut(&mut self) -> &mut AgentPool {
        &mut self.pool
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    /// Execute one task end to end and credit the policy.
    pub fn run_task(
        &mut self,
        task: &Subtask,
        planner: &dyn PlanProvider,
        executor: &mut dyn Executor,
        phase: Option<Phase>,
        log: &mut EventLog,
    ) -> Result<TaskOutcome, OrchestratorError> {
        let start_clock = self.clock;
        let mut parse_fail = 0u32;
        let mut plans: Vec<(u32, Option<AgentId>, Vec<Subtask>)> = Vec::new();
        if self.cfg.plan_k > 1 {
            let planners = top_l_filter(
                &self.pool,
                task,
                &self.cfg.weights,
                self.cfg.plan_k as usize,
                &self.cfg.constraints,
                self.embedder.as_deref(),
            )?
            .ids();
            for k in 0..self.cfg.plan_k {
                let who = &planners[k as usize % planners.len()];
                match planner.plan(task, who, k, &mut self.rng) {
                    Ok(chain) if !chain.is_empty() => plans.push((k, Some(who.clone()), chain)),
                    Ok(_) => parse_fail += 1,
                    Err(e) => {
                        tracing::debug!(%e, "plan dropped");
                        parse_fail += 1;
                    }
                }
            }
        }
        let weighted = !plans.is_empty();
        if !weighted {
            plans.push((0, None, vec![task.clone()]));
        }

        let mut all_records = Vec::new();
        let mut all_runs = Vec::new();
        // Reference answer for the winner bonus of each record, filled after the
        // task vote for final steps.
        let mut step_refs: Vec<Option<String>> = Vec::new();
        let mut plan_answers = Vec::with_capacity(plans.len());
        for (k, _, chain) in &plans {
            let mut memory = String::new();
            let mut scores = Vec::with_capacity(chain.len());
            let mut last_winner = String::new();
            for (m, sub) in chain.iter().enumerate() {
                let step = self.route_step(sub, &memory, *k, m as u32, executor, phase, log)?;
                let vote = majority_vote(&step.runs)?;
                scores.push(step.records.iter().map(|r| r.match_score).sum::<f64>() / step.records.len() as f64);
                let is_last = m + 1 == chain.len();
                for _ in &step.records {
                    step_refs.push(if is_last { None } else { Some(vote.winner.clone()) });
                }
                if !memory.is_empty() {
                    memory.push_str(" | ");
                }
                memory.push_str(&vote.winner);
                if memory.len() > self.cfg.memory_cap {
                    let cut = memory.len() - self.cfg.memory_cap;
                    let cut = (cut..memory.len())
                        .find(|&i| memory.is_char_boundary(i))
                        .unwrap_or(memory.len());
                    memory.drain(..cut);
                }
                last_winner = vote.winner;
                all_records.extend(step.records);
                all_runs.extend(step.runs);
            }
            plan_answers.push((last_winner, plan_weight(&scores)?));
        }

        let (outcome, method) = if weighted {
            let v = match weighted_vote(&plan_answers) {
                Err(OrchestratorError::InvalidWeights) => {
                    let uniform: Vec<(String, f64)> = plan_answers.iter().map(|(a, _)| (a.clone(), 1.0)).collect();
                    weighted_vote(&uniform)?
                }
                other => other?,
            };
            (v, VoteMethod::Weighted)
        } else {
            (majority_vote(&all_runs)?, VoteMethod::Majority)
        };
        let y_star = outcome.winner.clone();
        let final_idx = plan_answers
            .iter()
            .enumerate()
            .filter(|(_, (a, _))| *a == y_star)
            .max_by(|(i, (_, wa)), (j, (_, wb))| wa.total_cmp(wb).then(j.cmp(i)))
            .map(|(i, _)| i);
        let (final_plan, final_planner) = match final_idx {
            Some(i) if weighted => (Some(plans[i].0), plans[i].1.clone()),
            _ => (None, None),
        };
        let correct = task.gold.as_deref().map(|g| is_correct(&y_star, g));
        log.push(Event::Vote(VoteEvent {
            step: self.clock,
            seed: self.seed,
            task_id: task.task_id.clone(),
            method: method.as_str().into(),
            winner: y_star.clone(),
            tally: outcome.tally.clone(),
            phase,
            final_plan,
            final_planner,
            plan_count: if self.cfg.plan_k > 1 { self.cfg.plan_k } else { 0 },
            plan_parse_fail: parse_fail,
            correct,
        }));

        let rewards: Vec<f64> = all_records
            .iter()
            .zip(&all_runs)
            .zip(&step_refs)
            .map(|((rec, run), reference)| {
                let target = reference.as_deref().unwrap_or(&y_star);
                let r = shaped_reward(run, target, task.gold.as_deref(), &self.cfg.reward);
                log.push(Event::Reward(RewardEvent {
                    step: rec.timestamp,
                    seed: self.seed,
                    task_id: rec.task_id.clone(),
                    run_id: rec.run_id,
                    agent: rec.agent.clone(),
                    reward: r,
                }));
                r
            })
            .collect();
        let n_updates = match self.cfg.credit {
            CreditMode::PostVote => post_vote_credit(&mut self.policy, &all_records, &rewards, self.seed, log)?,
            CreditMode::PreVoteValidity => all_records.len(),
        };
        Ok(TaskOutcome {
            task_id: task.task_id.clone(),
            winner: y_star,
            correct,
            n_updates,
            wall_steps: self.clock - start_clock,
            records: all_records,
            rewards,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn route_step(
        &mut self,
        sub: &Subtask,
        memory: &str,
        plan_index: u32,
        step_index: u32,
        executor: &mut dyn Executor,
        phase: Option<Phase>,
        log: &mut EventLog,
    ) -> Result<StepRuns, OrchestratorError> {
        let mut out = StepRuns {
            runs: Vec::with_capacity(self.cfg.cot_p as usize),
            records: Vec::with_capacity(self.cfg.cot_p as usize),
        };
        for run_id in 0..self.cfg.cot_p {
            let cands = top_l_filter(
                &self.pool,
                sub,
                &self.cfg.weights,
                self.cfg.top_l,
                &self.cfg.constraints,
                self.embedder.as_deref(),
            )?;
            let arms: Vec<Arm> = cands
                .entries()
                .iter()
                .map(|c| {
                    let state = self.pool.state(&c.id).expect("candidate comes from the pool");
                    Arm {
                        id: c.id.clone(),
                        x: crate::bandit::ContextVector::from_features(c.match_score, state, &self.cfg.features),
                        stage1: c.stage1_score,
                    }
                })
                .collect();
            let sel = self.policy.select(&arms, run_id, &mut self.rng)?;
            let ts = self.clock;
            self.clock += 1;
            log.push(Event::Selection(SelectionEvent {
                step: ts,
                seed: self.seed,
                task_id: sub.task_id.clone(),
                level: Level::Subtask,
                phase,
                policy: self.policy.name().into(),
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
            let profile = self.pool.get(&sel.id).expect("selected from pool").0.clone();
            let run = match executor.execute(&profile, sub, memory, run_id, &mut self.rng) {
                Ok(o) => RunResult {
                    run_id,
                    canonical_answer: extract_and_normalize(&o.raw_output),
                    raw_output: o.raw_output,
                    confidence: o.confidence.clamp(0.0, 1.0),
                    valid: true,
                    latency_norm: normalize_latency(o.latency_ms, self.cfg.latency_cap_ms),
                    agent: sel.id.clone(),
                },
                Err(e) => RunResult {
                    run_id,
                    raw_output: e.to_string(),
                    canonical_answer: String::new(),
                    confidence: 0.0,
                    valid: false,
                    latency_norm: normalize_latency(e.latency_ms, self.cfg.latency_cap_ms),
                    agent: sel.id.clone(),
                },
            };
            let correct = sub
                .gold
                .as_deref()
                .filter(|_| run.is_valid())
                .map(|g| is_correct(&run.canonical_answer, g));
            log.push(Event::Execution(ExecutionEvent {
                step: ts,
                seed: self.seed,
                task_id: sub.task_id.clone(),
                agent: sel.id.clone(),
                run_id,
                latency_norm: run.latency_norm,
                valid: run.is_valid(),
                answer: run.canonical_answer.clone(),
                service_ok: None,
                error: (!run.valid).then(|| run.raw_output.clone()),
                correct,
            }));
            self.pool
                .record_outcome(&sel.id, run.is_valid(), run.latency_norm, self.cfg.latency_ema)?;
            let record = StepRecord {
                task_id: sub.task_id.clone(),
                plan_index,
                step_index,
                run_id,
                agent: sel.id.clone(),
                context: arms[sel.index].x.clone(),
                match_score: cands.entries()[sel.index].match_score,
                latency_norm: run.latency_norm,
                timestamp: ts,
            };
            if self.cfg.credit == CreditMode::PreVoteValidity {
                let r = if run.is_valid() { 1.0 } else { 0.0 };
                credit_one(&mut self.policy, &record, r, self.seed, log)?;
            }
            out.runs.push(run);
            out.records.push(record);
        }
        Ok(out)
    }
}

/// Selection counts per agent over a log's subtask-level selections.
pub fn selection_counts(log: &EventLog) -> BTreeMap<AgentId, usize> {
    let mut m = BTreeMap::new();
    for s in log.selections().filter(|s| s.level == Level::Subtask) {
        *m.entry(s.chosen.clone()).or_insert(0) += 1;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandit::{Beta, PolicyKind, CONTEXT_DIM};
    use crate::orchestrator::{FixedDecomposer, SimAgent, SimulatedExecutor, SyntheticDecomposer};
    use crate::types::{AgentProfile, AgentState};

    fn pool() -> AgentPool {
        let profiles = vec![
            AgentProfile::new("A", "arithmetic math word problems"),
            AgentProfile::new("B", "code generation python"),
            AgentProfile::new("C", "medical question answering"),
        ];
        AgentPool::validate(profiles, vec![AgentState::default(); 3]).unwrap()
    }

    fn executor() -> SimulatedExecutor {
        let mut agents = BTreeMap::new();
        for (id, acc) in [("A", 0.9), ("B", 0.5), ("C", 0.3)] {
            agents.insert(
                AgentId::from(id),
                SimAgent {
                    default_accuracy: acc,
                    ..SimAgent::default()
                },
            );
        }
        SimulatedExecutor::new(agents)
    }

    fn router(plan_k: u32, cot_p: u32, credit: CreditMode) -> Router {
        let policy = Policy::new(PolicyKind::LinUcb, CONTEXT_DIM, 1.0, Beta::default()).unwrap();
        let cfg = PipelineConfig {
            plan_k,
            cot_p,
            credit,
            ..PipelineConfig::default()
        };
        Router::new(pool(), policy, cfg, 7).unwrap()
    }

    fn task() -> Subtask {
        let mut t = Subtask::new("gsm8k-1", "solve the arithmetic word problem");
        t.gold = Some("12".into());
        t
    }

    #[test]
    fn degenerate_pipeline_has_one_record() {
        let mut r = router(1, 1, CreditMode::PostVote);
        let mut log = EventLog::new();
        let out = r
            .run_task(
                &task(),
                &SyntheticDecomposer::default(),
                &mut executor(),
                None,
                &mut log,
            )
            .unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.n_updates, 1);
        let exec = log.executions().next().unwrap();
        assert_eq!(out.winner, exec.answer);
        assert_eq!(r.policy().ridge().t(), 1);
    }

    #[test]
    fn fan_out_counts_records() {
        let mut r = router(3, 3, CreditMode::PostVote);
        let mut log = EventLog::new();
        let out = r
            .run_task(&task(), &FixedDecomposer { steps: 2 }, &mut executor(), None, &mut log)
            .unwrap();
        assert_eq!(out.records.len(), 18);
        assert_eq!(r.policy().ridge().t(), 18);
        assert_eq!(log.updates().count(), 18);
        let vote = log.votes().next().unwrap();
        assert_eq!(vote.method, "weighted");
        assert!(vote.final_planner.is_some());
    }

    #[test]
    fn pre_vote_mode_updates_once_per_record() {
        let mut r = router(3, 2, CreditMode::PreVoteValidity);
        let mut log = EventLog::new();
        let out = r
            .run_task(&task(), &FixedDecomposer { steps: 2 }, &mut executor(), None, &mut log)
            .unwrap();
        assert_eq!(out.records.len(), 12);
        assert_eq!(r.policy().ridge().t(), 12);
    }

    #[test]
    fn credit_requires_all_rewards() {
        let mut p = Policy::new(PolicyKind::LinUcb, CONTEXT_DIM, 1.0, Beta::default()).unwrap();
        let mut log = EventLog::new();
        assert_eq!(post_vote_credit(&mut p, &[], &[], 0, &mut log).unwrap(), 0);
        let mut r = router(1, 2, CreditMode::PostVote);
        let out = r
            .run_task(
                &task(),
                &SyntheticDecomposer::default(),
                &mut executor(),
                None,
                &mut EventLog::new(),
            )
            .unwrap();
        assert!(matches!(
            post_vote_credit(&mut p, &out.records, &out.rewards[..1], 0, &mut log),
            Err(OrchestratorError::MissingReward { .. })
        ));
    }

    #[test]
    fn same_seed_same_log() {
        let go = || {
            let mut r = router(3, 3, CreditMode::PostVote);
            let mut log = EventLog::new();
            let mut ex = executor();
            for i in 0..5 {
                let mut t = task();
                t.task_id = format!("gsm8k-{i}");
                r.run_task(
                    &t,
                    &SyntheticDecomposer::default(),
                    &mut ex,
                    Some(Phase::Train),
                    &mut log,
                )
                .unwrap();
            }
            (log.to_jsonl(), r.policy().ridge().to_text())
        };
        assert_eq!(go(), go());
    }
}

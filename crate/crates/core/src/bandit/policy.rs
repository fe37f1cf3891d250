//! Selection policies: LinUCB, its non-stationary variants, and baselines.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{BanditError, Beta, ContextVector, RidgeState, UpdateInfo};
use crate::types::AgentId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum PolicyKind {
    #[serde(rename = "linucb")]
    LinUcb,
    /// Selections continue, but every update from step `freeze_at` on is
    /// dropped, which also pins a scheduled β.
    #[serde(rename = "linucb-frozen")]
    LinUcbFrozen {
        freeze_at: u64,
    },
    /// Ridge state is reinitialized at the start of each listed step.
    #[serde(rename = "reset-linucb")]
    ResetLinUcb {
        change_points: Vec<u64>,
    },
    /// Estimator built from the most recent `window` samples only.
    #[serde(rename = "sw-linucb")]
    SlidingWindow {
        window: usize,
    },
    Random,
    /// Rank-1 of the screening scores.
    StaticRule,
    RoundRobin,
    /// Run `i` goes to the `i`-th candidate in id order, so the runs of a
    /// subtask spread across agents and the vote does the choosing.
    MajorityVote,
}

impl PolicyKind {
    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::LinUcb => "linucb",
            PolicyKind::LinUcbFrozen { .. } => "linucb-frozen",
            PolicyKind::ResetLinUcb { .. } => "reset-linucb",
            PolicyKind::SlidingWindow { .. } => "sw-linucb",
            PolicyKind::Random => "random",
            PolicyKind::StaticRule => "static-rule",
            PolicyKind::RoundRobin => "round-robin",
            PolicyKind::MajorityVote => "majority-vote",
        }
    }

    pub fn is_learning(&self) -> bool {
        matches!(
            self,
            PolicyKind::LinUcb
                | PolicyKind::LinUcbFrozen { .. }
                | PolicyKind::ResetLinUcb { .. }
                | PolicyKind::SlidingWindow { .. }
        )
    }
}

/// One candidate as seen by the selector.
#[derive(Debug, Clone, PartialEq)]
pub struct Arm {
    pub id: AgentId,
    pub x: ContextVector,
    pub stage1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Index into the arms passed to `select`.
    pub index: usize,
    pub id: AgentId,
    /// UCB score per arm (same order as the input) for learning policies.
    pub scores: Option<Vec<f64>>,
    pub beta: Option<f64>,
    /// Zero-based selection step this choice was made at.
    pub step: u64,
}

/// Index of the maximal score; exact ties go to the smallest id.
pub fn argmax_by_id(ids: &[&AgentId], scores: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..scores.len() {
        if scores[i] > scores[best] || (scores[i] == scores[best] && ids[i] < ids[best]) {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct Policy {
    kind: PolicyKind,
    ridge: RidgeState,
    beta: Beta,
    /// Number of selections made so far.
    steps: u64,
    window: VecDeque<(Vec<f64>, f64)>,
}

impl Policy {
    pub fn new(kind: PolicyKind, d: usize, lambda: f64, beta: Beta) -> Result<Self, BanditError> {
        beta.validate()?;
        if let PolicyKind::SlidingWindow { window } = kind {
            if window < d {
                return Err(BanditError::WindowTooSmall { window, d });
            }
        }
        Ok(Self {
            kind,
            ridge: RidgeState::new(d, lambda)?,
            beta,
            steps: 0,
            window: VecDeque::new(),
        })
    }

    pub fn kind(&self) -> &PolicyKind {
        &self.kind
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn ridge(&self) -> &RidgeState {
        &self.ridge
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// β that the next selection will use.
    pub fn beta_now(&self) -> f64 {
        self.beta.at(self.ridge.t(), self.ridge.lambda(), self.ridge.dim())
    }

    /// Whether updates are currently being dropped.
    pub fn is_frozen(&self) -> bool {
        match self.kind {
            PolicyKind::LinUcbFrozen { freeze_at } => self.steps > freeze_at,
            _ => false,
        }
    }

    pub fn select<R: Rng + ?Sized>(
        &mut self,
        arms: &[Arm],
        run_id: u32,
        rng: &mut R,
    ) -> Result<Selection, BanditError> {
        if arms.is_empty() {
            return Err(BanditError::EmptyCandidates);
        }
        let step = self.steps;
        if let PolicyKind::ResetLinUcb { change_points } = &self.kind {
            if step > 0 && change_points.contains(&step) {
                self.ridge.reset();
            }
        }
        let ids: Vec<&AgentId> = arms.iter().map(|a| &a.id).collect();
        let mut by_id: Vec<usize> = (0..arms.len()).collect();
        by_id.sort_by(|&a, &b| arms[a].id.cmp(&arms[b].id));

        let (index, scores, beta) = match &self.kind {
            k if k.is_learning() => {
                let beta = self.beta_now();
                let scores = arms
                    .iter()
                    .map(|a| self.ridge.ucb(a.x.as_slice(), beta))
                    .collect::<Result<Vec<_>, _>>()?;
                (argmax_by_id(&ids, &scores), Some(scores), Some(beta))
            }
            PolicyKind::Random => (by_id[rng.random_range(0..arms.len())], None, None),
            PolicyKind::StaticRule => {
                let s1: Vec<f64> = arms.iter().map(|a| a.stage1).collect();
                (argmax_by_id(&ids, &s1), None, None)
            }
            PolicyKind::RoundRobin => (by_id[(step % arms.len() as u64) as usize], None, None),
            PolicyKind::MajorityVote => (by_id[run_id as usize % arms.len()], None, None),
            _ => unreachable!("learning kinds handled above"),
        };
        self.steps += 1;
        Ok(Selection {
            index,
            id: arms[index].id.clone(),
            scores,
            beta,
            step,
        })
    }

    /// Apply one reward. Returns `None` when the policy does not learn or the
    /// update was suppressed.
    pub fn update(&mut self, x: &ContextVector, r: f64) -> Result<Option<UpdateInfo>, BanditError> {
        if !r.is_finite() {
            return Err(BanditError::NonFiniteReward(r));
        }
        if !self.kind.is_learning() || self.is_frozen() {
            return Ok(None);
        }
        if let PolicyKind::SlidingWindow { window } = self.kind {
            self.window.push_back((x.as_slice().to_vec(), r));
            if self.window.len() > window {
                self.window.pop_front();
                let info = self
                    .ridge
                    .rebuild(self.window.iter().map(|(x, r)| (x.as_slice(), *r)))?;
                return Ok(Some(info));
            }
        }
        self.ridge.update(x.as_slice(), r).map(Some)
    }
}

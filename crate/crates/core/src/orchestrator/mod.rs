//! Task execution pipeline: decomposition plans, repeated runs per subtask,
//! answer extraction, majority and plan-weighted voting, shaped rewards, and
//! delayed credit assignment to the selector.

mod executor;
mod extract;
mod pipeline;
mod plan;
mod reward;
mod vote;

use thiserror::Error;

pub use executor::{ExecError, ExecOutput, Executor, SimAgent, SimulatedExecutor};
pub use extract::{extract_and_normalize, normalize_answer};
pub use pipeline::{post_vote_credit, selection_counts, CreditMode, PipelineConfig, Router, TaskOutcome};
pub use plan::{plan_weight, FixedDecomposer, Plan, PlanParseError, PlanProvider, SyntheticDecomposer};
pub use reward::{is_correct, shaped_reward, RewardParams};
pub use vote::{majority_vote, weighted_vote, VoteMethod, VoteOutcome};

use crate::bandit::BanditError;
use crate::matching::MatchError;
use crate::pool::PoolError;

#[derive(Debug, Error, PartialEq)]
pub enum OrchestratorError {
    #[error("nothing to vote on")]
    NoRuns,
    #[error("plan has an empty subtask chain")]
    EmptyChain,
    #[error("vote weights must be finite, non-negative and not all zero")]
    InvalidWeights,
    #[error("reward parameters must be finite and non-negative")]
    InvalidRewardParams,
    #[error("invalid pipeline config: {0}")]
    InvalidConfig(String),
    #[error("{records} step records but {rewards} rewards")]
    MissingReward { records: usize, rewards: usize },
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Bandit(#[from] BanditError),
    #[error(transparent)]
    Pool(#[from] PoolError),
}

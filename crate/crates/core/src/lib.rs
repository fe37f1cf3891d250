//! Two-stage agent routing: Top-L capability screening followed by a LinUCB
//! selector trained with delayed, post-vote shaped rewards.
//!
//! Also ships a profile-driven replay simulator with shock injection, a
//! difficulty taxonomy with phase splits, and post-hoc diagnostics.

pub mod bandit;
pub mod diagnostics;
pub mod events;
pub mod linalg;
pub mod matching;
pub mod orchestrator;
pub mod pool;
pub mod simenv;
pub mod types;
pub mod workload;

use thiserror::Error;

/// Any error the library can return.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Bandit(#[from] bandit::BanditError),
    #[error(transparent)]
    Match(#[from] matching::MatchError),
    #[error(transparent)]
    Pool(#[from] pool::PoolError),
    #[error(transparent)]
    Orchestrator(#[from] orchestrator::OrchestratorError),
    #[error(transparent)]
    Sim(#[from] simenv::SimError),
    #[error(transparent)]
    Workload(#[from] workload::WorkloadError),
    #[error(transparent)]
    Diagnostics(#[from] diagnostics::DiagnosticsError),
    #[error(transparent)]
    Log(#[from] events::LogError),
}

//! Semi-real simulation: empirical agent profiles, profile-driven replay with
//! shock injection, recovery metrics, and synthetic linear environments for
//! checking the selector's guarantees.

mod outcome;
mod profile;
mod recovery;
mod replay;
mod synth;
pub mod theory;

use thiserror::Error;

pub use outcome::{
    effective_error_rates, lognormal_params, sample_outcome, service_ok, success_probability, ShockEffect,
    SimulatedCall, Z95,
};
pub use profile::{
    nearest_rank, profile_from_logs, profiles_from_logs, read_call_logs, read_profiles, shipped_pool, shipped_profiles,
    write_profiles, CallLog, EmpiricalProfile, ErrorKind, LatencyQuantiles, OutcomeModel,
};
pub use recovery::{
    recovery_from_log, recovery_metrics, rolling_rate, RecoveryMetrics, RecoveryTime, DEFAULT_THRESHOLD, DEFAULT_WINDOW,
};
pub use replay::{profile_state, run_replay, PromptItem, ReplayConfig, ReplayTrace, ShockSpec};
pub use synth::{random_direction, SyntheticLinearEnv, ThetaPath};

use crate::bandit::BanditError;
use crate::matching::MatchError;
use crate::pool::PoolError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid profile for {agent}: {msg}")]
    InvalidProfile { agent: String, msg: String },
    #[error("no call logs for {0}")]
    EmptyLogs(String),
    #[error("no profile for agent {0}")]
    MissingProfile(String),
    #[error("prompt stream is empty")]
    EmptyStream,
    #[error("trace of {len} steps is shorter than window {window}")]
    TraceTooShort { len: usize, window: usize },
    #[error("shock at {t0} is outside the measurable range of a {len}-step trace")]
    ShockOutOfRange { t0: u64, len: usize },
    #[error("log has no shock event")]
    NoShock,
    #[error("utilities need a unique maximum")]
    TiedMaximum,
    #[error("utilities must be non-empty and finite, sigma positive")]
    InvalidUtilities,
    #[error("io: {0}")]
    Io(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Bandit(#[from] BanditError),
    #[error(transparent)]
    Match(#[from] MatchError),
    #[error(transparent)]
    Pool(#[from] PoolError),
}

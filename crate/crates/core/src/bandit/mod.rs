//! Stage 2 of the routing protocol: a shared-parameter LinUCB selector over
//! the Top-L shortlist, its non-stationary variants, and baseline policies.
//!
//! All agents share one parameter vector θ. An agent's score at step `t` is
//! `xᵀθ̂ + β·sqrt(xᵀA⁻¹x)` where `x` is that agent's context.

mod beta;
mod context;
mod policy;
mod ridge;
mod shared;

use thiserror::Error;

pub use beta::{beta_schedule, Beta};
pub use context::{ContextVector, FeatureConfig, FeatureScale, CONTEXT_DIM};
pub use policy::{argmax_by_id, Arm, Policy, PolicyKind, Selection};
pub use ridge::{RidgeState, UpdateInfo, INVERSE_TOLERANCE};
pub use shared::SharedRidge;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BanditError {
    #[error("ridge parameter must be positive and finite, got {0}")]
    NonPositiveLambda(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("reward must be finite, got {0}")]
    NonFiniteReward(f64),
    #[error("context contains a non-finite component")]
    NonFiniteContext,
    #[error("no candidates to select from")]
    EmptyCandidates,
    #[error("delta must lie in (0, 1), got {0}")]
    InvalidDelta(f64),
    #[error("exploration parameters must be finite and non-negative")]
    InvalidBeta,
    #[error("window {window} is smaller than the context dimension {d}")]
    WindowTooSmall { window: usize, d: usize },
    #[error("design matrix is not positive definite")]
    Singular,
    #[error("ridge snapshot line {line}: {msg}")]
    StateParse { line: usize, msg: String },
}

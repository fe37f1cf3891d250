//! Post-hoc analyses over routing logs: the four-score sanity radar,
//! selection distributions, uncertainty shrinkage, and regret accounting.

mod distribution;
mod jsd;
mod radar;
mod regret;
mod uncertainty;

use thiserror::Error;

pub use distribution::{selection_distribution, DistributionReport};
pub use jsd::{entropy_bits, js_distance, js_divergence, normalize_counts};
pub use radar::{
    accuracy_from_log, appropriate_match_score, coverage_balance_score, radar_from_log, trajectory_smoothness_score,
    weight_normalization_score, RadarConfig, RadarReport,
};
pub use regret::{regret_trace, RegretStep, RegretTrace};
pub use uncertainty::{
    shrinkage_report, uncertainty_from_log, uncertainty_trace, RidgeSnapshot, ShrinkageRow, UncertaintyPoint,
    FEATURE_NAMES,
};

#[derive(Debug, Error, PartialEq)]
pub enum DiagnosticsError {
    #[error("trace of {len} selections is shorter than {need}")]
    TraceTooShort { len: usize, need: usize },
    #[error("no accuracy row for task type `{0}`")]
    MissingAccuracy(String),
    #[error("no selections for {level} level in phase {phase}")]
    EmptyPhase { level: &'static str, phase: &'static str },
    #[error("need at least {need} snapshots, got {got}")]
    TooFewSnapshots { need: usize, got: usize },
    #[error("empty counts")]
    EmptyCounts,
    #[error("window size must be positive")]
    ZeroWindow,
    #[error("step {step}: {msg}")]
    InvalidStep { step: usize, msg: String },
}

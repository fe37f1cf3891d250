//! Task difficulty scoring, per-dataset normalization and binning, and the
//! cold-start / train / test phase split.

mod difficulty;
mod phases;
mod synthetic;

use std::collections::BTreeMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use difficulty::{
    bbh_c_task, count_asserts, count_medical_keywords, difficulty_score, estimate_steps, has_latex, normalize_and_bin,
    percentile_nearest, score_all, word_count, BinSummary, Normalizers, CLINICAL_CASE_WORDS,
};
pub use phases::{build_phases, filter_bins, BinFilter, PhaseSplit, DEFAULT_RATIOS};
pub use synthetic::{synthetic_prompt_stream, synthetic_records};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bin {
    Easy,
    Medium,
    Hard,
}

impl Bin {
    pub fn as_str(self) -> &'static str {
        match self {
            Bin::Easy => "easy",
            Bin::Medium => "medium",
            Bin::Hard => "hard",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dataset {
    HumanEval,
    Gsm8k,
    Bbh,
    Amc,
    MedicalQa,
    Synthetic,
}

impl Dataset {
    pub fn as_str(self) -> &'static str {
        match self {
            Dataset::HumanEval => "human_eval",
            Dataset::Gsm8k => "gsm8k",
            Dataset::Bbh => "bbh",
            Dataset::Amc => "amc",
            Dataset::MedicalQa => "medical_qa",
            Dataset::Synthetic => "synthetic",
        }
    }
}

/// One benchmark item with the structured fields its difficulty formula
/// needs. Fields irrelevant to the item's dataset stay `None`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskRecord {
    pub task_id: String,
    pub dataset: Option<Dataset>,
    pub n_assert: Option<f64>,
    pub prompt_words: Option<f64>,
    pub n_steps: Option<f64>,
    /// BBH subtask name, resolved against the complexity table.
    pub bbh_task: Option<String>,
    pub c_task: Option<f64>,
    pub input_words: Option<f64>,
    pub problem_chars: Option<f64>,
    pub has_latex: Option<bool>,
    pub question_words: Option<f64>,
    pub n_keywords: Option<f64>,
    pub avg_option_len: Option<f64>,
    pub is_clinical_case: Option<bool>,
    /// Synthetic records carry their difficulty directly.
    pub declared_difficulty: Option<f64>,
    pub difficulty_raw: Option<f64>,
    pub difficulty_norm: Option<f64>,
    pub bin: Option<Bin>,
}

#[derive(Debug, Error, PartialEq)]
pub enum WorkloadError {
    #[error("{task_id}: missing field `{field}`")]
    MissingField { task_id: String, field: &'static str },
    #[error("no `{field}` normalizer for {dataset}")]
    MissingNormalizer { dataset: &'static str, field: &'static str },
    #[error("unknown BBH task `{0}`")]
    UnknownBbhTask(String),
    #[error("no records")]
    Empty,
    #[error("{records} records cannot fill {phases} phases")]
    TooFewRecords { records: usize, phases: usize },
    #[error("phase ratios must be non-negative with a positive sum")]
    InvalidRatios,
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io: {0}")]
    Io(String),
}

impl TaskRecord {
    pub fn dataset(&self) -> Result<Dataset, WorkloadError> {
        self.dataset.ok_or_else(|| WorkloadError::MissingField {
            task_id: self.task_id.clone(),
            field: "dataset",
        })
    }

    pub(crate) fn need<T: Copy>(&self, v: Option<T>, field: &'static str) -> Result<T, WorkloadError> {
        v.ok_or_else(|| WorkloadError::MissingField {
            task_id: self.task_id.clone(),
            field,
        })
    }
}

/// Parse JSONL task records, reporting the 1-based line of the first error.
pub fn read_records<R: BufRead>(r: R) -> Result<Vec<TaskRecord>, WorkloadError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| WorkloadError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| WorkloadError::Parse {
            line: i + 1,
            msg: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Records grouped by dataset, preserving input order within each group.
pub fn group_by_dataset(records: &[TaskRecord]) -> Result<BTreeMap<Dataset, Vec<usize>>, WorkloadError> {
    let mut groups: BTreeMap<Dataset, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        groups.entry(r.dataset()?).or_default().push(i);
    }
    Ok(groups)
}

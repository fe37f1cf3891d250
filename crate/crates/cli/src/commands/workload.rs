//! `workload score` and `workload split`: difficulty scoring with cached
//! per-dataset normalizers, and the cold-start / train / test split.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use beacon_core::workload::{
    build_phases, filter_bins, normalize_and_bin, read_records, score_all, synthetic_records, BinSummary, Normalizers,
    TaskRecord,
};

use crate::config::{hex, ExperimentConfig};
use crate::output::{read_input, Outputs};

/// Normalizer table cached beside a records file, valid while the file's
/// content hash matches.
#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    dataset_hash: String,
    normalizers: Normalizers,
}

pub fn sidecar_path(records: &Path) -> PathBuf {
    let mut name = records.file_name().unwrap_or_default().to_os_string();
    name.push(".normalizers.json");
    records.with_file_name(name)
}

/// Cached normalizers for `path`, refitting and rewriting the cache when it
/// is missing, unreadable or stale.
fn normalizers_for(path: &Path, records: &[TaskRecord]) -> Result<Normalizers> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let dataset_hash = hex(&Sha256::digest(&bytes));
    let cache = sidecar_path(path);
    if let Ok(text) = fs::read_to_string(&cache) {
        match serde_json::from_str::<Sidecar>(&text) {
            Ok(s) if s.dataset_hash == dataset_hash => {
                tracing::info!(cache = %cache.display(), "using cached normalizers");
                return Ok(s.normalizers);
            }
            Ok(_) => tracing::info!(cache = %cache.display(), "normalizer cache is stale"),
            Err(e) => tracing::warn!(cache = %cache.display(), %e, "ignoring unreadable normalizer cache"),
        }
    }
    let normalizers = Normalizers::fit(records)?;
    let text = serde_json::to_string_pretty(&Sidecar {
        dataset_hash,
        normalizers: normalizers.clone(),
    })?;
    if let Err(e) = fs::write(&cache, text + "\n") {
        tracing::warn!(cache = %cache.display(), %e, "could not write normalizer cache");
    }
    Ok(normalizers)
}

fn load(cfg: &ExperimentConfig) -> Result<(Vec<TaskRecord>, Option<&Path>)> {
    match &cfg.workload.records {
        Some(p) => {
            let text = read_input(p)?;
            let records = read_records(text.as_bytes()).map_err(|e| anyhow::anyhow!("{}: {e}", p.display()))?;
            Ok((records, Some(p.as_path())))
        }
        None => Ok((synthetic_records(cfg.workload.n_synthetic, cfg.seed), None)),
    }
}

fn score(records: &mut [TaskRecord], source: Option<&Path>) -> Result<(Normalizers, Vec<BinSummary>)> {
    let norms = match source {
        Some(p) => normalizers_for(p, records)?,
        None => Normalizers::fit(records)?,
    };
    score_all(records, &norms)?;
    let bins = normalize_and_bin(records)?;
    Ok((norms, bins))
}

pub fn run_score(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let (mut records, source) = load(cfg)?;
    let (norms, bins) = score(&mut records, source)?;
    out.jsonl("scored.jsonl", &records)?;
    out.csv("bins.csv", &bins)?;
    out.json("normalizers.json", &norms)?;
    Ok(())
}

#[derive(Serialize)]
struct SplitRow {
    phase: &'static str,
    count: usize,
    easy: usize,
    medium: usize,
    hard: usize,
}

fn split_row(phase: &'static str, rs: &[TaskRecord]) -> SplitRow {
    use beacon_core::workload::Bin;
    let n = |b: Bin| rs.iter().filter(|r| r.bin == Some(b)).count();
    SplitRow {
        phase,
        count: rs.len(),
        easy: n(Bin::Easy),
        medium: n(Bin::Medium),
        hard: n(Bin::Hard),
    }
}

pub fn run_split(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let (mut records, source) = load(cfg)?;
    // Unbinned input is scored first so the bin filter has something to act on.
    if records.iter().any(|r| r.bin.is_none()) {
        score(&mut records, source)?;
    }
    let kept = filter_bins(&records, cfg.workload.filter);
    let split = build_phases(&kept, cfg.workload.ratios, cfg.seed)?;
    out.jsonl("cold_start.jsonl", &split.cold)?;
    out.jsonl("train.jsonl", &split.train)?;
    out.jsonl("test.jsonl", &split.test)?;
    out.csv(
        "split.csv",
        &[
            split_row("cold_start", &split.cold),
            split_row("train", &split.train),
            split_row("test", &split.test),
        ],
    )?;
    Ok(())
}

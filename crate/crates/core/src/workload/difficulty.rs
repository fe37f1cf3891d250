//! Per-dataset difficulty formulas, normalizers, and percentile binning.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{group_by_dataset, Bin, Dataset, TaskRecord, WorkloadError};

/// Medical questions longer than this many words count as clinical cases.
pub const CLINICAL_CASE_WORDS: f64 = 100.0;

const BBH_TABLE: &str = include_str!("../../fixtures/bbh_c_task.toml");
const MEDICAL_KEYWORDS: &str = include_str!("../../fixtures/medical_keywords.txt");

#[derive(Deserialize)]
struct BbhTable {
    c_task: BTreeMap<String, f64>,
    aliases: BTreeMap<String, String>,
}

fn bbh_table() -> &'static BbhTable {
    static TABLE: OnceLock<BbhTable> = OnceLock::new();
    TABLE.get_or_init(|| toml::from_str(BBH_TABLE).expect("shipped BBH table is valid"))
}

fn medical_keywords() -> &'static BTreeSet<String> {
    static WORDS: OnceLock<BTreeSet<String>> = OnceLock::new();
    WORDS.get_or_init(|| {
        MEDICAL_KEYWORDS
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect()
    })
}

/// Base complexity of a BBH task. Accepts aliases and subtask variants such
/// as `logical_deduction_five_objects`.
pub fn bbh_c_task(name: &str) -> Result<f64, WorkloadError> {
    let t = bbh_table();
    let key = name.trim().to_lowercase();
    let key = t.aliases.get(&key).cloned().unwrap_or(key);
    if let Some(v) = t.c_task.get(&key) {
        return Ok(*v);
    }
    t.c_task
        .iter()
        .filter(|(k, _)| key.starts_with(k.as_str()))
        .max_by_key(|(k, _)| k.len())
        .map(|(_, v)| *v)
        .ok_or_else(|| WorkloadError::UnknownBbhTask(name.to_string()))
}

pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Syntactic `assert` statements; a multi-line assert counts once.
pub fn count_asserts(code: &str) -> usize {
    code.lines()
        .filter(|l| {
            let l = l.trim_start();
            l.strip_prefix("assert")
                .is_some_and(|rest| rest.is_empty() || !rest.starts_with(|c: char| c.is_alphanumeric() || c == '_'))
        })
        .count()
}

fn is_numbered_item(line: &str) -> bool {
    let digits = line.chars().take_while(char::is_ascii_digit).count();
    digits > 0 && matches!(line[digits..].chars().next(), Some('.') | Some(')'))
}

/// Reasoning steps in a worked solution: non-empty lines, plus numbered
/// items, plus connectives (`therefore`, `thus`, `finally`, `so`).
pub fn estimate_steps(solution: &str) -> usize {
    const CONNECTIVES: [&str; 4] = ["therefore", "thus", "finally", "so"];
    let lines: Vec<&str> = solution.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    let numbered = lines.iter().filter(|l| is_numbered_item(l)).count();
    let connectives = solution
        .split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|w| CONNECTIVES.contains(&w.as_str()))
        .count();
    lines.len() + numbered + connectives
}

pub fn has_latex(text: &str) -> bool {
    text.contains('$') || text.contains("\\(") || text.contains("\\frac") || text.contains("\\[")
}

pub fn count_medical_keywords(text: &str) -> usize {
    let kw = medical_keywords();
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|w| kw.contains(w))
        .count()
}

/// Nearest-rank percentile on sorted data: `sorted[round(p (n − 1))]`, with
/// ties rounding to even.
pub fn percentile_nearest(sorted: &[f64], p: f64) -> f64 {
    let idx = (p * (sorted.len() - 1) as f64).round_ties_even() as usize;
    sorted[idx.min(sorted.len() - 1)]
}

fn fields_for(dataset: Dataset) -> &'static [&'static str] {
    match dataset {
        Dataset::HumanEval => &["n_assert", "prompt_words"],
        Dataset::Gsm8k => &["n_steps"],
        Dataset::Bbh => &["input_words"],
        Dataset::Amc => &["problem_chars"],
        Dataset::MedicalQa => &["question_words", "n_keywords", "avg_option_len"],
        Dataset::Synthetic => &[],
    }
}

fn field_value(rec: &TaskRecord, field: &str) -> Option<f64> {
    match field {
        "n_assert" => rec.n_assert,
        "prompt_words" => rec.prompt_words,
        "n_steps" => rec.n_steps,
        "input_words" => rec.input_words,
        "problem_chars" => rec.problem_chars,
        "question_words" => rec.question_words,
        "n_keywords" => rec.n_keywords,
        "avg_option_len" => rec.avg_option_len,
        _ => None,
    }
}

/// 95th percentiles of each length/count field, per dataset.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Normalizers {
    pub p95: BTreeMap<Dataset, BTreeMap<String, f64>>,
}

impl Normalizers {
    pub fn fit(records: &[TaskRecord]) -> Result<Self, WorkloadError> {
        let mut p95: BTreeMap<Dataset, BTreeMap<String, f64>> = BTreeMap::new();
        for (ds, idx) in group_by_dataset(records)? {
            for field in fields_for(ds) {
                let mut vals: Vec<f64> = idx.iter().filter_map(|&i| field_value(&records[i], field)).collect();
                if vals.is_empty() {
                    continue;
                }
                vals.sort_by(f64::total_cmp);
                p95.entry(ds)
                    .or_default()
                    .insert(field.to_string(), percentile_nearest(&vals, 0.95));
            }
        }
        Ok(Self { p95 })
    }

    pub fn set(&mut self, dataset: Dataset, field: &str, value: f64) {
        self.p95.entry(dataset).or_default().insert(field.to_string(), value);
    }

    pub fn get(&self, dataset: Dataset, field: &'static str) -> Result<f64, WorkloadError> {
        self.p95
            .get(&dataset)
            .and_then(|m| m.get(field))
            .copied()
            .ok_or(WorkloadError::MissingNormalizer {
                dataset: dataset.as_str(),
                field,
            })
    }
}

fn ratio(v: f64, norm: f64) -> f64 {
    if norm > 0.0 {
        v / norm
    } else {
        0.0
    }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Raw difficulty of one record under its dataset's formula.
pub fn difficulty_score(rec: &TaskRecord, norms: &Normalizers) -> Result<f64, WorkloadError> {
    let ds = rec.dataset()?;
    let n = |field: &'static str| norms.get(ds, field);
    Ok(match ds {
        Dataset::HumanEval => {
            0.6 * ratio(rec.need(rec.n_assert, "n_assert")?, n("n_assert")?)
                + 0.4 * ratio(rec.need(rec.prompt_words, "prompt_words")?, n("prompt_words")?)
        }
        Dataset::Gsm8k => ratio(rec.need(rec.n_steps, "n_steps")?, n("n_steps")?),
        Dataset::Bbh => {
            let c = match (rec.c_task, &rec.bbh_task) {
                (Some(c), _) => c,
                (None, Some(name)) => bbh_c_task(name)?,
                (None, None) => rec.need(None, "bbh_task")?,
            };
            c + 0.3 * ratio(rec.need(rec.input_words, "input_words")?, n("input_words")?)
        }
        Dataset::Amc => {
            0.7 * ratio(rec.need(rec.problem_chars, "problem_chars")?, n("problem_chars")?)
                + 0.3 * flag(rec.need(rec.has_latex, "has_latex")?)
        }
        Dataset::MedicalQa => {
            let qw = rec.need(rec.question_words, "question_words")?;
            let clinical = rec.is_clinical_case.unwrap_or(qw > CLINICAL_CASE_WORDS);
            0.4 * ratio(qw, n("question_words")?)
                + 0.3 * ratio(rec.need(rec.n_keywords, "n_keywords")?, n("n_keywords")?)
                + 0.2 * ratio(rec.need(rec.avg_option_len, "avg_option_len")?, n("avg_option_len")?)
                + 0.1 * flag(clinical)
        }
        Dataset::Synthetic => rec.need(rec.declared_difficulty, "declared_difficulty")?,
    })
}

/// Fill `difficulty_raw` on every record.
pub fn score_all(records: &mut [TaskRecord], norms: &Normalizers) -> Result<(), WorkloadError> {
    for r in records.iter_mut() {
        r.difficulty_raw = Some(difficulty_score(r, norms)?);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSummary {
    pub dataset: Dataset,
    pub n: usize,
    pub p20: f64,
    pub p80: f64,
    pub easy: usize,
    pub medium: usize,
    pub hard: usize,
    /// All raw scores were equal; everything was put in the medium bin.
    pub degenerate: bool,
}

/// Min-max normalize `difficulty_raw` within each dataset and bin by the
/// dataset's 20th and 80th percentiles (easy iff `d ≤ P20`, hard iff
/// `d ≥ P80`).
pub fn normalize_and_bin(records: &mut [TaskRecord]) -> Result<Vec<BinSummary>, WorkloadError> {
    if records.is_empty() {
        return Err(WorkloadError::Empty);
    }
    let mut out = Vec::new();
    for (ds, idx) in group_by_dataset(records)? {
        let raw: Vec<f64> = idx
            .iter()
            .map(|&i| records[i].need(records[i].difficulty_raw, "difficulty_raw"))
            .collect::<Result<_, _>>()?;
        let mut sorted = raw.clone();
        sorted.sort_by(f64::total_cmp);
        let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
        let p20 = percentile_nearest(&sorted, 0.2);
        let p80 = percentile_nearest(&sorted, 0.8);
        let degenerate = hi <= lo;
        if degenerate {
            tracing::warn!(
                dataset = ds.as_str(),
                "constant difficulty scores; all records binned medium"
            );
        }
        let mut summary = BinSummary {
            dataset: ds,
            n: idx.len(),
            p20,
            p80,
            easy: 0,
            medium: 0,
            hard: 0,
            degenerate,
        };
        for (&i, &d) in idx.iter().zip(&raw) {
            let (norm, bin) = if degenerate {
                (0.0, Bin::Medium)
            } else {
                let bin = if d <= p20 {
                    Bin::Easy
                } else if d >= p80 {
                    Bin::Hard
                } else {
                    Bin::Medium
                };
                (((d - lo) / (hi - lo)).clamp(0.0, 1.0), bin)
            };
            match bin {
                Bin::Easy => summary.easy += 1,
                Bin::Medium => summary.medium += 1,
                Bin::Hard => summary.hard += 1,
            }
            records[i].difficulty_norm = Some(norm);
            records[i].bin = Some(bin);
        }
        out.push(summary);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn synth(raw: &[f64]) -> Vec<TaskRecord> {
        raw.iter()
            .enumerate()
            .map(|(i, d)| TaskRecord {
                task_id: format!("s{i}"),
                dataset: Some(Dataset::Synthetic),
                difficulty_raw: Some(*d),
                ..TaskRecord::default()
            })
            .collect()
    }

    fn bbh(task: &str, words: f64) -> TaskRecord {
        TaskRecord {
            task_id: "bbh-1".into(),
            dataset: Some(Dataset::Bbh),
            bbh_task: Some(task.into()),
            input_words: Some(words),
            ..TaskRecord::default()
        }
    }

    #[test]
    fn bbh_anchors() {
        let mut norms = Normalizers::default();
        norms.set(Dataset::Bbh, "input_words", 120.0);
        assert_eq!(
            difficulty_score(&bbh("sports_understanding", 0.0), &norms).unwrap(),
            0.25
        );
        let v = difficulty_score(&bbh("multi_step_arithmetic", 120.0), &norms).unwrap();
        assert!((v - 1.15).abs() < 1e-12);
        assert_eq!(bbh_c_task("logical_deduction_five_objects").unwrap(), 0.65);
        assert!(matches!(
            bbh_c_task("nonexistent"),
            Err(WorkloadError::UnknownBbhTask(_))
        ));
    }

    #[test]
    fn bbh_table_has_23_tasks_within_anchors() {
        let t = bbh_table();
        assert_eq!(t.c_task.len(), 23);
        assert!(t.c_task.values().all(|v| (0.25..=0.85).contains(v)));
    }

    #[test]
    fn medical_coefficients_sum_to_one() {
        let mut norms = Normalizers::default();
        for (f, v) in [("question_words", 150.0), ("n_keywords", 4.0), ("avg_option_len", 6.0)] {
            norms.set(Dataset::MedicalQa, f, v);
        }
        let rec = TaskRecord {
            task_id: "med-1".into(),
            dataset: Some(Dataset::MedicalQa),
            question_words: Some(150.0),
            n_keywords: Some(4.0),
            avg_option_len: Some(6.0),
            ..TaskRecord::default()
        };
        assert!((difficulty_score(&rec, &norms).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn missing_field_and_normalizer() {
        let norms = Normalizers::default();
        let rec = TaskRecord {
            task_id: "g".into(),
            dataset: Some(Dataset::Gsm8k),
            ..TaskRecord::default()
        };
        assert!(matches!(
            difficulty_score(&rec, &norms),
            Err(WorkloadError::MissingField { field: "n_steps", .. })
        ));
        let rec = TaskRecord {
            n_steps: Some(3.0),
            ..rec
        };
        assert!(matches!(
            difficulty_score(&rec, &norms),
            Err(WorkloadError::MissingNormalizer { .. })
        ));
    }

    #[test]
    fn text_helpers() {
        let code = "def f():\n    pass\nassert f() is None\nassert_valid(x)\n  assert (1 ==\n     1)\n";
        assert_eq!(count_asserts(code), 2);
        let sol = "1. Add 3 and 4.\n2. So we get 7.\nTherefore the answer is 7.";
        assert_eq!(estimate_steps(sol), 3 + 2 + 2);
        assert!(has_latex("Find $x^2$"));
        assert!(!has_latex("plain"));
        assert_eq!(
            count_medical_keywords("Diagnosis: acute renal failure; prognosis poor."),
            4
        );
        assert_eq!(word_count("  a b\tc\n"), 3);
    }

    #[test]
    fn minmax_endpoints() {
        let mut recs = synth(&[0.0, 1.0]);
        normalize_and_bin(&mut recs).unwrap();
        assert_eq!(recs[0].difficulty_norm, Some(0.0));
        assert_eq!(recs[1].difficulty_norm, Some(1.0));
    }

    #[test]
    fn uniform_hundred_gives_21_21() {
        let raw: Vec<f64> = (0..100).map(f64::from).collect();
        let mut recs = synth(&raw);
        let s = normalize_and_bin(&mut recs).unwrap();
        assert_eq!((s[0].easy, s[0].medium, s[0].hard), (21, 58, 21));
        assert_eq!((s[0].p20, s[0].p80), (20.0, 79.0));
    }

    #[test]
    fn constant_scores_all_medium() {
        let mut recs = synth(&[0.5; 7]);
        let s = normalize_and_bin(&mut recs).unwrap();
        assert!(s[0].degenerate);
        assert!(recs
            .iter()
            .all(|r| r.bin == Some(Bin::Medium) && r.difficulty_norm == Some(0.0)));
    }

    #[test]
    fn fit_uses_nearest_p95() {
        let recs: Vec<TaskRecord> = (1..=20)
            .map(|i| TaskRecord {
                task_id: format!("g{i}"),
                dataset: Some(Dataset::Gsm8k),
                n_steps: Some(f64::from(i)),
                ..TaskRecord::default()
            })
            .collect();
        let n = Normalizers::fit(&recs).unwrap();
        // round(0.95 * 19) = 18 -> value 19.
        assert_eq!(n.get(Dataset::Gsm8k, "n_steps").unwrap(), 19.0);
    }

    fn he(n_assert: f64, words: f64) -> TaskRecord {
        TaskRecord {
            task_id: "he".into(),
            dataset: Some(Dataset::HumanEval),
            n_assert: Some(n_assert),
            prompt_words: Some(words),
            ..TaskRecord::default()
        }
    }

    proptest! {
        #[test]
        fn human_eval_monotone(a in 0.0..50.0f64, w in 0.0..500.0f64, da in 0.0..10.0f64, dw in 0.0..100.0f64) {
            let mut norms = Normalizers::default();
            norms.set(Dataset::HumanEval, "n_assert", 10.0);
            norms.set(Dataset::HumanEval, "prompt_words", 200.0);
            let base = difficulty_score(&he(a, w), &norms).unwrap();
            prop_assert!(difficulty_score(&he(a + da, w), &norms).unwrap() >= base);
            prop_assert!(difficulty_score(&he(a, w + dw), &norms).unwrap() >= base);
        }

        #[test]
        fn medical_monotone(q in 0.0..300.0f64, k in 0.0..10.0f64, o in 0.0..20.0f64, dq in 0.0..50.0f64, dk in 0.0..5.0f64, d_o in 0.0..5.0f64) {
            let mut norms = Normalizers::default();
            for (f, v) in [("question_words", 150.0), ("n_keywords", 4.0), ("avg_option_len", 6.0)] {
                norms.set(Dataset::MedicalQa, f, v);
            }
            let rec = |q, k, o| TaskRecord {
                task_id: "m".into(),
                dataset: Some(Dataset::MedicalQa),
                question_words: Some(q),
                n_keywords: Some(k),
                avg_option_len: Some(o),
                ..TaskRecord::default()
            };
            let base = difficulty_score(&rec(q, k, o), &norms).unwrap();
            prop_assert!(difficulty_score(&rec(q + dq, k, o), &norms).unwrap() >= base);
            prop_assert!(difficulty_score(&rec(q, k + dk, o), &norms).unwrap() >= base);
            prop_assert!(difficulty_score(&rec(q, k, o + d_o), &norms).unwrap() >= base);
        }

        #[test]
        fn bins_invariant_to_affine_rescaling(
            raw in proptest::collection::vec(0i32..1000, 2..80),
            a in 0.5..10.0f64,
            b in -10.0..10.0f64,
        ) {
            let raw: Vec<f64> = raw.into_iter().map(f64::from).collect();
            let mut r1 = synth(&raw);
            let scaled: Vec<f64> = raw.iter().map(|x| a * x + b).collect();
            let mut r2 = synth(&scaled);
            normalize_and_bin(&mut r1).unwrap();
            normalize_and_bin(&mut r2).unwrap();
            for (x, y) in r1.iter().zip(&r2) {
                prop_assert_eq!(x.bin, y.bin);
                prop_assert!((x.difficulty_norm.unwrap() - y.difficulty_norm.unwrap()).abs() < 1e-9);
            }
        }
    }
}

//! Four sanity scores in `[0, 1]` over a routing log.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::jsd::{entropy_bits, js_distance, js_divergence};
use super::DiagnosticsError;
use crate::events::{EventLog, Level};
use crate::types::{dataset_tag_of, AgentId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadarReport {
    pub weight_normalization: f64,
    pub coverage_balance: f64,
    pub appropriate_match: f64,
    pub trajectory_smoothness: f64,
}

impl RadarReport {
    pub const COLUMNS: [&'static str; 4] = [
        "weight_normalization",
        "coverage_balance",
        "appropriate_match",
        "trajectory_smoothness",
    ];

    pub fn values(&self) -> [f64; 4] {
        [
            self.weight_normalization,
            self.coverage_balance,
            self.appropriate_match,
            self.trajectory_smoothness,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarConfig {
    pub tau_weight: f64,
    pub window: usize,
    pub tau_smooth: f64,
    /// Target task-type mix; `None` scores coverage by normalized entropy.
    pub target: Option<BTreeMap<String, f64>>,
}

impl Default for RadarConfig {
    fn default() -> Self {
        Self {
            tau_weight: 0.05,
            window: 50,
            tau_smooth: 0.2,
            target: None,
        }
    }
}

/// `max(0, 1 − fail_ratio / τ)` with `fail_ratio = fail / (ok + fail)`; 1 when
/// no plan weights were produced at all.
pub fn weight_normalization_score(fail: u64, ok: u64, tau: f64) -> f64 {
    if fail + ok == 0 {
        return 1.0;
    }
    let ratio = fail as f64 / (fail + ok) as f64;
    (1.0 - ratio / tau).clamp(0.0, 1.0)
}

/// `1 − JSD(empirical ∥ target)` with a target, else `H(empirical) / log K`.
pub fn coverage_balance_score(
    counts: &BTreeMap<String, f64>,
    target: Option<&BTreeMap<String, f64>>,
) -> Result<f64, DiagnosticsError> {
    let total: f64 = counts.values().sum();
    if counts.is_empty() || total <= 0.0 {
        return Err(DiagnosticsError::EmptyCounts);
    }
    match target {
        Some(target) => {
            let keys: BTreeSet<&String> = counts.keys().chain(target.keys()).collect();
            let t_total: f64 = target.values().sum();
            if t_total <= 0.0 {
                return Err(DiagnosticsError::EmptyCounts);
            }
            let p: Vec<f64> = keys
                .iter()
                .map(|k| counts.get(*k).copied().unwrap_or(0.0) / total)
                .collect();
            let q: Vec<f64> = keys
                .iter()
                .map(|k| target.get(*k).copied().unwrap_or(0.0) / t_total)
                .collect();
            Ok((1.0 - js_divergence(&p, &q)).clamp(0.0, 1.0))
        }
        None => {
            let k = counts.len();
            if k == 1 {
                return Ok(1.0);
            }
            let p: Vec<f64> = counts.values().map(|v| v / total).collect();
            Ok((entropy_bits(&p) / (k as f64).log2()).clamp(0.0, 1.0))
        }
    }
}

fn reference_agent(row: &BTreeMap<AgentId, f64>) -> Option<&AgentId> {
    // BTreeMap order makes the first maximum the lexicographically smallest.
    let mut best: Option<(&AgentId, f64)> = None;
    for (id, acc) in row {
        if best.is_none_or(|(_, b)| *acc > b) {
            best = Some((id, *acc));
        }
    }
    best.map(|(id, _)| id)
}

/// Fraction of `(task_type, chosen)` selections that hit the most accurate
/// agent for that type.
pub fn appropriate_match_score(
    selections: &[(String, AgentId)],
    accuracy: &BTreeMap<String, BTreeMap<AgentId, f64>>,
) -> Result<f64, DiagnosticsError> {
    if selections.is_empty() {
        return Err(DiagnosticsError::EmptyCounts);
    }
    let mut hits = 0usize;
    for (ty, chosen) in selections {
        let reference = accuracy
            .get(ty)
            .and_then(reference_agent)
            .ok_or_else(|| DiagnosticsError::MissingAccuracy(ty.clone()))?;
        if reference == chosen {
            hits += 1;
        }
    }
    Ok(hits as f64 / selections.len() as f64)
}

/// `max(0, 1 − mean Δ / τ)` where `Δ` is the Jensen-Shannon distance between
/// the selection distributions of adjacent non-overlapping windows.
pub fn trajectory_smoothness_score(choices: &[AgentId], window: usize, tau: f64) -> Result<f64, DiagnosticsError> {
    if window == 0 {
        return Err(DiagnosticsError::ZeroWindow);
    }
    if choices.len() < 2 * window {
        return Err(DiagnosticsError::TraceTooShort {
            len: choices.len(),
            need: 2 * window,
        });
    }
    let agents: Vec<&AgentId> = choices.iter().collect::<BTreeSet<_>>().into_iter().collect();
    let dists: Vec<Vec<f64>> = choices
        .chunks_exact(window)
        .map(|w| {
            agents
                .iter()
                .map(|a| w.iter().filter(|c| c == a).count() as f64 / window as f64)
                .collect()
        })
        .collect();
    let deltas: Vec<f64> = dists.windows(2).map(|p| js_distance(&p[1], &p[0])).collect();
    let mean = deltas.iter().sum::<f64>() / deltas.len() as f64;
    Ok((1.0 - mean / tau).clamp(0.0, 1.0))
}

/// Per-type accuracy of each agent from executions carrying correctness labels.
pub fn accuracy_from_log(log: &EventLog) -> BTreeMap<String, BTreeMap<AgentId, f64>> {
    let mut tallies: BTreeMap<String, BTreeMap<AgentId, (u64, u64)>> = BTreeMap::new();
    for e in log.executions() {
        if let Some(c) = e.correct {
            let t = tallies
                .entry(dataset_tag_of(&e.task_id))
                .or_default()
                .entry(e.agent.clone())
                .or_insert((0, 0));
            t.0 += u64::from(c);
            t.1 += 1;
        }
    }
    tallies
        .into_iter()
        .map(|(ty, row)| {
            (
                ty,
                row.into_iter().map(|(a, (h, n))| (a, h as f64 / n as f64)).collect(),
            )
        })
        .collect()
}

/// All four scores from one log. Accuracy defaults to the log's own labels.
pub fn radar_from_log(
    log: &EventLog,
    accuracy: Option<&BTreeMap<String, BTreeMap<AgentId, f64>>>,
    cfg: &RadarConfig,
) -> Result<RadarReport, DiagnosticsError> {
    let (fail, requested) = log.votes().fold((0u64, 0u64), |(f, n), v| {
        (f + u64::from(v.plan_parse_fail), n + u64::from(v.plan_count))
    });
    let weight_normalization = weight_normalization_score(fail, requested.saturating_sub(fail), cfg.tau_weight);

    let mut types: BTreeMap<String, f64> = BTreeMap::new();
    let task_ids: Vec<&str> = if log.votes().next().is_some() {
        log.votes().map(|v| v.task_id.as_str()).collect()
    } else {
        log.selections()
            .map(|s| s.task_id.as_str())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    };
    for id in task_ids {
        *types.entry(dataset_tag_of(id)).or_insert(0.0) += 1.0;
    }
    let coverage_balance = coverage_balance_score(&types, cfg.target.as_ref())?;

    let subtask: Vec<(String, AgentId)> = log
        .selections()
        .filter(|s| s.level == Level::Subtask)
        .map(|s| (dataset_tag_of(&s.task_id), s.chosen.clone()))
        .collect();
    let derived;
    let accuracy = match accuracy {
        Some(a) => a,
        None => {
            derived = accuracy_from_log(log);
            &derived
        }
    };
    let appropriate_match = appropriate_match_score(&subtask, accuracy)?;
    let choices: Vec<AgentId> = subtask.into_iter().map(|(_, a)| a).collect();
    let trajectory_smoothness = trajectory_smoothness_score(&choices, cfg.window, cfg.tau_smooth)?;
    Ok(RadarReport {
        weight_normalization,
        coverage_balance,
        appropriate_match,
        trajectory_smoothness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(s: &str) -> Vec<AgentId> {
        s.chars().map(|c| AgentId::new(c.to_string())).collect()
    }

    #[test]
    fn weight_normalization_cases() {
        assert_eq!(weight_normalization_score(0, 40, 0.05), 1.0);
        assert_eq!(weight_normalization_score(0, 0, 0.05), 1.0);
        assert_eq!(weight_normalization_score(5, 95, 0.05), 0.0);
        assert!((weight_normalization_score(1, 99, 0.05) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn coverage_cases() {
        let uniform: BTreeMap<String, f64> = ["a", "b", "c"].iter().map(|k| (k.to_string(), 4.0)).collect();
        assert!((coverage_balance_score(&uniform, None).unwrap() - 1.0).abs() < 1e-12);
        let point: BTreeMap<String, f64> = [("a".to_string(), 5.0), ("b".to_string(), 0.0)].into();
        assert_eq!(coverage_balance_score(&point, None).unwrap(), 0.0);
        assert_eq!(coverage_balance_score(&uniform, Some(&uniform)).unwrap(), 1.0);
        let single: BTreeMap<String, f64> = [("a".to_string(), 3.0)].into();
        assert_eq!(coverage_balance_score(&single, None).unwrap(), 1.0);
        assert_eq!(
            coverage_balance_score(&BTreeMap::new(), None),
            Err(DiagnosticsError::EmptyCounts)
        );
    }

    #[test]
    fn appropriate_match_cases() {
        let acc: BTreeMap<String, BTreeMap<AgentId, f64>> = [
            ("math".to_string(), [("A".into(), 0.9), ("B".into(), 0.5)].into()),
            ("code".to_string(), [("A".into(), 0.6), ("B".into(), 0.6)].into()),
        ]
        .into();
        let sel = |pairs: &[(&str, &str)]| -> Vec<(String, AgentId)> {
            pairs.iter().map(|(t, a)| (t.to_string(), AgentId::from(*a))).collect()
        };
        assert_eq!(
            appropriate_match_score(&sel(&[("math", "A"), ("code", "A")]), &acc).unwrap(),
            1.0
        );
        assert_eq!(
            appropriate_match_score(&sel(&[("math", "B"), ("code", "B")]), &acc).unwrap(),
            0.0
        );
        let s = sel(&[("math", "A"), ("math", "A"), ("code", "A"), ("math", "B")]);
        assert_eq!(appropriate_match_score(&s, &acc).unwrap(), 0.75);
        assert_eq!(
            appropriate_match_score(&sel(&[("bio", "A")]), &acc),
            Err(DiagnosticsError::MissingAccuracy("bio".into()))
        );
    }

    #[test]
    fn smoothness_cases() {
        let constant = ids(&"A".repeat(200));
        assert_eq!(trajectory_smoothness_score(&constant, 50, 0.2).unwrap(), 1.0);
        let alternating: Vec<AgentId> = (0..4)
            .flat_map(|i| ids(&if i % 2 == 0 { "A" } else { "B" }.repeat(50)))
            .collect();
        assert_eq!(trajectory_smoothness_score(&alternating, 50, 0.2).unwrap(), 0.0);
        assert!(matches!(
            trajectory_smoothness_score(&constant[..99], 50, 0.2),
            Err(DiagnosticsError::TraceTooShort { len: 99, need: 100 })
        ));
    }

    proptest! {
        #[test]
        fn scores_in_unit_interval(
            picks in proptest::collection::vec(0u8..4, 20..200),
            fail in 0u64..50, ok in 0u64..50,
            counts in proptest::collection::vec(0.0..10.0f64, 1..6),
        ) {
            let choices: Vec<AgentId> = picks.iter().map(|p| AgentId::new(format!("a{p}"))).collect();
            let s = trajectory_smoothness_score(&choices, 10, 0.2).unwrap();
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert!((0.0..=1.0).contains(&weight_normalization_score(fail, ok, 0.05)));
            let c: BTreeMap<String, f64> = counts.iter().enumerate().map(|(i, v)| (format!("t{i}"), *v)).collect();
            if c.values().sum::<f64>() > 0.0 {
                let v = coverage_balance_score(&c, None).unwrap();
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}

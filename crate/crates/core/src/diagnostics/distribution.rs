//! Who gets selected, per level and phase.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::DiagnosticsError;
use crate::events::{EventLog, Level, Phase};
use crate::types::AgentId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub level: Level,
    /// `None` covers the whole log.
    pub phase: Option<Phase>,
    pub total: usize,
    pub shares: BTreeMap<AgentId, f64>,
}

/// Selection shares. Plan level counts the planner behind each task's final
/// plan; subtask level counts every executor selection.
pub fn selection_distribution(
    log: &EventLog,
    level: Level,
    phase: Option<Phase>,
) -> Result<DistributionReport, DiagnosticsError> {
    let in_phase = |p: Option<Phase>| phase.is_none() || p == phase;
    let mut counts: BTreeMap<AgentId, usize> = BTreeMap::new();
    match level {
        Level::Plan => {
            for v in log.votes().filter(|v| in_phase(v.phase)) {
                if let Some(p) = &v.final_planner {
                    *counts.entry(p.clone()).or_insert(0) += 1;
                }
            }
        }
        Level::Subtask => {
            for s in log
                .selections()
                .filter(|s| s.level == Level::Subtask && in_phase(s.phase))
            {
                *counts.entry(s.chosen.clone()).or_insert(0) += 1;
            }
        }
    }
    let total: usize = counts.values().sum();
    if total == 0 {
        return Err(DiagnosticsError::EmptyPhase {
            level: match level {
                Level::Plan => "plan",
                Level::Subtask => "subtask",
            },
            phase: phase.map_or("all", Phase::as_str),
        });
    }
    Ok(DistributionReport {
        level,
        phase,
        total,
        shares: counts.into_iter().map(|(a, c)| (a, c as f64 / total as f64)).collect(),
    })
}

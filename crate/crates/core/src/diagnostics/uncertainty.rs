//! Shrinkage of the ridge inverse diagonal and parameter movement over time.

use serde::{Deserialize, Serialize};

use super::DiagnosticsError;
use crate::bandit::RidgeState;
use crate::events::EventLog;
use crate::linalg::norm2;

/// Context dimensions in feature order.
pub const FEATURE_NAMES: [&str; 6] = ["bias", "sim_emb", "load", "latency", "reliability", "availability"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeSnapshot {
    pub t: u64,
    pub a_inv_diag: Vec<f64>,
    pub theta: Vec<f64>,
}

impl RidgeSnapshot {
    pub fn of(ridge: &RidgeState) -> Self {
        Self {
            t: ridge.t(),
            a_inv_diag: ridge.a_inv().diag(),
            theta: ridge.theta().to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyPoint {
    pub t: u64,
    pub diag: Vec<f64>,
    pub trace: f64,
    /// `‖θ̂_t − θ̂_prev‖₂` against the previous snapshot; 0 for the first.
    pub theta_delta: f64,
}

pub fn uncertainty_trace(snapshots: &[RidgeSnapshot]) -> Result<Vec<UncertaintyPoint>, DiagnosticsError> {
    if snapshots.len() < 2 {
        return Err(DiagnosticsError::TooFewSnapshots {
            need: 2,
            got: snapshots.len(),
        });
    }
    Ok(snapshots
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let theta_delta = if i == 0 {
                0.0
            } else {
                let prev = &snapshots[i - 1].theta;
                let diff: Vec<f64> = s.theta.iter().zip(prev).map(|(a, b)| a - b).collect();
                norm2(&diff)
            };
            UncertaintyPoint {
                t: s.t,
                diag: s.a_inv_diag.clone(),
                trace: s.a_inv_diag.iter().sum(),
                theta_delta,
            }
        })
        .collect())
}

/// Points rebuilt from the update events of a log.
pub fn uncertainty_from_log(log: &EventLog) -> Result<Vec<UncertaintyPoint>, DiagnosticsError> {
    let snaps: Vec<RidgeSnapshot> = log
        .updates()
        .map(|u| RidgeSnapshot {
            t: u.t,
            a_inv_diag: u.a_inv_diag.clone(),
            theta: u.theta.clone(),
        })
        .collect();
    let mut points = uncertainty_trace(&snaps)?;
    // Logged deltas span single updates, so they are exact even when the log
    // skips snapshots.
    for (p, u) in points.iter_mut().zip(log.updates()) {
        p.theta_delta = u.theta_delta;
    }
    Ok(points)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShrinkageRow {
    pub dim: usize,
    pub name: String,
    pub early: f64,
    pub late: f64,
    /// `(early − late) / early`.
    pub rel_drop: f64,
}

/// Per-dimension relative drop of `diag(A⁻¹)` from the first to the last point.
pub fn shrinkage_report(points: &[UncertaintyPoint]) -> Result<Vec<ShrinkageRow>, DiagnosticsError> {
    let (first, last) = match (points.first(), points.last()) {
        (Some(f), Some(l)) if points.len() >= 2 => (f, l),
        _ => {
            return Err(DiagnosticsError::TooFewSnapshots {
                need: 2,
                got: points.len(),
            })
        }
    };
    let d = first.diag.len();
    Ok((0..d)
        .map(|i| {
            let (early, late) = (first.diag[i], last.diag[i]);
            ShrinkageRow {
                dim: i,
                name: if d == FEATURE_NAMES.len() {
                    FEATURE_NAMES[i].to_string()
                } else {
                    format!("x{i}")
                },
                early,
                late,
                rel_drop: if early > 0.0 { (early - late) / early } else { 0.0 },
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn no_updates_no_drop() {
        let r = RidgeState::new(6, 1.0).unwrap();
        let pts = uncertainty_trace(&[RidgeSnapshot::of(&r), RidgeSnapshot::of(&r)]).unwrap();
        assert!(shrinkage_report(&pts).unwrap().iter().all(|row| row.rel_drop == 0.0));
        assert_eq!(pts[1].theta_delta, 0.0);
    }

    #[test]
    fn varying_dimension_shrinks_most() {
        // Constant bias, varying sim_emb, zero load, constant others.
        let mut r = RidgeState::new(6, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut snaps = vec![RidgeSnapshot::of(&r)];
        for _ in 0..500 {
            let x = [1.0, rng.random::<f64>(), 0.0, 0.3, 0.9, 1.0];
            r.update(&x, rng.random()).unwrap();
            snaps.push(RidgeSnapshot::of(&r));
        }
        let pts = uncertainty_trace(&snaps).unwrap();
        assert!(pts.windows(2).all(|w| w[1].trace <= w[0].trace + 1e-12));
        let rows = shrinkage_report(&pts).unwrap();
        assert_eq!(rows[2].rel_drop, 0.0);
        let best = rows.iter().max_by(|a, b| a.rel_drop.total_cmp(&b.rel_drop)).unwrap();
        assert_eq!(best.name, "sim_emb");
    }

    #[test]
    fn too_few() {
        assert!(uncertainty_trace(&[]).is_err());
        assert!(uncertainty_from_log(&EventLog::new()).is_err());
    }
}

//! Shock recovery metrics over a binary service-level trace.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::events::EventLog;

pub const DEFAULT_WINDOW: usize = 50;
pub const DEFAULT_THRESHOLD: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryMetrics {
    pub pre_rate: f64,
    pub post_rate: f64,
    /// Rolling rate over the window ending just before the shock.
    pub pre_rolling: f64,
    /// Steps after the shock until a fully post-shock window regains the
    /// threshold after the rate first fell below it; `Some(0)` if it never
    /// fell below.
    pub recovery_time: Option<u64>,
    pub worst_window: f64,
}

/// Recovery time as printed in summaries: a step count or `NR`.
pub struct RecoveryTime(pub Option<u64>);

impl fmt::Display for RecoveryTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(t) => write!(f, "{t}"),
            None => f.write_str("NR"),
        }
    }
}

/// `out[i]` is the mean of `xs[i..i + w]`, i.e. the rolling rate at step
/// `i + w - 1`.
pub fn rolling_rate(xs: &[bool], w: usize) -> Vec<f64> {
    if w == 0 || xs.len() < w {
        return Vec::new();
    }
    let mut sum: usize = xs[..w].iter().filter(|x| **x).count();
    let mut out = Vec::with_capacity(xs.len() - w + 1);
    out.push(sum as f64 / w as f64);
    for i in w..xs.len() {
        sum += usize::from(xs[i]);
        sum -= usize::from(xs[i - w]);
        out.push(sum as f64 / w as f64);
    }
    out
}

pub fn recovery_metrics(service_ok: &[bool], t0: u64, w: usize, threshold: f64) -> Result<RecoveryMetrics, SimError> {
    let n = service_ok.len();
    let t0 = t0 as usize;
    if w == 0 || n < w {
        return Err(SimError::TraceTooShort { len: n, window: w });
    }
    if t0 < w || t0 >= n {
        return Err(SimError::ShockOutOfRange { t0: t0 as u64, len: n });
    }
    let rate = |xs: &[bool]| xs.iter().filter(|x| **x).count() as f64 / xs.len() as f64;
    let roll = rolling_rate(service_ok, w);
    // Rolling value at step s lives at roll[s + 1 - w].
    let at = |s: usize| roll[s + 1 - w];
    let pre_rolling = at(t0 - 1);
    let target = threshold * pre_rolling;
    // A recovery only counts on a window lying entirely after the shock, so
    // pre-shock steps cannot carry the rate back over the threshold.
    let clean = t0 + w - 1;
    let recovery_time = match (t0..n).find(|&s| at(s) < target) {
        None => Some(0),
        Some(d) => (clean.max(d + 1)..n)
            .find(|&s| at(s) >= target)
            .map(|s| (s - t0) as u64),
    };
    Ok(RecoveryMetrics {
        pre_rate: rate(&service_ok[..t0]),
        post_rate: rate(&service_ok[t0..]),
        pre_rolling,
        recovery_time,
        worst_window: roll.iter().copied().fold(f64::INFINITY, f64::min),
    })
}

/// Recovery metrics from a replay log's service outcomes and shock event.
pub fn recovery_from_log(log: &EventLog, w: usize, threshold: f64) -> Result<RecoveryMetrics, SimError> {
    let shock = log.shocks().next().ok_or(SimError::NoShock)?;
    let oks: Vec<bool> = log.executions().map(|e| e.service_ok.unwrap_or(false)).collect();
    recovery_metrics(&oks, shock.step, w, threshold)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_success() {
        let xs = vec![true; 400];
        let m = recovery_metrics(&xs, 200, 50, 0.9).unwrap();
        assert_eq!((m.pre_rate, m.post_rate), (1.0, 1.0));
        assert_eq!(m.recovery_time, Some(0));
        assert_eq!(m.worst_window, 1.0);
    }

    #[test]
    fn cliff_without_recovery() {
        let xs: Vec<bool> = (0..400).map(|t| t < 200).collect();
        let m = recovery_metrics(&xs, 200, 50, 0.9).unwrap();
        assert_eq!(m.recovery_time, None);
        assert_eq!(m.worst_window, 0.0);
        assert_eq!(RecoveryTime(m.recovery_time).to_string(), "NR");
    }

    #[test]
    fn dip_then_recovery_is_timed() {
        // Failures on [200, 230), then clean again: the window ending at step s
        // holds max(0, 230 - max(200, s - 49)) failures once s >= 200.
        let xs: Vec<bool> = (0..500).map(|t| !(200..230).contains(&t)).collect();
        let m = recovery_metrics(&xs, 200, 50, 0.9).unwrap();
        // Recovered when failures in window <= 5: s - 49 >= 225, s = 274.
        assert_eq!(m.recovery_time, Some(74));
        assert!((m.worst_window - 20.0 / 50.0).abs() < 1e-15);
    }

    #[test]
    fn early_blip_before_collapse_is_not_recovery() {
        // A short burst right after the shock, then a permanent cliff. The
        // rolling rate climbs back while the window still holds pre-shock steps.
        let xs: Vec<bool> = (0..600).map(|t| !(200..206).contains(&t) && t < 240).collect();
        let m = recovery_metrics(&xs, 200, 50, 0.9).unwrap();
        assert_eq!(m.recovery_time, None);
    }

    #[test]
    fn rolling_matches_naive() {
        let xs: Vec<bool> = (0..97).map(|i| (i * 7 + 3) % 5 < 3).collect();
        let r = rolling_rate(&xs, 10);
        for (i, v) in r.iter().enumerate() {
            let naive = xs[i..i + 10].iter().filter(|x| **x).count() as f64 / 10.0;
            assert_eq!(*v, naive);
        }
    }

    #[test]
    fn errors() {
        assert!(recovery_metrics(&[true; 10], 5, 50, 0.9).is_err());
        assert!(recovery_metrics(&[true; 100], 10, 50, 0.9).is_err());
        assert!(recovery_from_log(&EventLog::new(), 50, 0.9).is_err());
    }
}

//! Sampling simulated calls from a profile.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::profile::{EmpiricalProfile, ErrorKind, OutcomeModel};
use crate::workload::Bin;

/// Standard normal 95th percentile.
pub const Z95: f64 = 1.644_853_626_951_472_2;

/// Degradation applied to a shocked agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShockEffect {
    /// Added to the timeout probability.
    pub error_rate_boost: f64,
    pub latency_multiplier: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedCall {
    pub latency_ms: f64,
    pub error: Option<ErrorKind>,
    pub contract_valid: bool,
    pub cost: f64,
}

/// Log-normal `(μ, σ)` with median `p50` and 95th percentile `p95`.
pub fn lognormal_params(p50: f64, p95: f64) -> (f64, f64) {
    let mu = p50.ln();
    (mu, (p95.ln() - mu) / Z95)
}

/// Error probabilities in sampling order, with a shock folded in: the boost
/// goes to timeouts (capped at 1) and the other kinds shrink proportionally
/// if the total would exceed 1.
pub fn effective_error_rates(model: &OutcomeModel, shock: Option<&ShockEffect>) -> [f64; 5] {
    let mut rates = ErrorKind::ALL.map(|k| model.rate(k).clamp(0.0, 1.0));
    if let Some(s) = shock {
        rates[0] = (rates[0] + s.error_rate_boost).clamp(0.0, 1.0);
        let rest: f64 = rates[1..].iter().sum();
        let room = 1.0 - rates[0];
        if rest > room {
            let scale = if rest > 0.0 { room / rest } else { 0.0 };
            rates[1..].iter_mut().for_each(|r| *r *= scale);
        }
    }
    rates
}

/// Probability of a clean call (no SLA).
pub fn success_probability(model: &OutcomeModel, shock: Option<&ShockEffect>) -> f64 {
    (1.0 - effective_error_rates(model, shock).iter().sum::<f64>()).max(0.0)
}

/// Draw one call: a categorical error over the profile's rates (remaining mass
/// is success) and a log-normal latency. Always consumes two draws.
pub fn sample_outcome<R: Rng + ?Sized>(
    profile: &EmpiricalProfile,
    bin: Option<Bin>,
    shock: Option<&ShockEffect>,
    rng: &mut R,
) -> SimulatedCall {
    let model = profile.model_for(bin);
    let rates = effective_error_rates(model, shock);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut error = None;
    for (kind, r) in ErrorKind::ALL.iter().zip(rates) {
        acc += r;
        if u < acc {
            error = Some(*kind);
            break;
        }
    }
    let (mu, sigma) = lognormal_params(model.latency.p50, model.latency.p95);
    let z: f64 = StandardNormal.sample(rng);
    let mult = shock.map_or(1.0, |s| s.latency_multiplier);
    SimulatedCall {
        latency_ms: (mu + sigma * z).exp() * mult,
        error,
        contract_valid: error.is_none(),
        cost: profile.avg_cost,
    }
}

/// Clean completion, valid contract, and within the SLA when one is set.
pub fn service_ok(call: &SimulatedCall, sla_ms: Option<f64>) -> bool {
    call.error.is_none() && call.contract_valid && sla_ms.is_none_or(|s| call.latency_ms <= s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simenv::profile::{nearest_rank, LatencyQuantiles};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn profile(rates: &[(ErrorKind, f64)], p50: f64, p95: f64) -> EmpiricalProfile {
        EmpiricalProfile {
            agent: "A".into(),
            avg_cost: 0.5,
            n_calls: 0,
            model: OutcomeModel {
                error_rates: rates.iter().copied().collect::<BTreeMap<_, _>>(),
                latency: LatencyQuantiles { p50, p95 },
            },
            strata: BTreeMap::new(),
        }
    }

    #[test]
    fn z95_matches_normal_quantile() {
        use statrs::distribution::{ContinuousCDF, Normal};
        let n = Normal::new(0.0, 1.0).unwrap();
        assert!((n.inverse_cdf(0.95) - Z95).abs() < 1e-9);
    }

    #[test]
    fn degenerate_profile_is_deterministic() {
        let p = profile(&[], 100.0, 100.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let c = sample_outcome(&p, None, None, &mut rng);
            assert_eq!(c.error, None);
            assert!((c.latency_ms - 100.0).abs() < 1e-9);
            assert!(service_ok(&c, None));
        }
    }

    #[test]
    fn certain_timeout() {
        let p = profile(&[(ErrorKind::Timeout, 1.0)], 100.0, 200.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            assert_eq!(sample_outcome(&p, None, None, &mut rng).error, Some(ErrorKind::Timeout));
        }
    }

    #[test]
    fn fitted_lognormal_reproduces_quantiles() {
        let p = profile(&[], 800.0, 2400.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut lat: Vec<f64> = (0..100_000)
            .map(|_| sample_outcome(&p, None, None, &mut rng).latency_ms)
            .collect();
        lat.sort_by(f64::total_cmp);
        let p50 = nearest_rank(&lat, 0.5);
        let p95 = nearest_rank(&lat, 0.95);
        assert!((p50 / 800.0 - 1.0).abs() < 0.03, "p50 {p50}");
        assert!((p95 / 2400.0 - 1.0).abs() < 0.03, "p95 {p95}");
    }

    #[test]
    fn service_ok_cases() {
        let clean = SimulatedCall {
            latency_ms: 900.0,
            error: None,
            contract_valid: true,
            cost: 0.0,
        };
        assert!(service_ok(&clean, None));
        assert!(!service_ok(&clean, Some(500.0)));
        let parse = SimulatedCall {
            error: Some(ErrorKind::ParseError),
            contract_valid: false,
            ..clean.clone()
        };
        assert!(!service_ok(&parse, None));
    }

    #[test]
    fn shock_clips_error_mass() {
        let p = profile(&[(ErrorKind::Timeout, 0.3), (ErrorKind::HttpError, 0.4)], 10.0, 20.0);
        let s = ShockEffect {
            error_rate_boost: 0.8,
            latency_multiplier: 3.0,
        };
        let r = effective_error_rates(&p.model, Some(&s));
        assert_eq!(r[0], 1.0);
        assert_eq!(r[1], 0.0);
        assert_eq!(success_probability(&p.model, Some(&s)), 0.0);
        let mild = profile(&[(ErrorKind::Timeout, 0.02), (ErrorKind::HttpError, 0.03)], 10.0, 20.0);
        let r = effective_error_rates(&mild.model, Some(&s));
        assert!((r.iter().sum::<f64>() - 0.85).abs() < 1e-12);
    }
}

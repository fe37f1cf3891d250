//! Exploration width: a constant or the self-normalized confidence radius.

use serde::{Deserialize, Serialize};

use super::BanditError;

/// Confidence radius
/// `σ·sqrt(2·ln(1/δ) + d·ln(1 + t/λ)) + sqrt(λ)·S`.
pub fn beta_schedule(t: u64, delta: f64, sigma: f64, lambda: f64, s: f64, d: usize) -> Result<f64, BanditError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(BanditError::InvalidDelta(delta));
    }
    if !(sigma >= 0.0 && s >= 0.0 && sigma.is_finite() && s.is_finite()) {
        return Err(BanditError::InvalidBeta);
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(BanditError::NonPositiveLambda(lambda));
    }
    let inner = 2.0 * (1.0 / delta).ln() + d as f64 * (1.0 + t as f64 / lambda).ln();
    Ok(sigma * inner.sqrt() + lambda.sqrt() * s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Beta {
    Constant { value: f64 },
    Schedule { delta: f64, sigma: f64, s: f64 },
}

impl Default for Beta {
    fn default() -> Self {
        Beta::Constant { value: 1.0 }
    }
}

impl Beta {
    pub fn validate(&self) -> Result<(), BanditError> {
        match *self {
            Beta::Constant { value } if value >= 0.0 && value.is_finite() => Ok(()),
            Beta::Constant { .. } => Err(BanditError::InvalidBeta),
            Beta::Schedule { delta, sigma, s } => beta_schedule(0, delta, sigma, 1.0, s, 1).map(|_| ()),
        }
    }

    /// β at update count `t`.
    pub fn at(&self, t: u64, lambda: f64, d: usize) -> f64 {
        match *self {
            Beta::Constant { value } => value,
            Beta::Schedule { delta, sigma, s } => {
                beta_schedule(t, delta, sigma, lambda, s, d).expect("validated at construction")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn closed_form_at_zero() {
        let b = beta_schedule(0, 0.1, 1.0, 1.0, 1.0, 6).unwrap();
        let want = (2.0 * 10f64.ln()).sqrt() + 1.0;
        assert!((b - want).abs() < 1e-15);
        assert!((b - 3.1460).abs() < 5e-5);
    }

    #[test]
    fn degenerate_is_zero() {
        assert_eq!(beta_schedule(100, 0.1, 0.0, 1.0, 0.0, 6).unwrap(), 0.0);
    }

    #[test]
    fn bad_delta() {
        assert!(beta_schedule(0, 0.0, 1.0, 1.0, 1.0, 6).is_err());
        assert!(beta_schedule(0, 1.0, 1.0, 1.0, 1.0, 6).is_err());
        assert!(Beta::Constant { value: -1.0 }.validate().is_err());
    }

    proptest! {
        #[test]
        fn monotone_in_t(t in 0u64..1_000_000, delta in 0.001f64..0.999, sigma in 0.0f64..5.0, lambda in 0.01f64..10.0, s in 0.0f64..5.0, d in 1usize..20) {
            let a = beta_schedule(t, delta, sigma, lambda, s, d).unwrap();
            let b = beta_schedule(t + 1, delta, sigma, lambda, s, d).unwrap();
            prop_assert!(b >= a);
        }
    }
}

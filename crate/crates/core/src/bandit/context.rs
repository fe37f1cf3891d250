//! Selector context features.

use serde::{Deserialize, Serialize};

use super::BanditError;
use crate::types::AgentState;

/// Production context dimension: `[1, sim_emb, load, latency, reputation, available]`.
pub const CONTEXT_DIM: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FeatureScale {
    /// Components clipped to `[0, 1]`, so `‖x‖ ≤ √6`.
    #[default]
    Clipped,
    /// Clipped and then divided by `√6`, so `‖x‖ ≤ 1`.
    UnitBall,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    /// Queue depth that maps to a load feature of 1.
    pub load_cap: f64,
    pub scale: FeatureScale,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            load_cap: 10.0,
            scale: FeatureScale::Clipped,
        }
    }
}

impl FeatureConfig {
    /// Norm bound satisfied by every context built with this config.
    pub fn norm_bound(&self) -> f64 {
        match self.scale {
            FeatureScale::Clipped => (CONTEXT_DIM as f64).sqrt(),
            FeatureScale::UnitBall => 1.0,
        }
    }
}

/// Feature vector scored by the selector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ContextVector(Vec<f64>);

impl ContextVector {
    /// Arbitrary finite vector, used by the synthetic theory environments.
    pub fn new(x: Vec<f64>) -> Result<Self, BanditError> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(BanditError::NonFiniteContext);
        }
        Ok(Self(x))
    }

    /// Production features for one agent at one step.
    pub fn from_features(sim_emb: f64, state: &AgentState, cfg: &FeatureConfig) -> Self {
        let clip = |v: f64| if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
        let load = if cfg.load_cap > 0.0 {
            state.load / cfg.load_cap
        } else {
            0.0
        };
        let mut x = vec![
            1.0,
            clip(sim_emb),
            clip(load),
            clip(state.latency_norm),
            clip(state.reputation),
            state.availability(),
        ];
        if cfg.scale == FeatureScale::UnitBall {
            let s = (CONTEXT_DIM as f64).sqrt();
            x.iter_mut().for_each(|v| *v /= s);
        }
        Self(x)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        crate::linalg::norm2(&self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn feature_order_and_clipping() {
        let s = AgentState {
            load: 25.0,
            latency_norm: 0.3,
            reputation: 0.9,
            available: true,
        };
        let x = ContextVector::from_features(1.7, &s, &FeatureConfig::default());
        assert_eq!(x.as_slice(), &[1.0, 1.0, 1.0, 0.3, 0.9, 1.0]);
    }

    #[test]
    fn non_finite_rejected() {
        assert_eq!(ContextVector::new(vec![f64::NAN]), Err(BanditError::NonFiniteContext));
    }

    proptest! {
        #[test]
        fn norm_within_bound(sim in -2.0f64..2.0, load in 0.0f64..50.0, lat in 0.0f64..1.0, rep in 0.0f64..1.0, av: bool, unit: bool) {
            let cfg = FeatureConfig { load_cap: 10.0, scale: if unit { FeatureScale::UnitBall } else { FeatureScale::Clipped } };
            let s = AgentState { load, latency_norm: lat, reputation: rep, available: av };
            let x = ContextVector::from_features(sim, &s, &cfg);
            prop_assert!(x.norm() <= cfg.norm_bound() + 1e-12);
            prop_assert!(x.as_slice().iter().all(|v| v.is_finite()));
        }
    }
}

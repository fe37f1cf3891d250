//! Synthetic linear contextual bandit with a known parameter path.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::linalg::{dot, norm2};

/// How the true parameter moves over time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum ThetaPath {
    Stationary,
    /// `thetas[i]` is in force from `change_points[i]` on.
    Piecewise {
        change_points: Vec<u64>,
        thetas: Vec<Vec<f64>>,
    },
    /// Straight line from `theta0` at step 0 to `theta_end` at `horizon - 1`.
    LinearDrift {
        theta_end: Vec<f64>,
        horizon: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticLinearEnv {
    pub d: usize,
    /// Candidates offered per step.
    pub k: usize,
    pub sigma: f64,
    pub theta0: Vec<f64>,
    pub path: ThetaPath,
}

/// Uniform direction scaled to norm `s`.
pub fn random_direction<R: Rng + ?Sized>(d: usize, s: f64, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let n = norm2(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x * s / n).collect();
        }
    }
}

impl SyntheticLinearEnv {
    pub fn stationary<R: Rng + ?Sized>(d: usize, k: usize, sigma: f64, s: f64, rng: &mut R) -> Self {
        Self {
            d,
            k,
            sigma,
            theta0: random_direction(d, s, rng),
            path: ThetaPath::Stationary,
        }
    }

    /// Single change point at `at` where the parameter flips sign.
    pub fn flip_at<R: Rng + ?Sized>(d: usize, k: usize, sigma: f64, s: f64, at: u64, rng: &mut R) -> Self {
        let theta0 = random_direction(d, s, rng);
        let flipped = theta0.iter().map(|x| -x).collect();
        Self {
            d,
            k,
            sigma,
            theta0,
            path: ThetaPath::Piecewise {
                change_points: vec![at],
                thetas: vec![flipped],
            },
        }
    }

    /// Linear drift from a random `θ0` to `-θ0` over `horizon` steps.
    pub fn reversing_drift<R: Rng + ?Sized>(d: usize, k: usize, sigma: f64, s: f64, horizon: u64, rng: &mut R) -> Self {
        let theta0 = random_direction(d, s, rng);
        let theta_end = theta0.iter().map(|x| -x).collect();
        Self {
            d,
            k,
            sigma,
            theta0,
            path: ThetaPath::LinearDrift { theta_end, horizon },
        }
    }

    pub fn theta_at(&self, t: u64) -> Vec<f64> {
        match &self.path {
            ThetaPath::Stationary => self.theta0.clone(),
            ThetaPath::Piecewise { change_points, thetas } => change_points
                .iter()
                .zip(thetas)
                .rev()
                .find(|(cp, _)| t >= **cp)
                .map_or_else(|| self.theta0.clone(), |(_, th)| th.clone()),
            ThetaPath::LinearDrift { theta_end, horizon } => {
                let frac = if *horizon <= 1 {
                    1.0
                } else {
                    (t.min(horizon - 1)) as f64 / (horizon - 1) as f64
                };
                self.theta0
                    .iter()
                    .zip(theta_end)
                    .map(|(a, b)| a + frac * (b - a))
                    .collect()
            }
        }
    }

    /// `k` contexts with coordinates uniform on `[-1, 1] / √d`, so `‖x‖ ≤ 1`.
    pub fn contexts<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Vec<f64>> {
        let scale = 1.0 / (self.d as f64).sqrt();
        (0..self.k)
            .map(|_| (0..self.d).map(|_| rng.random_range(-1.0..=1.0) * scale).collect())
            .collect()
    }

    pub fn mean(&self, x: &[f64], theta: &[f64]) -> f64 {
        dot(x, theta)
    }

    pub fn reward<R: Rng + ?Sized>(&self, x: &[f64], theta: &[f64], rng: &mut R) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        dot(x, theta) + self.sigma * z
    }

    /// Noisy reward for context `x` under the parameter in force at step `t`.
    pub fn step<R: Rng + ?Sized>(&self, x: &[f64], t: u64, rng: &mut R) -> f64 {
        self.reward(x, &self.theta_at(t), rng)
    }

    /// `Σ_t ‖θ_{t+1} − θ_t‖` over `horizon` steps.
    pub fn variation_budget(&self, horizon: u64) -> f64 {
        let mut prev = self.theta_at(0);
        let mut total = 0.0;
        for t in 1..horizon {
            let cur = self.theta_at(t);
            let diff: Vec<f64> = cur.iter().zip(&prev).map(|(a, b)| a - b).collect();
            total += norm2(&diff);
            prev = cur;
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn contexts_in_unit_ball() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let env = SyntheticLinearEnv::stationary(6, 10, 0.1, 1.0, &mut rng);
        assert!((norm2(&env.theta0) - 1.0).abs() < 1e-12);
        for _ in 0..100 {
            for x in env.contexts(&mut rng) {
                assert!(norm2(&x) <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn noiseless_step_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let env = SyntheticLinearEnv::stationary(3, 2, 0.0, 1.0, &mut rng);
        let x = [0.3, -0.2, 0.5];
        assert_eq!(env.step(&x, 0, &mut rng), dot(&x, &env.theta0));
    }

    #[test]
    fn zero_context_gives_pure_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let env = SyntheticLinearEnv::stationary(3, 2, 0.5, 1.0, &mut rng);
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        let z: f64 = StandardNormal.sample(&mut b);
        assert_eq!(env.step(&[0.0; 3], 0, &mut a), 0.5 * z);
    }

    #[test]
    fn reward_mean_matches_within_clt_band() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let env = SyntheticLinearEnv::stationary(4, 2, 0.1, 1.0, &mut rng);
        let x = [0.4, 0.1, -0.3, 0.2];
        let n = 100_000;
        let mean = (0..n).map(|_| env.step(&x, 0, &mut rng)).sum::<f64>() / n as f64;
        assert!((mean - dot(&x, &env.theta0)).abs() <= 3.0 * 0.1 / (n as f64).sqrt());
    }

    #[test]
    fn flip_and_drift_paths() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let env = SyntheticLinearEnv::flip_at(4, 5, 0.1, 1.0, 100, &mut rng);
        assert_eq!(env.theta_at(99), env.theta0);
        let neg: Vec<f64> = env.theta0.iter().map(|x| -x).collect();
        assert_eq!(env.theta_at(100), neg);
        assert!((env.variation_budget(200) - 2.0).abs() < 1e-12);

        let env = SyntheticLinearEnv::reversing_drift(4, 5, 0.1, 1.0, 1001, &mut rng);
        let mid = env.theta_at(500);
        assert!(norm2(&mid) < 1e-12);
        assert!((env.variation_budget(1001) - 2.0).abs() < 1e-9);
    }
}

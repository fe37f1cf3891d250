//! Numerical checks of the selector's regret, confidence and mis-selection
//! guarantees on synthetic linear environments.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::synth::{random_direction, SyntheticLinearEnv};
use super::SimError;
use crate::bandit::{beta_schedule, Arm, BanditError, Beta, ContextVector, Policy, PolicyKind, RidgeState};
use crate::types::AgentId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TheoryConfig {
    pub d: usize,
    /// Candidates per step.
    pub k: usize,
    pub sigma: f64,
    pub lambda: f64,
    pub delta: f64,
    /// Bound on `‖θ*‖`.
    pub s: f64,
    pub horizon: u64,
}

impl Default for TheoryConfig {
    fn default() -> Self {
        Self {
            d: 6,
            k: 10,
            sigma: 0.1,
            lambda: 1.0,
            delta: 0.1,
            s: 1.0,
            horizon: 5000,
        }
    }
}

impl TheoryConfig {
    pub fn beta(&self) -> Beta {
        Beta::Schedule {
            delta: self.delta,
            sigma: self.sigma,
            s: self.s,
        }
    }

    pub fn beta_at(&self, t: u64) -> Result<f64, BanditError> {
        beta_schedule(t, self.delta, self.sigma, self.lambda, self.s, self.d)
    }

    /// `2 β_T sqrt(2 T d ln(1 + T/λ))`.
    pub fn regret_bound(&self, t: u64) -> Result<f64, BanditError> {
        let tf = t as f64;
        let d = self.d as f64;
        Ok(2.0 * self.beta_at(t)? * (2.0 * tf * d * (1.0 + tf / self.lambda).ln()).sqrt())
    }
}

/// Per-run outcome of a policy on a synthetic environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditRun {
    /// `cumulative_regret[t]` is the regret summed over steps `0..=t`.
    pub cumulative_regret: Vec<f64>,
    /// Steps where `‖θ̂ − θ*‖_A > β`; only tracked when requested.
    pub ellipsoid_violations: u64,
    /// Steps where the ellipsoid held yet some candidate's UCB fell below
    /// its true mean; only tracked alongside the ellipsoid.
    pub optimism_violations: u64,
}

impl BanditRun {
    pub fn regret_at(&self, t: u64) -> f64 {
        self.cumulative_regret[(t - 1) as usize]
    }

    pub fn total(&self) -> f64 {
        self.cumulative_regret.last().copied().unwrap_or(0.0)
    }
}

fn arm_ids(k: usize) -> Vec<AgentId> {
    (0..k).map(|j| AgentId::new(format!("arm{j:03}"))).collect()
}

/// Self-normalized estimation error `‖θ̂ − θ*‖_A`.
pub fn ellipsoid_norm(ridge: &RidgeState, theta_star: &[f64]) -> f64 {
    let diff: Vec<f64> = ridge.theta().iter().zip(theta_star).map(|(a, b)| a - b).collect();
    ridge.a().quad_form(&diff).max(0.0).sqrt()
}

/// Run `kind` on `env` for `cfg.horizon` steps, measuring dynamic regret
/// against the per-step best candidate.
pub fn run_bandit(
    env: &SyntheticLinearEnv,
    kind: PolicyKind,
    cfg: &TheoryConfig,
    track_ellipsoid: bool,
    seed: u64,
) -> Result<BanditRun, BanditError> {
    let mut policy = Policy::new(kind, env.d, cfg.lambda, cfg.beta())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids = arm_ids(env.k);
    let mut cumulative = Vec::with_capacity(cfg.horizon as usize);
    let mut total = 0.0;
    let mut violations = 0;
    let mut optimism_violations = 0;
    for t in 0..cfg.horizon {
        let theta = env.theta_at(t);
        let xs = env.contexts(&mut rng);
        if track_ellipsoid {
            let ridge = policy.ridge();
            let beta = cfg.beta_at(ridge.t())?;
            if ellipsoid_norm(ridge, &theta) > beta {
                violations += 1;
            } else {
                for x in &xs {
                    if ridge.ucb(x, beta)? < env.mean(x, &theta) - 1e-12 {
                        optimism_violations += 1;
                        break;
                    }
                }
            }
        }
        let arms = xs
            .iter()
            .zip(&ids)
            .map(|(x, id)| {
                Ok(Arm {
                    id: id.clone(),
                    x: ContextVector::new(x.clone())?,
                    stage1: 0.0,
                })
            })
            .collect::<Result<Vec<_>, BanditError>>()?;
        let sel = policy.select(&arms, 0, &mut rng)?;
        let mus: Vec<f64> = xs.iter().map(|x| env.mean(x, &theta)).collect();
        let best = mus.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        total += best - mus[sel.index];
        cumulative.push(total);
        let r = env.reward(&xs[sel.index], &theta, &mut rng);
        policy.update(&arms[sel.index].x, r)?;
    }
    Ok(BanditRun {
        cumulative_regret: cumulative,
        ellipsoid_violations: violations,
        optimism_violations,
    })
}

fn env_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ 0x005e_ed0f_e4f1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretSuite {
    pub early: u64,
    pub horizon: u64,
    pub bound: f64,
    /// Per seed `Reg(early)` and `Reg(horizon)`.
    pub reg_early: Vec<f64>,
    pub reg_final: Vec<f64>,
}

impl RegretSuite {
    pub fn seeds_within_bound(&self) -> usize {
        self.reg_final.iter().filter(|r| **r <= self.bound).count()
    }

    pub fn mean_rate_early(&self) -> f64 {
        mean(&self.reg_early) / self.early as f64
    }

    pub fn mean_rate_final(&self) -> f64 {
        mean(&self.reg_final) / self.horizon as f64
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Stationary LinUCB regret over `seeds`, recorded at `early` and the horizon.
pub fn regret_suite(cfg: &TheoryConfig, early: u64, seeds: &[u64]) -> Result<RegretSuite, BanditError> {
    let runs = seeds
        .par_iter()
        .map(|&seed| {
            let env = SyntheticLinearEnv::stationary(cfg.d, cfg.k, cfg.sigma, cfg.s, &mut env_rng(seed));
            run_bandit(&env, PolicyKind::LinUcb, cfg, false, seed)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RegretSuite {
        early,
        horizon: cfg.horizon,
        bound: cfg.regret_bound(cfg.horizon)?,
        reg_early: runs.iter().map(|r| r.regret_at(early)).collect(),
        reg_final: runs.iter().map(|r| r.total()).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipsoidSuite {
    pub seeds: usize,
    pub covered: usize,
    /// Steps, summed over seeds, where optimism failed inside the ellipsoid.
    pub optimism_violations: u64,
}

impl EllipsoidSuite {
    pub fn coverage(&self) -> f64 {
        self.covered as f64 / self.seeds as f64
    }
}

/// Fraction of seeds where the true parameter stays inside the confidence
/// ellipsoid at every step.
pub fn ellipsoid_suite(cfg: &TheoryConfig, seeds: &[u64]) -> Result<EllipsoidSuite, BanditError> {
    let runs = seeds
        .par_iter()
        .map(|&seed| {
            let env = SyntheticLinearEnv::stationary(cfg.d, cfg.k, cfg.sigma, cfg.s, &mut env_rng(seed));
            run_bandit(&env, PolicyKind::LinUcb, cfg, true, seed)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EllipsoidSuite {
        seeds: seeds.len(),
        covered: runs.iter().filter(|r| r.ellipsoid_violations == 0).count(),
        optimism_violations: runs.iter().map(|r| r.optimism_violations).sum(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSuite {
    pub streams: usize,
    pub bound: f64,
    pub max_sum: f64,
    pub violations: usize,
}

/// Stream shapes for the potential check, cycled by stream index.
fn potential_context<R: Rng + ?Sized>(kind: usize, d: usize, fixed: &[f64], rng: &mut R) -> Vec<f64> {
    match kind % 4 {
        // Uniform on the unit sphere.
        0 => random_direction(d, 1.0, rng),
        // Uniform in the unit ball.
        1 => {
            let r: f64 = rng.random::<f64>().powf(1.0 / d as f64);
            random_direction(d, r, rng)
        }
        // One repeated direction.
        2 => fixed.to_vec(),
        // A two-dimensional subspace.
        _ => {
            let mut x = vec![0.0; d];
            let v = random_direction(2, 1.0, rng);
            x[0] = v[0];
            x[1] = v[1];
            x
        }
    }
}

/// `Σ_t min(1, ‖x_t‖²_{A_{t−1}⁻¹})` against `2 d ln(1 + T/λ)` on random streams.
pub fn potential_suite(
    streams: usize,
    horizon: u64,
    d: usize,
    lambda: f64,
    seed: u64,
    tol: f64,
) -> Result<PotentialSuite, BanditError> {
    let bound = 2.0 * d as f64 * (1.0 + horizon as f64 / lambda).ln();
    let sums = (0..streams)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let fixed = random_direction(d, 1.0, &mut rng);
            let mut ridge = RidgeState::new(d, lambda)?;
            let mut sum = 0.0;
            for _ in 0..horizon {
                let x = potential_context(i, d, &fixed, &mut rng);
                let w = ridge.width(&x)?;
                sum += (w * w).min(1.0);
                ridge.update(&x, 0.0)?;
            }
            Ok(sum)
        })
        .collect::<Result<Vec<f64>, BanditError>>()?;
    Ok(PotentialSuite {
        streams,
        bound,
        max_sum: sums.iter().copied().fold(0.0, f64::max),
        violations: sums.iter().filter(|s| **s > bound + tol).count(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MisselectCell {
    pub k: usize,
    pub gap_over_sigma: f64,
    pub trials: u64,
    pub empirical: f64,
    pub bound: f64,
    pub std_error: f64,
}

impl MisselectCell {
    pub fn within_bound(&self, n_se: f64) -> bool {
        self.empirical <= self.bound + n_se * self.std_error
    }
}

/// `Σ_{j≠j*} exp(−Δ_j² / 4σ²)` for utilities `u` with a unique best arm.
pub fn misselect_bound(u: &[f64], sigma: f64) -> f64 {
    let best = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut skipped = false;
    u.iter()
        .filter(|v| {
            if **v == best && !skipped {
                skipped = true;
                false
            } else {
                true
            }
        })
        .map(|v| (-(best - v).powi(2) / (4.0 * sigma * sigma)).exp())
        .sum()
}

/// Empirical mis-selection rate against its exponential bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MisselectOutcome {
    pub trials: u64,
    pub empirical: f64,
    pub bound: f64,
    pub std_error: f64,
}

/// Probability that the argmax of `u_j + σ ξ_j` is not the best arm, by
/// Monte Carlo, together with the bound.
pub fn misselect_experiment<R: Rng + ?Sized>(
    u: &[f64],
    sigma: f64,
    trials: u64,
    rng: &mut R,
) -> Result<MisselectOutcome, SimError> {
    if u.is_empty() || u.iter().any(|v| !v.is_finite()) || sigma.is_nan() || sigma <= 0.0 || trials == 0 {
        return Err(SimError::InvalidUtilities);
    }
    let best = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut tops = u.iter().enumerate().filter(|(_, v)| **v == best);
    let star = tops.next().map(|(j, _)| j).unwrap_or(0);
    if tops.next().is_some() {
        return Err(SimError::TiedMaximum);
    }
    let mut wrong = 0u64;
    for _ in 0..trials {
        let mut best_j = 0;
        let mut best_s = f64::NEG_INFINITY;
        for (j, uj) in u.iter().enumerate() {
            let z: f64 = StandardNormal.sample(rng);
            let s = uj + sigma * z;
            if s > best_s {
                best_s = s;
                best_j = j;
            }
        }
        if best_j != star {
            wrong += 1;
        }
    }
    let p = wrong as f64 / trials as f64;
    Ok(MisselectOutcome {
        trials,
        empirical: p,
        bound: misselect_bound(u, sigma),
        std_error: (p * (1.0 - p) / trials as f64).sqrt(),
    })
}

/// One grid cell: arm 0 carries utility `Δ = gap_over_sigma · σ`, the rest 0.
pub fn misselect_cell(k: usize, gap_over_sigma: f64, sigma: f64, trials: u64, seed: u64) -> MisselectCell {
    let mut u = vec![0.0; k];
    u[0] = gap_over_sigma * sigma;
    let out = misselect_experiment(&u, sigma, trials, &mut ChaCha8Rng::seed_from_u64(seed))
        .expect("grid cells have a unique positive gap");
    MisselectCell {
        k,
        gap_over_sigma,
        trials,
        empirical: out.empirical,
        bound: out.bound,
        std_error: out.std_error,
    }
}

pub const MISSELECT_KS: [usize; 3] = [2, 5, 10];
pub const MISSELECT_GAPS: [f64; 4] = [0.5, 1.0, 2.0, 4.0];

pub fn misselect_grid(sigma: f64, trials: u64, seed: u64) -> Vec<MisselectCell> {
    let cells: Vec<(usize, f64)> = MISSELECT_KS
        .iter()
        .flat_map(|&k| MISSELECT_GAPS.iter().map(move |&g| (k, g)))
        .collect();
    cells
        .par_iter()
        .enumerate()
        .map(|(i, &(k, g))| misselect_cell(k, g, sigma, trials, seed.wrapping_add(i as u64)))
        .collect()
}

/// Mean total regret of a baseline and an adaptive variant over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSuite {
    pub baseline: String,
    pub adaptive: String,
    pub baseline_regret: Vec<f64>,
    pub adaptive_regret: Vec<f64>,
}

impl ComparisonSuite {
    pub fn baseline_mean(&self) -> f64 {
        mean(&self.baseline_regret)
    }

    pub fn adaptive_mean(&self) -> f64 {
        mean(&self.adaptive_regret)
    }
}

fn compare<F>(
    cfg: &TheoryConfig,
    seeds: &[u64],
    make_env: F,
    adaptive: PolicyKind,
) -> Result<ComparisonSuite, BanditError>
where
    F: Fn(&mut ChaCha8Rng) -> SyntheticLinearEnv + Sync,
{
    let pairs = seeds
        .par_iter()
        .map(|&seed| {
            let env = make_env(&mut env_rng(seed));
            let base = run_bandit(&env, PolicyKind::LinUcb, cfg, false, seed)?.total();
            let adapt = run_bandit(&env, adaptive.clone(), cfg, false, seed)?.total();
            Ok((base, adapt))
        })
        .collect::<Result<Vec<_>, BanditError>>()?;
    Ok(ComparisonSuite {
        baseline: PolicyKind::LinUcb.name().into(),
        adaptive: adaptive.name().into(),
        baseline_regret: pairs.iter().map(|p| p.0).collect(),
        adaptive_regret: pairs.iter().map(|p| p.1).collect(),
    })
}

/// Parameter flips sign at `T/2`; the adaptive policy resets there.
pub fn changepoint_suite(cfg: &TheoryConfig, seeds: &[u64]) -> Result<ComparisonSuite, BanditError> {
    let at = cfg.horizon / 2;
    compare(
        cfg,
        seeds,
        |rng| SyntheticLinearEnv::flip_at(cfg.d, cfg.k, cfg.sigma, cfg.s, at, rng),
        PolicyKind::ResetLinUcb {
            change_points: vec![at],
        },
    )
}

/// `W = (T / V_T)^{2/3}`, rounded up and at least `d`.
pub fn drift_window(horizon: u64, variation: f64, d: usize) -> usize {
    ((horizon as f64 / variation).powf(2.0 / 3.0).ceil() as usize).max(d)
}

/// Linear drift from `θ0` to `−θ0` (`V_T = 2‖θ0‖`); the adaptive policy uses
/// a sliding window sized by [`drift_window`].
pub fn drift_suite(cfg: &TheoryConfig, seeds: &[u64]) -> Result<(ComparisonSuite, usize), BanditError> {
    let window = drift_window(cfg.horizon, 2.0 * cfg.s, cfg.d);
    let suite = compare(
        cfg,
        seeds,
        |rng| SyntheticLinearEnv::reversing_drift(cfg.d, cfg.k, cfg.sigma, cfg.s, cfg.horizon, rng),
        PolicyKind::SlidingWindow { window },
    )?;
    Ok((suite, window))
}

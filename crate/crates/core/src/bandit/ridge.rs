//! Ridge-regression sufficient statistics with a Sherman–Morrison inverse.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::BanditError;
use crate::linalg::{dot, Matrix};

/// Residual `‖A⁻¹A − I‖_F` above which the inverse is recomputed directly.
pub const INVERSE_TOLERANCE: f64 = 1e-9;
const DEFAULT_VERIFY_EVERY: u64 = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeState {
    d: usize,
    lambda: f64,
    a: Matrix,
    a_inv: Matrix,
    b: Vec<f64>,
    theta: Vec<f64>,
    t: u64,
    /// Updates between inverse checks; 0 disables checking.
    verify_every: u64,
    refreshes: u64,
}

/// Summary of one applied update.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateInfo {
    pub t: u64,
    pub theta_delta: f64,
}

impl RidgeState {
    pub fn new(d: usize, lambda: f64) -> Result<Self, BanditError> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(BanditError::NonPositiveLambda(lambda));
        }
        if d == 0 {
            return Err(BanditError::DimensionMismatch { expected: 1, got: 0 });
        }
        Ok(Self {
            d,
            lambda,
            a: Matrix::scaled_identity(d, lambda),
            a_inv: Matrix::scaled_identity(d, 1.0 / lambda),
            b: vec![0.0; d],
            theta: vec![0.0; d],
            t: 0,
            verify_every: DEFAULT_VERIFY_EVERY,
            refreshes: 0,
        })
    }

    pub fn with_verify_every(mut self, every: u64) -> Self {
        self.verify_every = every;
        self
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn a_inv(&self) -> &Matrix {
        &self.a_inv
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Number of times the incremental inverse was replaced by a direct one.
    pub fn refreshes(&self) -> u64 {
        self.refreshes
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), BanditError> {
        if x.len() != self.d {
            return Err(BanditError::DimensionMismatch {
                expected: self.d,
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64, BanditError> {
        self.check_dim(x)?;
        Ok(dot(x, &self.theta))
    }

    /// `sqrt(xᵀ A⁻¹ x)`.
    pub fn width(&self, x: &[f64]) -> Result<f64, BanditError> {
        self.check_dim(x)?;
        Ok(self.a_inv.quad_form(x).max(0.0).sqrt())
    }

    /// `xᵀθ̂ + β·sqrt(xᵀA⁻¹x)`.
    pub fn ucb(&self, x: &[f64], beta: f64) -> Result<f64, BanditError> {
        if beta.is_nan() || beta < 0.0 {
            return Err(BanditError::InvalidBeta);
        }
        Ok(self.predict(x)? + beta * self.width(x)?)
    }

    /// `A ← A + xxᵀ`, `b ← b + r·x`, rank-1 inverse update, `θ̂ ← A⁻¹b`.
    pub fn update(&mut self, x: &[f64], r: f64) -> Result<UpdateInfo, BanditError> {
        self.check_dim(x)?;
        if !r.is_finite() {
            return Err(BanditError::NonFiniteReward(r));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(BanditError::NonFiniteContext);
        }
        self.a.add_outer(1.0, x, x);
        for (bi, xi) in self.b.iter_mut().zip(x) {
            *bi += r * xi;
        }
        let u = self.a_inv.mul_vec(x);
        let denom = 1.0 + dot(x, &u);
        self.a_inv.add_outer(-1.0 / denom, &u, &u);
        self.t += 1;
        if self.verify_every > 0 && self.t.is_multiple_of(self.verify_every) {
            self.verify_and_refresh()?;
        }
        Ok(self.recompute_theta())
    }

    fn recompute_theta(&mut self) -> UpdateInfo {
        let new_theta = self.a_inv.mul_vec(&self.b);
        let delta = new_theta
            .iter()
            .zip(&self.theta)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        self.theta = new_theta;
        UpdateInfo {
            t: self.t,
            theta_delta: delta,
        }
    }

    /// `‖A⁻¹A − I‖_F`.
    pub fn inverse_residual(&self) -> f64 {
        self.a_inv
            .matmul(&self.a)
            .frobenius_distance(&Matrix::scaled_identity(self.d, 1.0))
    }

    /// Recompute `A⁻¹` directly when the incremental one has drifted.
    /// Returns whether a refresh happened.
    pub fn verify_and_refresh(&mut self) -> Result<bool, BanditError> {
        if self.inverse_residual() <= INVERSE_TOLERANCE {
            return Ok(false);
        }
        tracing::debug!(t = self.t, "refreshing ridge inverse");
        self.a_inv = self.a.spd_inverse().ok_or(BanditError::Singular)?;
        self.refreshes += 1;
        self.recompute_theta();
        Ok(true)
    }

    /// Reset to `A = λI`, `b = 0`.
    pub fn reset(&mut self) {
        *self = Self {
            verify_every: self.verify_every,
            refreshes: self.refreshes,
            ..Self::new(self.d, self.lambda).expect("parameters already validated")
        };
    }

    /// Rebuild from scratch over a sample buffer: `A = λI + Σ xxᵀ`,
    /// `b = Σ r·x`, `t = |samples|`, inverse by Cholesky.
    pub fn rebuild<'a, I>(&mut self, samples: I) -> Result<UpdateInfo, BanditError>
    where
        I: IntoIterator<Item = (&'a [f64], f64)>,
    {
        let mut a = Matrix::scaled_identity(self.d, self.lambda);
        let mut b = vec![0.0; self.d];
        let mut n = 0;
        for (x, r) in samples {
            self.check_dim(x)?;
            a.add_outer(1.0, x, x);
            for (bi, xi) in b.iter_mut().zip(x) {
                *bi += r * xi;
            }
            n += 1;
        }
        self.a_inv = a.spd_inverse().ok_or(BanditError::Singular)?;
        self.a = a;
        self.b = b;
        self.t = n;
        Ok(self.recompute_theta())
    }

    /// Plain-text snapshot: a header line, then labelled blocks of decimal rows.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "ridge d={} lambda={} t={}", self.d, self.lambda, self.t);
        let row = |out: &mut String, r: &[f64]| {
            let cells: Vec<String> = r.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(out, "{}", cells.join(" "));
        };
        out.push_str("A\n");
        self.a.rows().for_each(|r| row(&mut out, r));
        out.push_str("A_inv\n");
        self.a_inv.rows().for_each(|r| row(&mut out, r));
        out.push_str("b\n");
        row(&mut out, &self.b);
        out.push_str("theta\n");
        row(&mut out, &self.theta);
        out
    }

    pub fn from_text(text: &str) -> Result<Self, BanditError> {
        let err = |line: usize, msg: &str| BanditError::StateParse {
            line,
            msg: msg.to_string(),
        };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let (ln, header) = lines.next().ok_or_else(|| err(1, "empty snapshot"))?;
        let mut fields = header.split_whitespace();
        if fields.next() != Some("ridge") {
            return Err(err(ln, "expected `ridge` header"));
        }
        let mut d = None;
        let mut lambda = None;
        let mut t = None;
        for f in fields {
            let (k, v) = f.split_once('=').ok_or_else(|| err(ln, "malformed header field"))?;
            match k {
                "d" => d = v.parse::<usize>().ok(),
                "lambda" => lambda = v.parse::<f64>().ok(),
                "t" => t = v.parse::<u64>().ok(),
                _ => return Err(err(ln, "unknown header field")),
            }
        }
        let (d, lambda, t) = match (d, lambda, t) {
            (Some(d), Some(l), Some(t)) => (d, l, t),
            _ => return Err(err(ln, "header needs d, lambda and t")),
        };
        let mut state = Self::new(d, lambda)?;
        state.t = t;
        let rest: Vec<(usize, &str)> = lines.collect();
        let mut idx = 0;
        let mut take_block = |label: &str, nrows: usize| -> Result<Vec<Vec<f64>>, BanditError> {
            match rest.get(idx) {
                Some((_, l)) if *l == label => idx += 1,
                Some((ln, _)) => return Err(err(*ln, &format!("expected `{label}`"))),
                None => return Err(err(0, "truncated snapshot")),
            }
            let mut rows = Vec::with_capacity(nrows);
            for _ in 0..nrows {
                let (ln, l) = rest.get(idx).ok_or_else(|| err(0, "truncated snapshot"))?;
                idx += 1;
                let row: Result<Vec<f64>, _> = l.split_whitespace().map(str::parse::<f64>).collect();
                let row = row.map_err(|_| err(*ln, "bad number"))?;
                if row.len() != d {
                    return Err(err(*ln, "wrong row length"));
                }
                rows.push(row);
            }
            Ok(rows)
        };
        state.a = Matrix::from_rows(&take_block("A", d)?).expect("square by construction");
        state.a_inv = Matrix::from_rows(&take_block("A_inv", d)?).expect("square by construction");
        state.b = take_block("b", 1)?.remove(0);
        state.theta = take_block("theta", 1)?.remove(0);
        Ok(state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn e(d: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        v
    }

    #[test]
    fn init_examples() {
        let s = RidgeState::new(6, 1.0).unwrap();
        assert_eq!(s.a(), &Matrix::scaled_identity(6, 1.0));
        assert_eq!(s.theta(), &[0.0; 6]);
        assert_eq!(s.t(), 0);
        let s = RidgeState::new(2, 0.5).unwrap();
        assert_eq!(s.a_inv(), &Matrix::scaled_identity(2, 2.0));
        assert!(RidgeState::new(3, 0.0).is_err());
        assert!(RidgeState::new(3, -1.0).is_err());
    }

    #[test]
    fn ucb_examples() {
        let mut s = RidgeState::new(6, 1.0).unwrap();
        assert_eq!(s.ucb(&e(6, 0), 1.0).unwrap(), 1.0);
        assert_eq!(s.ucb(&e(6, 0), 0.0).unwrap(), 0.0);
        s.update(&e(6, 0), 1.0).unwrap();
        // A = diag(2,1,..), b = e1, θ = 0.5 e1, width = sqrt(1/2).
        assert_abs_diff_eq!(s.ucb(&e(6, 0), 1.0).unwrap(), 0.5 + 0.5f64.sqrt(), epsilon = 1e-15);
        assert_eq!(s.ucb(&e(6, 0), 0.0).unwrap(), s.predict(&e(6, 0)).unwrap());
        assert!(s.ucb(&[1.0], 1.0).is_err());
    }

    #[test]
    fn update_examples() {
        let mut s = RidgeState::new(3, 1.0).unwrap();
        let before = s.clone();
        s.update(&[0.0; 3], 0.0).unwrap();
        assert_eq!(s.t(), 1);
        assert_eq!(s.a(), before.a());
        assert_eq!(s.theta(), before.theta());
        let mut s = RidgeState::new(1, 1.0).unwrap();
        s.update(&[1.0], 1.0).unwrap();
        assert_eq!(s.a().get(0, 0), 2.0);
        assert_eq!(s.theta()[0], 0.5);
        assert!(s.update(&[1.0], f64::NAN).is_err());
        assert!(s.update(&[1.0], f64::INFINITY).is_err());
    }

    #[test]
    fn incremental_inverse_matches_direct_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = 6;
        let mut s = RidgeState::new(d, 1.0).unwrap().with_verify_every(0);
        let mut oracle_a = DMatrix::<f64>::identity(d, d);
        let mut oracle_b = DVector::<f64>::zeros(d);
        for _ in 0..100 {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            let r: f64 = rng.random_range(-1.0..2.0);
            s.update(&x, r).unwrap();
            let xv = DVector::from_column_slice(&x);
            oracle_a += &xv * xv.transpose();
            oracle_b += r * xv;
        }
        let inv = oracle_a.clone().try_inverse().unwrap();
        let theta = &inv * &oracle_b;
        let mut diff = 0.0;
        for i in 0..d {
            for j in 0..d {
                diff += (s.a_inv().get(i, j) - inv[(i, j)]).powi(2);
            }
        }
        assert!(diff.sqrt() < 1e-9);
        for i in 0..d {
            assert!((s.theta()[i] - theta[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn rebuild_equals_incremental() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let samples: Vec<(Vec<f64>, f64)> = (0..40)
            .map(|_| ((0..4).map(|_| rng.random::<f64>()).collect(), rng.random::<f64>()))
            .collect();
        let mut inc = RidgeState::new(4, 1.0).unwrap();
        for (x, r) in &samples {
            inc.update(x, *r).unwrap();
        }
        let mut reb = RidgeState::new(4, 1.0).unwrap();
        reb.rebuild(samples.iter().map(|(x, r)| (x.as_slice(), *r))).unwrap();
        assert_eq!(reb.t(), 40);
        assert!(reb.a_inv().frobenius_distance(inc.a_inv()) < 1e-10);
        for (a, b) in reb.theta().iter().zip(inc.theta()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn text_roundtrip_is_exact() {
        let mut s = RidgeState::new(3, 0.7).unwrap();
        s.update(&[0.1, 0.2, 1.0 / 3.0], 0.9).unwrap();
        s.update(&[1.0, 0.0, 0.5], -0.25).unwrap();
        let text = s.to_text();
        assert!(text.starts_with("ridge d=3 lambda=0.7 t=2\nA\n"));
        let back = RidgeState::from_text(&text).unwrap();
        assert_eq!(back.a(), s.a());
        assert_eq!(back.a_inv(), s.a_inv());
        assert_eq!(back.theta(), s.theta());
        assert_eq!(back.to_text(), text);
        match RidgeState::from_text("ridge d=3 lambda=0.7 t=2\nA\n1 2\n") {
            Err(BanditError::StateParse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn reset_restores_prior() {
        let mut s = RidgeState::new(2, 2.0).unwrap();
        s.update(&[1.0, 1.0], 1.0).unwrap();
        s.reset();
        assert_eq!(s, RidgeState::new(2, 2.0).unwrap());
    }
}

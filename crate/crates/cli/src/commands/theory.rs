//! `theory`: synthetic checks of the selector's regret, confidence and
//! misselection guarantees.

use anyhow::Result;
use serde::Serialize;
use serde_json::json;

use beacon_core::simenv::theory::{
    changepoint_suite, drift_suite, ellipsoid_suite, mean, misselect_grid, potential_suite, regret_suite,
    ComparisonSuite,
};

use super::fmt;
use crate::config::{ExperimentConfig, Suite};
use crate::output::Outputs;

#[derive(Serialize)]
struct RegretRow {
    seed: u64,
    reg_early: String,
    reg_final: String,
    bound: String,
    within_bound: bool,
}

#[derive(Serialize)]
struct ComparisonRow {
    seed: u64,
    baseline: String,
    adaptive: String,
}

#[derive(Serialize)]
struct MisselectRow {
    k: usize,
    gap_over_sigma: String,
    trials: u64,
    empirical: String,
    bound: String,
    std_error: String,
    within_bound: bool,
}

fn comparison_rows(seeds: &[u64], s: &ComparisonSuite) -> Vec<ComparisonRow> {
    seeds
        .iter()
        .zip(s.baseline_regret.iter().zip(&s.adaptive_regret))
        .map(|(&seed, (b, a))| ComparisonRow {
            seed,
            baseline: fmt(*b),
            adaptive: fmt(*a),
        })
        .collect()
}

pub fn run(cfg: &ExperimentConfig, out: &mut Outputs) -> Result<()> {
    let t = &cfg.theory;
    let p = &t.params;
    let seeds: Vec<u64> = (cfg.seed..cfg.seed + t.n_seeds).collect();
    let mut suites = t.suites.clone();
    suites.sort_by_key(|s| *s as u8);
    suites.dedup();

    let mut records = Vec::new();
    for suite in suites {
        match suite {
            Suite::Regret => {
                let s = regret_suite(p, t.early, &seeds)?;
                let rows: Vec<RegretRow> = seeds
                    .iter()
                    .zip(s.reg_early.iter().zip(&s.reg_final))
                    .map(|(&seed, (e, f))| RegretRow {
                        seed,
                        reg_early: fmt(*e),
                        reg_final: fmt(*f),
                        bound: fmt(s.bound),
                        within_bound: *f <= s.bound,
                    })
                    .collect();
                out.csv("regret.csv", &rows)?;
                records.push(json!({
                    "suite": "regret",
                    "seeds": seeds.len(),
                    "within_bound": s.seeds_within_bound(),
                    "bound": s.bound,
                    "rate_early": s.mean_rate_early(),
                    "rate_final": s.mean_rate_final(),
                }));
            }
            Suite::Ellipsoid => {
                let s = ellipsoid_suite(p, &seeds)?;
                records.push(json!({
                    "suite": "ellipsoid",
                    "seeds": s.seeds,
                    "covered": s.covered,
                    "coverage": s.coverage(),
                    "optimism_violations": s.optimism_violations,
                }));
                out.csv("ellipsoid.csv", &[s])?;
            }
            Suite::Potential => {
                let s = potential_suite(t.streams, p.horizon, p.d, p.lambda, cfg.seed, t.tolerance)?;
                records.push(json!({
                    "suite": "potential",
                    "streams": s.streams,
                    "bound": s.bound,
                    "max_sum": s.max_sum,
                    "violations": s.violations,
                }));
                out.csv("potential.csv", &[s])?;
            }
            Suite::Misselect => {
                let cells = misselect_grid(p.sigma, t.trials, cfg.seed);
                let rows: Vec<MisselectRow> = cells
                    .iter()
                    .map(|c| MisselectRow {
                        k: c.k,
                        gap_over_sigma: fmt(c.gap_over_sigma),
                        trials: c.trials,
                        empirical: fmt(c.empirical),
                        bound: fmt(c.bound),
                        std_error: fmt(c.std_error),
                        within_bound: c.empirical <= c.bound + 3.0 * c.std_error,
                    })
                    .collect();
                records.push(json!({
                    "suite": "misselect",
                    "cells": rows.len(),
                    "within_bound": rows.iter().filter(|r| r.within_bound).count(),
                }));
                out.csv("misselect.csv", &rows)?;
            }
            Suite::Changepoint => {
                let s = changepoint_suite(p, &seeds)?;
                out.csv("changepoint.csv", &comparison_rows(&seeds, &s))?;
                records.push(json!({
                    "suite": "changepoint",
                    "baseline": s.baseline,
                    "adaptive": s.adaptive,
                    "baseline_mean": mean(&s.baseline_regret),
                    "adaptive_mean": mean(&s.adaptive_regret),
                }));
            }
            Suite::Drift => {
                let (s, window) = drift_suite(p, &seeds)?;
                out.csv("drift.csv", &comparison_rows(&seeds, &s))?;
                records.push(json!({
                    "suite": "drift",
                    "window": window,
                    "baseline": s.baseline,
                    "adaptive": s.adaptive,
                    "baseline_mean": mean(&s.baseline_regret),
                    "adaptive_mean": mean(&s.adaptive_regret),
                }));
            }
        }
    }
    out.jsonl("theory.jsonl", &records)?;
    Ok(())
}

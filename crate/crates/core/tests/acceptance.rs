//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

use beacon_core::bandit::{PolicyKind, RidgeState};
use beacon_core::diagnostics::{radar_from_log, shrinkage_report, uncertainty_trace, RadarConfig, RidgeSnapshot};
use beacon_core::events::{Event, EventLog, Level, SelectionEvent, VoteEvent};
use beacon_core::orchestrator::{majority_vote, weighted_vote};
use beacon_core::simenv::theory::{
    changepoint_suite, drift_suite, ellipsoid_suite, misselect_grid, potential_suite, regret_suite, TheoryConfig,
};
use beacon_core::simenv::{
    recovery_from_log, run_replay, shipped_pool, shipped_profiles, ReplayConfig, DEFAULT_THRESHOLD, DEFAULT_WINDOW,
};
use beacon_core::types::{AgentId, RunResult};
use beacon_core::workload::{
    build_phases, normalize_and_bin, score_all, synthetic_prompt_stream, synthetic_records, Bin, Dataset, Normalizers,
    TaskRecord, DEFAULT_RATIOS,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn seeds(n: u64) -> Vec<u64> {
    (0..n).collect()
}

fn regret_sublinearity() -> Outcome {
    let cfg = TheoryConfig::default();
    let start = Instant::now();
    let s = regret_suite(&cfg, 250, &seeds(100)).expect("regret suite");
    let elapsed = start.elapsed();
    let within = s.seeds_within_bound();
    let ratio = s.mean_rate_final() / s.mean_rate_early();
    outcome(
        within >= 90 && ratio < 0.25 && elapsed < Duration::from_secs(60),
        format!(
            "{within}/100 seeds within bound {:.1}; rate ratio {ratio:.4} < 0.25; {:.1}s",
            s.bound,
            elapsed.as_secs_f64()
        ),
    )
}

fn ellipsoid_coverage() -> Outcome {
    let cfg = TheoryConfig {
        horizon: 2000,
        ..TheoryConfig::default()
    };
    let start = Instant::now();
    let s = ellipsoid_suite(&cfg, &seeds(500)).expect("ellipsoid suite");
    let elapsed = start.elapsed();
    outcome(
        s.coverage() >= 0.90 && s.optimism_violations == 0 && elapsed < Duration::from_secs(120),
        format!(
            "coverage {:.3} >= 0.90; optimism violations {}; {:.1}s",
            s.coverage(),
            s.optimism_violations,
            elapsed.as_secs_f64()
        ),
    )
}

fn elliptical_potential() -> Outcome {
    let s = potential_suite(1000, 1000, 6, 1.0, 3, 1e-9).expect("potential suite");
    outcome(
        s.violations == 0,
        format!(
            "{} violations over {} streams; max sum {:.4} vs bound {:.4}",
            s.violations, s.streams, s.max_sum, s.bound
        ),
    )
}

fn misselection_bound() -> Outcome {
    let cells = misselect_grid(0.1, 100_000, 17);
    let bad: Vec<String> = cells
        .iter()
        .filter(|c| !c.within_bound(3.0))
        .map(|c| format!("K={} gap={}", c.k, c.gap_over_sigma))
        .collect();
    let closed = Normal::new(0.0, 1.0).unwrap().cdf(-2.0 / 2f64.sqrt());
    let two = cells
        .iter()
        .find(|c| c.k == 2 && c.gap_over_sigma == 2.0)
        .expect("grid has K=2, gap 2");
    let closed_ok = (closed - 0.0786).abs() <= 0.005 && (two.empirical - 0.0786).abs() <= 0.005;
    outcome(
        bad.is_empty() && closed_ok,
        format!(
            "{}/{} cells within bound + 3 SE {bad:?}; K=2 gap=2 empirical {:.4}, closed form {closed:.4}",
            cells.len() - bad.len(),
            cells.len(),
            two.empirical
        ),
    )
}

fn recovery_pattern() -> Outcome {
    let pool = shipped_pool();
    let profiles = shipped_profiles();
    let cfg = ReplayConfig::default();
    let t0 = cfg.shock.as_ref().expect("default shock").t0;
    let mut failures = Vec::new();
    let mut max_frozen_post: f64 = 0.0;
    let mut slowest = 0;
    for seed in 0..20u64 {
        let stream = synthetic_prompt_stream(cfg.steps as usize, seed);
        let lin = run_replay(&stream, &pool, &profiles, PolicyKind::LinUcb, &cfg, seed).expect("linucb replay");
        let frozen = run_replay(
            &stream,
            &pool,
            &profiles,
            PolicyKind::LinUcbFrozen { freeze_at: t0 },
            &cfg,
            seed,
        )
        .expect("frozen replay");
        let ml = recovery_from_log(&lin.log, DEFAULT_WINDOW, DEFAULT_THRESHOLD).expect("linucb metrics");
        let mf = recovery_from_log(&frozen.log, DEFAULT_WINDOW, DEFAULT_THRESHOLD).expect("frozen metrics");
        max_frozen_post = max_frozen_post.max(mf.post_rate);
        slowest = slowest.max(ml.recovery_time.unwrap_or(u64::MAX));
        if ml.recovery_time.is_none() {
            failures.push(format!("seed {seed}: linucb NR"));
        }
        if mf.recovery_time.is_some() || mf.post_rate >= 0.35 {
            failures.push(format!(
                "seed {seed}: frozen {:?} post {:.3}",
                mf.recovery_time, mf.post_rate
            ));
        }
        if ml.worst_window <= mf.worst_window {
            failures.push(format!(
                "seed {seed}: worst {:.2} <= {:.2}",
                ml.worst_window, mf.worst_window
            ));
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "20 seeds; slowest linucb recovery {slowest}; max frozen post {max_frozen_post:.3}; failures {failures:?}"
        ),
    )
}

fn nonstationary_variants() -> Outcome {
    let cfg = TheoryConfig::default();
    let cp = changepoint_suite(&cfg, &seeds(50)).expect("change-point suite");
    let (drift, w) = drift_suite(&cfg, &seeds(50)).expect("drift suite");
    outcome(
        cp.adaptive_mean() < cp.baseline_mean() && drift.adaptive_mean() < drift.baseline_mean(),
        format!(
            "reset {:.1} < plain {:.1}; window {w}: sliding {:.1} < plain {:.1}",
            cp.adaptive_mean(),
            cp.baseline_mean(),
            drift.adaptive_mean(),
            drift.baseline_mean()
        ),
    )
}

const LABELS: [&str; 4] = ["d", "b", "a", "c"];
const CONF_GRID: [f64; 3] = [0.2, 0.5, 0.9];
/// Plan weights in tenths, so the oracle tallies exactly.
const WEIGHT_TENTHS: [u32; 3] = [0, 2, 4];

/// All sequences of length `n` over `base` symbols, as digit vectors.
fn sequences(n: usize, base: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..base.pow(n as u32)).map(move |mut code| {
        (0..n)
            .map(|_| {
                let d = code % base;
                code /= base;
                d
            })
            .collect()
    })
}

/// Brute-force majority rule: most votes, then highest single confidence,
/// then lowest run id.
fn majority_oracle(answers: &[usize], confs: &[usize], ids: &[u32]) -> (usize, BTreeMap<usize, u32>, bool) {
    let mut rows: Vec<(usize, u32, usize, u32)> = Vec::new();
    for label in 0..LABELS.len() {
        let mine: Vec<usize> = (0..answers.len()).filter(|&i| answers[i] == label).collect();
        if mine.is_empty() {
            continue;
        }
        let count = mine.len() as u32;
        let best_conf = mine.iter().map(|&i| confs[i]).max().unwrap();
        let low_id = mine.iter().map(|&i| ids[i]).min().unwrap();
        rows.push((label, count, best_conf, low_id));
    }
    let top = rows.iter().map(|r| r.1).max().unwrap();
    let tied = rows.iter().filter(|r| r.1 == top).count() > 1;
    rows.sort_by(|a, b| b.1.cmp(&a.1).then(b.2.cmp(&a.2)).then(a.3.cmp(&b.3)));
    let tally = rows.iter().map(|r| (r.0, r.1)).collect();
    (rows[0].0, tally, tied)
}

/// Brute-force weighted rule on integer weights: largest sum, then largest
/// single weight, then lowest plan index.
fn weighted_oracle(answers: &[usize], weights: &[u32]) -> Option<(usize, bool)> {
    if weights.iter().all(|w| *w == 0) {
        return None;
    }
    let mut rows: Vec<(usize, u32, u32, usize)> = Vec::new();
    for label in 0..LABELS.len() {
        let mine: Vec<usize> = (0..answers.len()).filter(|&i| answers[i] == label).collect();
        if mine.is_empty() {
            continue;
        }
        let sum = mine.iter().map(|&i| weights[i]).sum();
        let biggest = mine.iter().map(|&i| weights[i]).max().unwrap();
        rows.push((label, sum, biggest, mine[0]));
    }
    let top = rows.iter().map(|r| r.1).max().unwrap();
    let tied = rows.iter().filter(|r| r.1 == top).count() > 1;
    rows.sort_by(|a, b| b.1.cmp(&a.1).then(b.2.cmp(&a.2)).then(a.3.cmp(&b.3)));
    Some((rows[0].0, tied))
}

fn voting_oracle() -> Outcome {
    let mut instances = 0u64;
    let mut mismatches = Vec::new();
    for n in 1..=5usize {
        for answers in sequences(n, LABELS.len()) {
            for confs in sequences(n, CONF_GRID.len()) {
                for reversed in [false, true] {
                    instances += 1;
                    let ids: Vec<u32> = (0..n as u32)
                        .map(|i| if reversed { n as u32 - 1 - i } else { i })
                        .collect();
                    let runs: Vec<RunResult> = (0..n)
                        .map(|i| RunResult {
                            run_id: ids[i],
                            raw_output: LABELS[answers[i]].into(),
                            canonical_answer: LABELS[answers[i]].into(),
                            confidence: CONF_GRID[confs[i]],
                            valid: true,
                            latency_norm: 0.0,
                            agent: AgentId::new("A"),
                        })
                        .collect();
                    let got = majority_vote(&runs).expect("non-empty runs");
                    let (winner, tally, tied) = majority_oracle(&answers, &confs, &ids);
                    let tally_ok = tally.len() == got.tally.len()
                        && tally
                            .iter()
                            .all(|(l, c)| got.tally.get(LABELS[*l]) == Some(&f64::from(*c)));
                    if got.winner != LABELS[winner] || !tally_ok || got.tie_broken != tied {
                        mismatches.push(format!("majority {answers:?} {confs:?} {ids:?}"));
                    }
                }
            }
            for weights in sequences(n, WEIGHT_TENTHS.len()) {
                instances += 1;
                let tenths: Vec<u32> = weights.iter().map(|&i| WEIGHT_TENTHS[i]).collect();
                let plans: Vec<(String, f64)> = (0..n)
                    .map(|i| (LABELS[answers[i]].to_string(), f64::from(tenths[i]) / 10.0))
                    .collect();
                let got = weighted_vote(&plans);
                let ok = match (weighted_oracle(&answers, &tenths), &got) {
                    (None, Err(_)) => true,
                    (Some((w, tied)), Ok(v)) => v.winner == LABELS[w] && v.tie_broken == tied,
                    _ => false,
                };
                if !ok {
                    mismatches.push(format!("weighted {answers:?} {tenths:?}"));
                }
            }
        }
    }
    outcome(
        mismatches.is_empty(),
        format!(
            "{instances} instances, {} mismatches {:?}",
            mismatches.len(),
            mismatches.iter().take(3).collect::<Vec<_>>()
        ),
    )
}

fn ridge_numerics() -> Outcome {
    let d = 6;
    let mut ridge = RidgeState::new(d, 1.0).expect("ridge");
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut a = DMatrix::<f64>::identity(d, d);
    let mut b = DVector::<f64>::zeros(d);
    for _ in 0..10_000 {
        let x: Vec<f64> = (0..d)
            .map(|_| rng.random_range(-1.0..1.0) / (d as f64).sqrt())
            .collect();
        let r: f64 = rng.random_range(-1.0..1.0);
        ridge.update(&x, r).expect("update");
        let xv = DVector::from_vec(x);
        a += &xv * xv.transpose();
        b += xv * r;
    }
    let a_inv = a.clone().try_inverse().expect("SPD");
    let theta = a.lu().solve(&b).expect("SPD");
    let frob = (0..d)
        .flat_map(|i| (0..d).map(move |j| (i, j)))
        .map(|(i, j)| (ridge.a_inv().get(i, j) - a_inv[(i, j)]).powi(2))
        .sum::<f64>()
        .sqrt();
    let theta_err = ridge
        .theta()
        .iter()
        .zip(theta.iter())
        .map(|(p, q)| (p - q).powi(2))
        .sum::<f64>()
        .sqrt();
    outcome(
        frob < 1e-8 && theta_err < 1e-9,
        format!("Frobenius {frob:.2e} < 1e-8; theta {theta_err:.2e} < 1e-9"),
    )
}

fn selection(step: u64, task_id: &str, chosen: &str) -> Event {
    Event::Selection(SelectionEvent {
        step,
        seed: 0,
        task_id: task_id.into(),
        level: Level::Subtask,
        phase: None,
        policy: "fixture".into(),
        candidates: Vec::new(),
        chosen: AgentId::new(chosen),
    })
}

fn vote(step: u64, task_id: &str, plan_count: u32, plan_parse_fail: u32) -> Event {
    Event::Vote(VoteEvent {
        step,
        seed: 0,
        task_id: task_id.into(),
        method: "weighted".into(),
        winner: "x".into(),
        tally: BTreeMap::new(),
        phase: None,
        final_plan: Some(0),
        final_planner: Some(AgentId::new("A")),
        plan_count,
        plan_parse_fail,
        correct: None,
    })
}

fn diagnostics_fixtures() -> Outcome {
    // Four task types with one vote each: 1 parse failure among 100 plans.
    // Subtask selections switch agent every 50 steps.
    let types = ["gsm8k", "bbh", "amc", "medqa"];
    let mut log = EventLog::new();
    for (i, ty) in types.iter().enumerate() {
        log.push(vote(i as u64, &format!("{ty}-0"), 25, u32::from(i == 0)));
    }
    for step in 0..200u64 {
        let agent = if (step / 50) % 2 == 0 { "A" } else { "B" };
        log.push(selection(step, &format!("{}-0", types[step as usize % 4]), agent));
    }
    let accuracy: BTreeMap<String, BTreeMap<AgentId, f64>> = types
        .iter()
        .map(|t| {
            (
                t.to_string(),
                BTreeMap::from([(AgentId::new("A"), 0.9), (AgentId::new("B"), 0.1)]),
            )
        })
        .collect();
    let radar = radar_from_log(&log, Some(&accuracy), &RadarConfig::default()).expect("radar");
    let radar_ok = (radar.weight_normalization - 0.8).abs() < 1e-12
        && radar.trajectory_smoothness == 0.0
        && radar.coverage_balance == 1.0
        && radar.appropriate_match == 0.5;

    // Constant bias, varying sim_emb, zero load, constant remaining features.
    let mut ridge = RidgeState::new(6, 1.0).expect("ridge");
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut snaps = vec![RidgeSnapshot::of(&ridge)];
    for _ in 0..1000 {
        let x = [1.0, rng.random::<f64>(), 0.0, 0.3, 0.9, 1.0];
        ridge.update(&x, rng.random()).expect("update");
        snaps.push(RidgeSnapshot::of(&ridge));
    }
    let rows = shrinkage_report(&uncertainty_trace(&snaps).expect("trace")).expect("report");
    let best = rows
        .iter()
        .max_by(|a, b| a.rel_drop.total_cmp(&b.rel_drop))
        .expect("rows");
    let shrink_ok = best.name == "sim_emb" && rows[2].rel_drop.abs() < 1e-12;
    outcome(
        radar_ok && shrink_ok,
        format!(
            "weight {} smoothness {} coverage {} match {}; largest drop {} {:.1}%, load {:.2}%",
            radar.weight_normalization,
            radar.trajectory_smoothness,
            radar.coverage_balance,
            radar.appropriate_match,
            best.name,
            100.0 * best.rel_drop,
            100.0 * rows[2].rel_drop
        ),
    )
}

fn workload_counts() -> Outcome {
    let records = synthetic_records(600, 4);
    let split = build_phases(&records, DEFAULT_RATIOS, 4).expect("split");
    let again = build_phases(&records, DEFAULT_RATIOS, 4).expect("split");
    let split_ok = split.sizes() == [200, 300, 100] && split == again;

    let mut uniform: Vec<TaskRecord> = (0..100)
        .map(|i| TaskRecord {
            task_id: format!("u-{i}"),
            dataset: Some(Dataset::Synthetic),
            declared_difficulty: Some(f64::from(i) / 99.0),
            ..TaskRecord::default()
        })
        .collect();
    score_all(&mut uniform, &Normalizers::default()).expect("score");
    normalize_and_bin(&mut uniform).expect("bin");
    let count = |b: Bin| uniform.iter().filter(|r| r.bin == Some(b)).count();
    // Nearest-rank P20 of 0..=99 is the value at index round(19.8) = 20, so
    // indices 0..=20 are easy; P80 sits at index round(79.2) = 79, so
    // indices 79..=99 are hard.
    let (easy, medium, hard) = (count(Bin::Easy), count(Bin::Medium), count(Bin::Hard));
    outcome(
        split_ok && (easy, medium, hard) == (21, 58, 21),
        format!(
            "split {:?}; bins easy {easy} medium {medium} hard {hard}",
            split.sizes()
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("regret sublinearity", regret_sublinearity),
        ("ellipsoid coverage", ellipsoid_coverage),
        ("elliptical potential", elliptical_potential),
        ("mis-selection bound", misselection_bound),
        ("shock recovery pattern", recovery_pattern),
        ("non-stationary variants", nonstationary_variants),
        ("voting oracle equivalence", voting_oracle),
        ("ridge numerics", ridge_numerics),
        ("diagnostics fixtures", diagnostics_fixtures),
        ("workload counts", workload_counts),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} {:>2} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

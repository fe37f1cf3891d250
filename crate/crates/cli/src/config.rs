//! Experiment configuration: TOML file, per-flag overrides and the config hash.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use beacon_core::bandit::{Beta, FeatureConfig, PolicyKind};
use beacon_core::matching::Stage1Weights;
use beacon_core::orchestrator::{CreditMode, RewardParams};
use beacon_core::simenv::theory::TheoryConfig;
use beacon_core::types::AgentId;
use beacon_core::workload::{BinFilter, DEFAULT_RATIOS};

/// Environment variable that overrides the seed from every other source.
pub const SEED_ENV: &str = "SYMPHONY_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Where artifacts are written. Not part of the config hash.
    pub out_dir: PathBuf,
    /// Worker threads for seed-parallel suites; 0 uses every core. Not part
    /// of the config hash.
    pub jobs: usize,
    pub policy: PolicyConfig,
    pub stage1: Stage1Config,
    pub route: RouteConfig,
    pub replay: ReplaySection,
    pub theory: TheorySection,
    pub workload: WorkloadSection,
    pub diagnose: DiagnoseSection,
    pub profile: ProfileSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("out"),
            jobs: 0,
            policy: PolicyConfig::default(),
            stage1: Stage1Config::default(),
            route: RouteConfig::default(),
            replay: ReplaySection::default(),
            theory: TheorySection::default(),
            workload: WorkloadSection::default(),
            diagnose: DiagnoseSection::default(),
            profile: ProfileSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    /// One of linucb, linucb-frozen, reset-linucb, sw-linucb, random,
    /// static-rule, round-robin, majority-vote.
    pub kind: String,
    pub lambda: f64,
    pub beta: Beta,
    pub freeze_at: Option<u64>,
    pub change_points: Vec<u64>,
    pub window: Option<usize>,
    pub features: FeatureConfig,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            kind: "linucb".into(),
            lambda: 1.0,
            beta: Beta::default(),
            freeze_at: None,
            change_points: Vec::new(),
            window: None,
            features: FeatureConfig::default(),
        }
    }
}

/// Resolve a policy name against the configured parameters. `freeze_default`
/// fills in the freeze step for the frozen variant when none is configured.
pub fn policy_kind(name: &str, cfg: &PolicyConfig, freeze_default: Option<u64>) -> Result<PolicyKind> {
    Ok(match name {
        "linucb" => PolicyKind::LinUcb,
        "linucb-frozen" => PolicyKind::LinUcbFrozen {
            freeze_at: cfg
                .freeze_at
                .or(freeze_default)
                .context("linucb-frozen needs policy.freeze_at or a shock step")?,
        },
        "reset-linucb" => PolicyKind::ResetLinUcb {
            change_points: cfg.change_points.clone(),
        },
        "sw-linucb" => PolicyKind::SlidingWindow {
            window: cfg.window.context("sw-linucb needs policy.window")?,
        },
        "random" => PolicyKind::Random,
        "static-rule" => PolicyKind::StaticRule,
        "round-robin" => PolicyKind::RoundRobin,
        "majority-vote" => PolicyKind::MajorityVote,
        other => bail!("unknown policy `{other}`"),
    })
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stage1Config {
    pub weights: Stage1Weights,
    /// Shortlist size; `None` keeps every agent in replay and uses 3 in routing.
    pub top_l: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RouteConfig {
    /// Agent pool TOML; the shipped synthetic pool when absent.
    pub pool: Option<PathBuf>,
    /// Profiles that set each simulated agent's failure rate and latency;
    /// the shipped profiles when absent. Agents without one keep defaults.
    pub profiles: Option<PathBuf>,
    /// JSONL of subtasks; a synthetic stream of `n_tasks` when absent.
    pub tasks: Option<PathBuf>,
    pub n_tasks: usize,
    pub plan_k: u32,
    pub cot_p: u32,
    pub reward: RewardParams,
    pub credit: CreditMode,
    pub ratios: [u32; 3],
    /// Base accuracy of every simulated agent.
    pub accuracy: f64,
    /// Probability that a synthetic plan fails to parse.
    pub plan_parse_fail: f64,
}

impl Default for RouteConfig {
    fn default() -> Self {
        Self {
            pool: None,
            profiles: None,
            tasks: None,
            n_tasks: 10,
            plan_k: 3,
            cot_p: 3,
            reward: RewardParams::default(),
            credit: CreditMode::PostVote,
            ratios: DEFAULT_RATIOS,
            accuracy: 0.8,
            plan_parse_fail: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReplaySection {
    /// Policies to replay, each producing one summary row.
    pub policies: Vec<String>,
    pub pool: Option<PathBuf>,
    pub profiles: Option<PathBuf>,
    /// JSONL of prompt items; a synthetic stream when absent.
    pub prompts: Option<PathBuf>,
    pub steps: u64,
    /// Shock step; `None` disables the shock.
    pub shock_at: Option<u64>,
    pub shock_targets: Vec<AgentId>,
    pub error_rate_boost: f64,
    pub latency_multiplier: f64,
    pub window: usize,
    pub threshold: f64,
    pub sla_ms: Option<f64>,
}

impl Default for ReplaySection {
    fn default() -> Self {
        let d = beacon_core::simenv::ReplayConfig::default();
        let shock = d.shock.expect("default replay has a shock");
        Self {
            policies: vec!["linucb".into(), "linucb-frozen".into(), "random".into()],
            pool: None,
            profiles: None,
            prompts: None,
            steps: d.steps,
            shock_at: Some(shock.t0),
            shock_targets: Vec::new(),
            error_rate_boost: shock.effect.error_rate_boost,
            latency_multiplier: shock.effect.latency_multiplier,
            window: beacon_core::simenv::DEFAULT_WINDOW,
            threshold: beacon_core::simenv::DEFAULT_THRESHOLD,
            sla_ms: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Regret,
    Ellipsoid,
    Potential,
    Misselect,
    Changepoint,
    Drift,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheorySection {
    pub suites: Vec<Suite>,
    /// Seeds `seed .. seed + n_seeds` for the multi-seed suites.
    pub n_seeds: u64,
    pub params: TheoryConfig,
    /// Step at which the early regret rate is read.
    pub early: u64,
    pub trials: u64,
    pub streams: usize,
    pub tolerance: f64,
}

impl Default for TheorySection {
    fn default() -> Self {
        Self {
            suites: vec![Suite::Regret],
            n_seeds: 100,
            params: TheoryConfig::default(),
            early: 250,
            trials: 100_000,
            streams: 1000,
            tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadSection {
    /// JSONL task records; `n_synthetic` synthetic records when absent.
    pub records: Option<PathBuf>,
    pub n_synthetic: usize,
    pub ratios: [u32; 3],
    pub filter: BinFilter,
}

impl Default for WorkloadSection {
    fn default() -> Self {
        Self {
            records: None,
            n_synthetic: 600,
            ratios: DEFAULT_RATIOS,
            filter: BinFilter::All,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseSection {
    pub log: Option<PathBuf>,
    pub tau_weight: f64,
    pub window: usize,
    pub tau_smooth: f64,
    pub target: Option<BTreeMap<String, f64>>,
}

impl Default for DiagnoseSection {
    fn default() -> Self {
        let r = beacon_core::diagnostics::RadarConfig::default();
        Self {
            log: None,
            tau_weight: r.tau_weight,
            window: r.window,
            tau_smooth: r.tau_smooth,
            target: r.target,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileSection {
    pub logs: Option<PathBuf>,
}

/// 1-based line of a byte offset.
pub fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let line = e.span().map_or(0, |s| line_of(text, s.start));
            anyhow::anyhow!("{}:{line}: {}", origin.display(), e.message())
        })
    }

    /// Load a TOML config, or the config recorded in a run manifest.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        if path.extension().is_some_and(|e| e == "json") {
            let v: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| anyhow::anyhow!("{}:{}: {e}", path.display(), e.line()))?;
            let cfg = v.get("config").cloned().context("manifest has no `config` entry")?;
            return serde_json::from_value(cfg).with_context(|| format!("{}: invalid config", path.display()));
        }
        Self::from_toml(&text, path)
    }

    /// Apply the seed override from the environment, if set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.seed = v
                .trim()
                .parse()
                .with_context(|| format!("{SEED_ENV}=`{v}` is not an unsigned integer"))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.policy.lambda > 0.0 && self.policy.lambda.is_finite()) {
            bail!("policy.lambda must be positive");
        }
        self.policy
            .beta
            .validate()
            .map_err(|e| anyhow::anyhow!("policy.beta: {e}"))?;
        self.stage1
            .weights
            .validate()
            .map_err(|e| anyhow::anyhow!("stage1.weights: {e}"))?;
        if self.stage1.top_l == Some(0) {
            bail!("stage1.top_l must be >= 1");
        }
        self.route
            .reward
            .validate()
            .map_err(|e| anyhow::anyhow!("route.reward: {e}"))?;
        if !(0.0..=1.0).contains(&self.route.accuracy) || !(0.0..=1.0).contains(&self.route.plan_parse_fail) {
            bail!("route.accuracy and route.plan_parse_fail must lie in [0, 1]");
        }
        if self.replay.window == 0 || !(0.0..=1.0).contains(&self.replay.threshold) {
            bail!("replay.window must be >= 1 and replay.threshold in [0, 1]");
        }
        if self.replay.error_rate_boost < 0.0 || self.replay.latency_multiplier < 1.0 {
            bail!("replay shock needs error_rate_boost >= 0 and latency_multiplier >= 1");
        }
        if self.theory.n_seeds == 0 || self.theory.trials == 0 || self.theory.streams == 0 {
            bail!("theory.n_seeds, theory.trials and theory.streams must be >= 1");
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON form, excluding the output location
    /// and thread count, which do not affect results.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        c.jobs = 0;
        let json = serde_json::to_string(&c).expect("config serializes");
        hex(&Sha256::digest(json.as_bytes()))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

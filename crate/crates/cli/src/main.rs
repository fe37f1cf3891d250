//! `beacon`: command-line experiments for the two-stage agent router.
//!
//! Every subcommand resolves one [`ExperimentConfig`] (flag over config file
//! over default, then the seed environment override), writes its artifacts
//! under the output directory and finishes with a manifest that `rerun` can
//! replay byte for byte.

mod commands;
mod config;
mod output;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use beacon_core::orchestrator::CreditMode;
use beacon_core::workload::BinFilter;

use config::{hex, ExperimentConfig, Suite};
use output::{Outputs, Provenance};

#[derive(Parser)]
#[command(name = "beacon", version, about = "Two-stage agent routing experiments")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// TOML experiment config, or a run manifest (.json) to reuse its config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// RNG seed. The SYMPHONY_SEED environment variable overrides it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for artifacts.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads for parallel suites; 0 uses every core.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// More logging on stderr; repeat for trace output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Route tasks end to end through both stages against simulated agents.
    Route(RouteArgs),
    /// Replay a prompt stream from agent profiles, optionally with a shock.
    Replay(ReplayArgs),
    /// Run the synthetic guarantee suites.
    Theory(TheoryArgs),
    /// Difficulty scoring and phase splits.
    #[command(subcommand)]
    Workload(WorkloadCommand),
    /// Radar, distribution and uncertainty diagnostics from an event log.
    Diagnose(DiagnoseArgs),
    /// Aggregate call logs into agent profiles.
    Profile(ProfileArgs),
    /// Re-run the command recorded in a manifest and check every output
    /// digest against it.
    Rerun(RerunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum CreditArg {
    PostVote,
    PreVoteValidity,
}

#[derive(Args)]
struct RouteArgs {
    #[arg(long)]
    pool: Option<PathBuf>,
    #[arg(long)]
    profiles: Option<PathBuf>,
    /// JSONL of subtasks.
    #[arg(long)]
    tasks: Option<PathBuf>,
    /// Synthetic tasks to generate when no task file is given.
    #[arg(long)]
    n_tasks: Option<usize>,
    /// Plans drafted per task.
    #[arg(long)]
    plan_k: Option<u32>,
    /// Chain-of-thought runs per plan step.
    #[arg(long = "cot")]
    cot_p: Option<u32>,
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    top_l: Option<usize>,
    #[arg(long)]
    accuracy: Option<f64>,
    #[arg(long)]
    credit: Option<CreditArg>,
    #[arg(long)]
    b_win: Option<f64>,
    #[arg(long)]
    b_corr: Option<f64>,
    #[arg(long)]
    p_inc: Option<f64>,
    #[arg(long)]
    lambda_lat: Option<f64>,
}

impl RouteArgs {
    fn apply(&self, c: &mut ExperimentConfig) {
        let r = &mut c.route;
        set(&mut r.pool, self.pool.clone().map(Some));
        set(&mut r.profiles, self.profiles.clone().map(Some));
        set(&mut r.tasks, self.tasks.clone().map(Some));
        set(&mut r.n_tasks, self.n_tasks);
        set(&mut r.plan_k, self.plan_k);
        set(&mut r.cot_p, self.cot_p);
        set(&mut r.accuracy, self.accuracy);
        set(&mut r.reward.b_win, self.b_win);
        set(&mut r.reward.b_corr, self.b_corr);
        set(&mut r.reward.p_inc, self.p_inc);
        set(&mut r.reward.lambda_lat, self.lambda_lat);
        set(
            &mut r.credit,
            self.credit.map(|m| match m {
                CreditArg::PostVote => CreditMode::PostVote,
                CreditArg::PreVoteValidity => CreditMode::PreVoteValidity,
            }),
        );
        set(&mut c.policy.kind, self.policy.clone());
        set(&mut c.stage1.top_l, self.top_l.map(Some));
    }
}

#[derive(Args)]
struct ReplayArgs {
    /// Policies to replay, comma separated.
    #[arg(long = "policy", value_delimiter = ',')]
    policies: Vec<String>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long, conflicts_with = "no_shock")]
    shock_at: Option<u64>,
    #[arg(long)]
    no_shock: bool,
    /// Agent to degrade at the shock; repeatable. Defaults to the router's
    /// current favourite.
    #[arg(long = "shock-target")]
    shock_targets: Vec<String>,
    #[arg(long)]
    pool: Option<PathBuf>,
    #[arg(long)]
    profiles: Option<PathBuf>,
    /// JSONL of prompt items.
    #[arg(long)]
    prompts: Option<PathBuf>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    top_l: Option<usize>,
}

impl ReplayArgs {
    fn apply(&self, c: &mut ExperimentConfig) {
        let r = &mut c.replay;
        if !self.policies.is_empty() {
            r.policies = self.policies.clone();
        }
        if !self.shock_targets.is_empty() {
            r.shock_targets = self.shock_targets.iter().map(|s| s.as_str().into()).collect();
        }
        set(&mut r.steps, self.steps);
        set(&mut r.shock_at, self.shock_at.map(Some));
        if self.no_shock {
            r.shock_at = None;
        }
        set(&mut r.pool, self.pool.clone().map(Some));
        set(&mut r.profiles, self.profiles.clone().map(Some));
        set(&mut r.prompts, self.prompts.clone().map(Some));
        set(&mut r.window, self.window);
        set(&mut r.threshold, self.threshold);
        set(&mut c.stage1.top_l, self.top_l.map(Some));
    }
}

#[derive(Args)]
struct TheoryArgs {
    /// Suites to run; repeatable or comma separated.
    #[arg(long = "suite", value_enum, value_delimiter = ',')]
    suites: Vec<Suite>,
    #[arg(long)]
    n_seeds: Option<u64>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    streams: Option<usize>,
}

impl TheoryArgs {
    fn apply(&self, c: &mut ExperimentConfig) {
        let t = &mut c.theory;
        if !self.suites.is_empty() {
            t.suites = self.suites.clone();
        }
        set(&mut t.n_seeds, self.n_seeds);
        set(&mut t.params.horizon, self.horizon);
        set(&mut t.trials, self.trials);
        set(&mut t.streams, self.streams);
    }
}

#[derive(Subcommand)]
enum WorkloadCommand {
    /// Score difficulty and bin each dataset.
    Score(RecordsArgs),
    /// Split records into cold-start, train and test phases.
    Split(SplitArgs),
}

#[derive(Args)]
struct RecordsArgs {
    /// JSONL task records.
    #[arg(long)]
    records: Option<PathBuf>,
    /// Synthetic records to generate when no file is given.
    #[arg(long)]
    n_synthetic: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FilterArg {
    All,
    EasyHard,
}

#[derive(Args)]
struct SplitArgs {
    #[command(flatten)]
    records: RecordsArgs,
    /// Phase ratios as cold,train,test.
    #[arg(long, value_parser = parse_ratios)]
    ratios: Option<[u32; 3]>,
    #[arg(long)]
    filter: Option<FilterArg>,
}

fn parse_ratios(s: &str) -> Result<[u32; 3], String> {
    let parts: Vec<u32> = s
        .split(',')
        .map(|p| p.trim().parse::<u32>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    parts
        .try_into()
        .map_err(|p: Vec<u32>| format!("expected three ratios, got {}", p.len()))
}

impl RecordsArgs {
    fn apply(&self, c: &mut ExperimentConfig) {
        set(&mut c.workload.records, self.records.clone().map(Some));
        set(&mut c.workload.n_synthetic, self.n_synthetic);
    }
}

impl SplitArgs {
    fn apply(&self, c: &mut ExperimentConfig) {
        self.records.apply(c);
        set(&mut c.workload.ratios, self.ratios);
        set(
            &mut c.workload.filter,
            self.filter.map(|f| match f {
                FilterArg::All => BinFilter::All,
                FilterArg::EasyHard => BinFilter::EasyHard,
            }),
        );
    }
}

#[derive(Args)]
struct DiagnoseArgs {
    /// Event log (JSONL) written by `route` or `replay`.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    tau_smooth: Option<f64>,
    #[arg(long)]
    tau_weight: Option<f64>,
}

impl DiagnoseArgs {
    fn apply(&self, c: &mut ExperimentConfig) {
        let d = &mut c.diagnose;
        set(&mut d.log, self.log.clone().map(Some));
        set(&mut d.window, self.window);
        set(&mut d.tau_smooth, self.tau_smooth);
        set(&mut d.tau_weight, self.tau_weight);
    }
}

#[derive(Args)]
struct ProfileArgs {
    /// JSONL call logs.
    #[arg(long)]
    logs: Option<PathBuf>,
}

#[derive(Args)]
struct RerunArgs {
    /// manifest.json of an earlier run.
    manifest: PathBuf,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

/// Run one command against a resolved config and write its manifest.
fn execute(command: &str, cfg: &ExperimentConfig) -> Result<PathBuf> {
    cfg.validate()?;
    let mut out = Outputs::new(&cfg.out_dir, Provenance::of(cfg))?;
    tracing::info!(command, seed = cfg.seed, hash = %out.provenance().config_hash, "starting");
    match command {
        "route" => commands::route::run(cfg, &mut out)?,
        "replay" => commands::replay::run(cfg, &mut out)?,
        "theory" => commands::theory::run(cfg, &mut out)?,
        "workload score" => commands::workload::run_score(cfg, &mut out)?,
        "workload split" => commands::workload::run_split(cfg, &mut out)?,
        "diagnose" => commands::diagnose::run(cfg, &mut out)?,
        "profile" => commands::profile::run(cfg, &mut out)?,
        other => bail!("unknown command `{other}`"),
    }
    out.finish(command, cfg)
}

/// Re-run a manifest's command with its recorded config and compare every
/// output digest.
fn rerun(manifest: &Path, out_dir: Option<PathBuf>) -> Result<PathBuf> {
    let text = std::fs::read_to_string(manifest).with_context(|| format!("reading {}", manifest.display()))?;
    let m: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| anyhow::anyhow!("{}:{}: {e}", manifest.display(), e.line()))?;
    let command = m["command"].as_str().context("manifest has no command")?.to_string();
    let mut cfg = ExperimentConfig::load(manifest)?;
    set(&mut cfg.out_dir, out_dir);
    let expected: BTreeMap<String, String> = m["outputs"]
        .as_array()
        .context("manifest has no outputs")?
        .iter()
        .filter_map(|o| Some((o["file"].as_str()?.to_string(), o["sha256"].as_str()?.to_string())))
        .collect();
    let recorded_git = m["git"].as_str().unwrap_or_default();
    if recorded_git != output::GIT_DESCRIBE {
        tracing::warn!(
            recorded = recorded_git,
            current = output::GIT_DESCRIBE,
            "built from a different revision"
        );
    }
    let path = execute(&command, &cfg)?;
    let mut differ = Vec::new();
    for (file, digest) in &expected {
        let bytes = std::fs::read(cfg.out_dir.join(file)).with_context(|| format!("reading {file}"))?;
        if &hex(&Sha256::digest(&bytes)) != digest {
            differ.push(file.clone());
        }
    }
    if !differ.is_empty() {
        bail!("outputs differ from {}: {}", manifest.display(), differ.join(", "));
    }
    tracing::info!(outputs = expected.len(), "all outputs reproduced");
    Ok(path)
}

fn resolve(global: &GlobalArgs, apply: impl FnOnce(&mut ExperimentConfig)) -> Result<ExperimentConfig> {
    let mut cfg = match &global.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    apply(&mut cfg);
    set(&mut cfg.seed, global.seed);
    set(&mut cfg.out_dir, global.out_dir.clone());
    set(&mut cfg.jobs, global.jobs);
    cfg.apply_env()?;
    Ok(cfg)
}

fn init_tracing(verbose: u8) {
    let default = match verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .init();
}

fn init_threads(jobs: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build_global()
        .context("starting worker threads")
}

fn run(cli: Cli) -> Result<PathBuf> {
    let g = &cli.global;
    let (command, cfg) = match &cli.command {
        Command::Rerun(a) => {
            init_threads(g.jobs.unwrap_or(0))?;
            return rerun(&a.manifest, g.out_dir.clone());
        }
        Command::Route(a) => ("route", resolve(g, |c| a.apply(c))?),
        Command::Replay(a) => ("replay", resolve(g, |c| a.apply(c))?),
        Command::Theory(a) => ("theory", resolve(g, |c| a.apply(c))?),
        Command::Workload(WorkloadCommand::Score(a)) => ("workload score", resolve(g, |c| a.apply(c))?),
        Command::Workload(WorkloadCommand::Split(a)) => ("workload split", resolve(g, |c| a.apply(c))?),
        Command::Diagnose(a) => ("diagnose", resolve(g, |c| a.apply(c))?),
        Command::Profile(a) => (
            "profile",
            resolve(g, |c| set(&mut c.profile.logs, a.logs.clone().map(Some)))?,
        ),
    };
    init_threads(cfg.jobs)?;
    execute(command, &cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_tracing(cli.global.verbose);
    match run(cli) {
        Ok(manifest) => {
            println!("{}", manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

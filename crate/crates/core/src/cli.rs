//! Command-line front end.
//!
//! Results go to stdout as single-line JSON; logs and diagnostics go to
//! stderr. Exit codes: 0 ok, 2 configuration error, 3 oracle or worker
//! failure, 4 internal invariant violation.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use serde_json::json;

use crate::boundary::{
    characterize_bounds, search_volume_reduction, BoundsFile, DEFAULT_RESOLUTION_STEPS,
};
use crate::config::{OracleConfig, RunConfig};
use crate::costmodel::{compressed_cost, CostMetric};
use crate::engine::{latest_checkpoint_path, Engine, InitStrategy, RunState};
use crate::error::{Error, Result};
use crate::evaluator::{AccuracyOracle, SurrogateModel, SurrogateOracle, WorkerPoolConfig};
use crate::genotype::{build_search_space, decode, Individual, Method, ModelArch, SearchSpace};
use crate::report::{format_genotype, parse_genotype, write_report, write_run_outputs};
use crate::scoring::{Accuracy, Evaluation};

#[derive(Debug, Parser)]
#[command(
    name = "compsearch",
    version,
    about = "Genetic search over per-layer DNN compression plans"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Characterize per-gene compression bounds and write them to a file.
    Bounds(BoundsArgs),
    /// Run the genetic search described by a run configuration.
    Optimize(OptimizeArgs),
    /// Score a single genotype.
    Score(ScoreArgs),
    /// Write plot-ready CSVs for a finished run directory.
    Report(ReportArgs),
    /// Send the identity spec to each configured worker and report replies.
    WorkerCheck(WorkerCheckArgs),
}

/// Where accuracies come from.
#[derive(Debug, Args)]
pub struct OracleArgs {
    /// Surrogate model JSON evaluated in-process.
    #[arg(long, conflicts_with_all = ["worker_command", "tcp"])]
    pub surrogate: Option<PathBuf>,
    /// Worker program and its arguments, split on whitespace.
    #[arg(long)]
    pub worker_command: Option<String>,
    /// Address of a running TCP worker (repeatable).
    #[arg(long)]
    pub tcp: Vec<String>,
    /// Number of worker processes to spawn.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Per-request timeout in seconds.
    #[arg(long)]
    pub timeout: Option<f64>,
}

impl OracleArgs {
    fn worker_config(&self) -> Option<WorkerPoolConfig> {
        if self.worker_command.is_none() && self.tcp.is_empty() {
            return None;
        }
        let mut cfg = WorkerPoolConfig {
            command: self
                .worker_command
                .as_ref()
                .map(|c| c.split_whitespace().map(String::from).collect()),
            tcp: self.tcp.clone(),
            ..WorkerPoolConfig::default()
        };
        if let Some(t) = self.timeout {
            cfg.timeout_secs = t;
        }
        Some(cfg)
    }

    fn connect(&self, space: &SearchSpace) -> Result<Box<dyn AccuracyOracle>> {
        if let Some(path) = &self.surrogate {
            if self.workers.is_some() {
                return Err(Error::config(
                    "--workers needs a worker oracle, not --surrogate",
                ));
            }
            let model = SurrogateModel::load(path)?;
            return Ok(Box::new(SurrogateOracle::new(model, space)?));
        }
        let Some(mut cfg) = self.worker_config() else {
            return Err(Error::config("give --surrogate, --worker-command or --tcp"));
        };
        cfg = cfg.with_env_override()?;
        if let Some(n) = self.workers {
            cfg.count = n;
        }
        Ok(Box::new(cfg.connect(&space.arch().name)?))
    }
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long)]
    pub arch: PathBuf,
    /// Comma-separated methods: structured_pruning, nonstructured_pruning, svd, tucker2, decomposition.
    #[arg(long)]
    pub methods: String,
    #[arg(long)]
    pub acc_thr: f64,
    #[command(flatten)]
    pub oracle: OracleArgs,
    /// Number of levels per continuous gene.
    #[arg(long, default_value_t = DEFAULT_RESOLUTION_STEPS)]
    pub resolution: u32,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Continue from a checkpoint file, or from the latest checkpoint of a run directory.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Number of worker processes (worker oracles only).
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub population: Option<usize>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub acc_thr: Option<f64>,
    #[arg(long, value_parser = parse_init)]
    pub init: Option<InitStrategy>,
    #[arg(long, value_parser = parse_metric)]
    pub metric: Option<CostMetric>,
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub arch: PathBuf,
    #[arg(long)]
    pub methods: String,
    /// Gene values separated by ',' or ';'.
    #[arg(long, allow_hyphen_values = true)]
    pub genotype: String,
    #[command(flatten)]
    pub oracle: OracleArgs,
    #[arg(long)]
    pub acc_thr: f64,
    #[arg(long, value_parser = parse_metric, default_value = "flops")]
    pub metric: CostMetric,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub run_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct WorkerCheckArgs {
    #[arg(long)]
    pub arch: PathBuf,
    #[arg(long)]
    pub methods: String,
    #[command(flatten)]
    pub oracle: OracleArgs,
}

fn parse_init(s: &str) -> std::result::Result<InitStrategy, String> {
    match s {
        "directed" => Ok(InitStrategy::Directed),
        "naive" => Ok(InitStrategy::Naive),
        other => Err(format!("unknown init strategy '{other}' (directed, naive)")),
    }
}

fn parse_metric(s: &str) -> std::result::Result<CostMetric, String> {
    s.parse::<CostMetric>().map_err(|e| e.to_string())
}

fn threshold(v: f64) -> Result<Accuracy> {
    Accuracy::new(v).map_err(|_| Error::config(format!("--acc-thr {v} outside [0, 100]")))
}

fn print_json(v: &serde_json::Value) {
    println!("{v}");
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Bounds(a) => cmd_bounds(a),
        Command::Optimize(a) => cmd_optimize(a),
        Command::Score(a) => cmd_score(a),
        Command::Report(a) => cmd_report(a),
        Command::WorkerCheck(a) => cmd_worker_check(a),
    }
}

pub fn cmd_bounds(a: BoundsArgs) -> Result<()> {
    let arch = ModelArch::load(&a.arch)?;
    let methods = Method::parse_list(&a.methods)?;
    let space = build_search_space(&arch, &methods)?;
    let thr = threshold(a.acc_thr)?;
    if a.resolution == 0 {
        return Err(Error::config("--resolution must be positive"));
    }
    let mut oracle = a.oracle.connect(&space)?;
    let report = characterize_bounds(&space, &mut oracle, thr, a.resolution)?;
    let probes = report.probes.iter().sum::<usize>();
    eprintln!(
        "bounds: {} genes, probe batches per gene {:?}",
        space.dim(),
        report.probes
    );
    let file = BoundsFile::new(&space, thr, a.resolution, &report);
    file.save(&a.out)?;
    print_json(&json!({
        "out": a.out,
        "identity_accuracy": report.identity_accuracy,
        "theta": report.bounds.theta,
        "probes": probes,
        "volume_reduction": search_volume_reduction(&space, &report.bounds)?,
    }));
    Ok(())
}

/// Applies command-line overrides to a loaded config.
pub fn apply_overrides(cfg: &mut RunConfig, a: &OptimizeArgs) -> Result<()> {
    if let Some(s) = a.seed {
        cfg.ga.rng_seed = s;
    }
    if let Some(t) = a.iterations {
        cfg.ga.iterations = t;
    }
    if let Some(n) = a.population {
        cfg.ga.population_size = n;
    }
    if let Some(o) = &a.output {
        cfg.output_dir = o.clone();
    }
    if let Some(t) = a.acc_thr {
        cfg.acc_thr = t;
    }
    if let Some(i) = a.init {
        cfg.init = i;
    }
    if let Some(m) = a.metric {
        cfg.metric = m;
    }
    if let Some(c) = a.checkpoint_every {
        cfg.checkpoint_every = c;
    }
    if let Some(n) = a.workers {
        match &mut cfg.oracle {
            OracleConfig::Workers(w) => w.count = n,
            OracleConfig::Surrogate(_) => {
                return Err(Error::config(
                    "--workers needs a worker oracle in the run config",
                ))
            }
        }
    }
    Ok(())
}

fn resolve_resume(path: &Path) -> PathBuf {
    if path.is_dir() {
        let nested = latest_checkpoint_path(&path.join("checkpoints"));
        if nested.exists() {
            return nested;
        }
        return latest_checkpoint_path(path);
    }
    path.to_path_buf()
}

pub fn cmd_optimize(a: OptimizeArgs) -> Result<()> {
    let mut cfg = RunConfig::load(&a.config)?;
    let workers_flag = a.workers;
    apply_overrides(&mut cfg, &a)?;
    let prepared = cfg.prepare()?;
    let resume = match &a.resume {
        Some(p) => Some(RunState::load(resolve_resume(p))?),
        None => None,
    };

    let mut oracle = match (&prepared.workers, workers_flag) {
        // The flag outranks the environment override.
        (Some(w), Some(n)) => {
            let mut w = w.clone();
            w.count = n;
            Box::new(w.connect(&prepared.space.arch().name)?) as Box<dyn AccuracyOracle>
        }
        _ => prepared.connect_oracle()?,
    };
    let mut engine = Engine::new(&prepared.space, prepared.settings.clone(), &mut oracle)?;
    let state = match resume {
        Some(state) => {
            info!("resuming at iteration {}", state.iteration);
            engine.resume(state)?
        }
        None => engine.run()?,
    };
    let arch = prepared.space.arch();
    write_run_outputs(&cfg.output_dir, arch, Some(&cfg), &state)?;

    let best = state
        .best
        .as_ref()
        .ok_or_else(|| Error::Invariant("run produced no evaluations".into()))?;
    print_json(&json!({
        "output_dir": cfg.output_dir,
        "iterations": state.iteration,
        "best_fitness": best.evaluation.fitness,
        "best_accuracy": best.evaluation.accuracy,
        "best_cost": best.evaluation.cost_total,
        "best_delta_c": best.evaluation.delta_c,
        "best_genotype": format_genotype(&best.individual),
        "archive_size": state.archive.len(),
    }));
    Ok(())
}

pub fn score_genotype(
    space: &SearchSpace,
    oracle: &mut dyn AccuracyOracle,
    values: Vec<f64>,
    acc_thr: Accuracy,
    metric: CostMetric,
) -> Result<(Individual, Evaluation)> {
    let x = Individual::new(space, values)?;
    let identity = decode(space, &space.identity())?;
    let spec = decode(space, &x)?;
    let acc = oracle.evaluate_batch(&[identity, spec.clone()])?;
    let (original, compressed) = match acc.as_slice() {
        [o, c] => (*o, *c),
        _ => return Err(Error::oracle("oracle returned the wrong number of results")),
    };
    if acc_thr.value() > original.value() {
        return Err(Error::config(format!(
            "accuracy threshold {} exceeds the uncompressed model's accuracy {}",
            acc_thr.value(),
            original.value()
        )));
    }
    let cost = compressed_cost(space.arch(), &spec, metric)?;
    let eval = Evaluation::new(0, compressed, cost.total, cost.delta_c, original, acc_thr);
    Ok((x, eval))
}

pub fn cmd_score(a: ScoreArgs) -> Result<()> {
    let arch = ModelArch::load(&a.arch)?;
    let methods = Method::parse_list(&a.methods)?;
    let space = build_search_space(&arch, &methods)?;
    let thr = threshold(a.acc_thr)?;
    let values = parse_genotype(&a.genotype)?;
    Individual::new(&space, values.clone())?;
    let mut oracle = a.oracle.connect(&space)?;
    let (x, eval) = score_genotype(&space, &mut oracle, values, thr, a.metric)?;
    print_json(&json!({
        "genotype": format_genotype(&x),
        "accuracy": eval.accuracy,
        "cost": eval.cost_total,
        "delta_c": eval.delta_c,
        "penalty": eval.penalty,
        "fitness": eval.fitness,
    }));
    Ok(())
}

pub fn cmd_report(a: ReportArgs) -> Result<()> {
    let files = write_report(&a.run_dir)?;
    print_json(&json!({ "files": files }));
    Ok(())
}

pub fn cmd_worker_check(a: WorkerCheckArgs) -> Result<()> {
    let arch = ModelArch::load(&a.arch)?;
    let space = build_search_space(&arch, &Method::parse_list(&a.methods)?)?;
    let Some(mut cfg) = a.oracle.worker_config() else {
        return Err(Error::config("give --worker-command or --tcp"));
    };
    cfg = cfg.with_env_override()?;
    if let Some(n) = a.oracle.workers {
        cfg.count = n;
    }
    let mut pool = cfg.connect(&arch.name)?;
    let n = pool.len();
    let identity = decode(&space, &space.identity())?;
    let specs = vec![identity; n];
    let started = std::time::Instant::now();
    let acc = pool.dispatch(&specs)?;
    print_json(&json!({
        "workers": n,
        "healthy": pool.healthy_workers(),
        "identity_accuracy": acc.first(),
        "elapsed_secs": started.elapsed().as_secs_f64(),
    }));
    Ok(())
}

/// Parses arguments, runs, and maps failures to an exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

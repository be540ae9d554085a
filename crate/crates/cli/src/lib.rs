//! `skm` command-line harness: every experiment writes CSV files and a
//! `manifest.json` from which it can be replayed.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use skm_core::experiment::{
    build_system, compare, gamma_table, run_experiment, CompareRow, ErrorKind, ExperimentConfig, GammaOptions,
    GammaRow, Source,
};
use skm_core::graphs::{barabasi_albert, complete_graph};
use skm_core::io::write_metrics_csv;
use skm_core::rng;
use skm_core::selection::RuleKind;
use skm_core::{BetaSchedule, Error, StopCriteria};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "skm", version, about = "Kaczmarz-Motzkin solver experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run repeated solver trials and write per-trial and mean metrics.
    Run(RunArgs),
    /// Tabulate the dynamic range against the sample size.
    Gamma(GammaArgs),
    /// Compare fixed sample sizes against CGLS under one budget.
    Compare(CompareArgs),
    /// Write a graph as an edge list.
    GraphGen(GraphArgs),
    /// Re-run an experiment from its manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScheduleArg {
    Fixed,
    Slowinc,
    Rand,
    Usedynrng,
}

#[derive(Debug, Clone, Args)]
pub struct SystemArgs {
    /// gaussian, uniform, scaled-gaussian, ac-complete, ac-ba or matrix-market:PATH
    #[arg(long, default_value = "gaussian")]
    pub source: String,
    #[arg(long, default_value_t = 2000)]
    pub m: usize,
    /// Columns, or vertices for graph sources.
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Scale every row to unit norm.
    #[arg(long)]
    pub normalize: bool,
    /// Drop empty rows of MatrixMarket input instead of rejecting them.
    #[arg(long)]
    pub drop_zero_rows: bool,
    /// Seed graph size for ac-ba.
    #[arg(long, default_value_t = 5)]
    pub ba_initial: usize,
    /// Edges added per vertex for ac-ba.
    #[arg(long, default_value_t = 5)]
    pub ba_edges: usize,
}

#[derive(Debug, Clone, Args)]
pub struct StopArgs {
    /// Stop once ‖x_k − x_ref‖² falls to this value.
    #[arg(long, default_value_t = 1e-6)]
    pub error_tol: f64,
    /// Stop once ‖A x_k − b‖² falls to this value.
    #[arg(long)]
    pub residual_tol: Option<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_iters: usize,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[command(flatten)]
    pub stop: StopArgs,
    #[arg(long, default_value = "skm-uniform")]
    pub rule: String,
    #[arg(long, value_enum, default_value_t = ScheduleArg::Fixed)]
    pub schedule: ScheduleArg,
    /// Sample sizes for the fixed schedule, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub beta: Vec<usize>,
    /// First sample size of the usedynrng schedule.
    #[arg(long, default_value_t = 1)]
    pub beta_initial: usize,
    /// Use the literal max(m, ·) form of usedynrng.
    #[arg(long)]
    pub dynrng_raw: bool,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long)]
    pub track_bound: bool,
    #[arg(long, default_value_t = 1)]
    pub record_every: usize,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[arg(long, default_value = "out")]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct GammaArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    /// Sample sizes; defaults to powers of two up to m.
    #[arg(long, value_delimiter = ',')]
    pub beta: Vec<usize>,
    /// Error vectors: gaussian and/or bernoulli.
    #[arg(long, value_delimiter = ',', default_value = "gaussian")]
    pub error_kind: Vec<String>,
    #[arg(long, default_value_t = 0.05)]
    pub bernoulli_p: f64,
    /// Monte Carlo samples per sample size; 0 skips the estimate.
    #[arg(long, default_value_t = 0)]
    pub mc_samples: usize,
    /// Constant of the c·β/ln β curve; calibrated when absent.
    #[arg(long)]
    pub conjecture_c: Option<f64>,
    #[arg(long, default_value = "out")]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub system: SystemArgs,
    #[command(flatten)]
    pub stop: StopArgs,
    #[arg(long, default_value = "skm-uniform")]
    pub rule: String,
    #[arg(long, value_delimiter = ',', default_value = "1,10,50")]
    pub beta: Vec<usize>,
    #[arg(long, default_value = "out")]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GraphKind {
    Complete,
    Ba,
}

#[derive(Debug, Clone, Args)]
pub struct GraphArgs {
    #[arg(long, value_enum)]
    pub kind: GraphKind,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 5)]
    pub ba_initial: usize,
    #[arg(long, default_value_t = 5)]
    pub ba_edges: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaConfig {
    pub experiment: ExperimentConfig,
    pub betas: Vec<usize>,
    pub error_kinds: Vec<ErrorKind>,
    pub options: GammaOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareConfig {
    pub experiment: ExperimentConfig,
    pub betas: Vec<usize>,
}

/// Recorded experiment, tagged by command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", content = "config", rename_all = "kebab-case")]
pub enum Recorded {
    Run(ExperimentConfig),
    Gamma(GammaConfig),
    Compare(CompareConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub seed: u64,
    #[serde(flatten)]
    pub recorded: Recorded,
}

impl Manifest {
    pub fn new(recorded: Recorded) -> Self {
        let seed = match &recorded {
            Recorded::Run(c) => c.seed,
            Recorded::Gamma(g) => g.experiment.seed,
            Recorded::Compare(c) => c.experiment.seed,
        };
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            recorded,
        }
    }

    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn write(&self, dir: &Path) -> anyhow::Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(dir.join("manifest.json"), text + "\n")?;
        Ok(())
    }
}

/// Failure split by exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<Error>() {
            Some(Error::InvalidConfig(msg)) => CliError::Usage(msg.clone()),
            _ => CliError::Runtime(e),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::from(anyhow::Error::from(e))
    }
}

fn usage<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}

pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            EXIT_RUNTIME
        }
    }
}

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run(args) => {
            let config = run_config(&args)?;
            run_recorded(&Recorded::Run(config), &args.output)
        }
        Command::Gamma(args) => {
            let config = gamma_config(&args)?;
            run_recorded(&Recorded::Gamma(config), &args.output)
        }
        Command::Compare(args) => {
            let config = compare_config(&args)?;
            run_recorded(&Recorded::Compare(config), &args.output)
        }
        Command::GraphGen(args) => graph_gen(&args),
        Command::Replay(args) => {
            let manifest = Manifest::read(&args.manifest).map_err(CliError::Runtime)?;
            run_recorded(&manifest.recorded, &args.output)
        }
    }
}

fn parse_source(system: &SystemArgs) -> Result<Source, CliError> {
    let mut source: Source = system.source.parse()?;
    match &mut source {
        Source::MatrixMarket { drop_zero_rows, .. } => *drop_zero_rows = system.drop_zero_rows,
        Source::AcBa {
            n_initial,
            edges_per_step,
        } => {
            *n_initial = system.ba_initial;
            *edges_per_step = system.ba_edges;
        }
        _ => {}
    }
    Ok(source)
}

fn parse_rule(rule: &str) -> Result<RuleKind, CliError> {
    Ok(rule.parse()?)
}

fn stop_criteria(stop: &StopArgs) -> StopCriteria {
    StopCriteria {
        max_iterations: stop.max_iters,
        error_tol: Some(stop.error_tol),
        residual_tol: stop.residual_tol,
    }
}

fn base_config(system: &SystemArgs) -> Result<ExperimentConfig, CliError> {
    Ok(ExperimentConfig {
        source: parse_source(system)?,
        m: system.m,
        n: system.n,
        seed: system.seed,
        normalize: system.normalize,
        ..Default::default()
    })
}

pub fn run_config(args: &RunArgs) -> Result<ExperimentConfig, CliError> {
    let rule = parse_rule(&args.rule)?;
    let schedules = match args.schedule {
        ScheduleArg::Fixed => {
            let betas = if args.beta.is_empty() {
                match rule {
                    RuleKind::Mm => return usage("rule mm needs --beta equal to the row count"),
                    _ => vec![1],
                }
            } else {
                args.beta.clone()
            };
            betas.into_iter().map(BetaSchedule::fixed).collect()
        }
        _ if !args.beta.is_empty() => return usage("--beta applies only to the fixed schedule"),
        ScheduleArg::Slowinc => vec![BetaSchedule::SlowInc],
        ScheduleArg::Rand => vec![BetaSchedule::RandUniform],
        ScheduleArg::Usedynrng => vec![BetaSchedule::UseDynRng {
            initial: args.beta_initial,
            raw: args.dynrng_raw,
        }],
    };
    let config = ExperimentConfig {
        rule,
        schedules,
        trials: args.trials,
        stop: stop_criteria(&args.stop),
        track_bound: args.track_bound,
        record_every: args.record_every,
        jobs: args.jobs,
        ..base_config(&args.system)?
    };
    config.validate()?;
    Ok(config)
}

pub fn gamma_config(args: &GammaArgs) -> Result<GammaConfig, CliError> {
    let experiment = ExperimentConfig {
        trials: 1,
        ..base_config(&args.system)?
    };
    let error_kinds = args
        .error_kind
        .iter()
        .map(|k| match k.as_str() {
            "gaussian" => Ok(ErrorKind::Gaussian),
            "bernoulli" => Ok(ErrorKind::Bernoulli { p: args.bernoulli_p }),
            other => usage(format!("unknown error kind `{other}`")),
        })
        .collect::<Result<Vec<_>, _>>()?;
    if !(args.bernoulli_p > 0.0 && args.bernoulli_p <= 1.0) {
        return usage("--bernoulli-p must lie in (0, 1]");
    }
    if args.mc_samples != 0 && args.mc_samples < 100 {
        return usage("--mc-samples must be 0 or at least 100");
    }
    Ok(GammaConfig {
        experiment,
        betas: args.beta.clone(),
        error_kinds,
        options: GammaOptions {
            mc_samples: (args.mc_samples > 0).then_some(args.mc_samples),
            conjecture_c: args.conjecture_c,
        },
    })
}

pub fn compare_config(args: &CompareArgs) -> Result<CompareConfig, CliError> {
    let experiment = ExperimentConfig {
        rule: parse_rule(&args.rule)?,
        stop: stop_criteria(&args.stop),
        trials: 1,
        ..base_config(&args.system)?
    };
    if args.beta.is_empty() {
        return usage("--beta needs at least one value");
    }
    experiment.stop.validate()?;
    Ok(CompareConfig {
        experiment,
        betas: args.beta.clone(),
    })
}

fn prepare_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .with_context(|| format!("creating {}", dir.display()))
        .map_err(CliError::Runtime)
}

fn schedule_label(s: &BetaSchedule) -> String {
    match s {
        BetaSchedule::Fixed { beta } => format!("beta_{beta}"),
        other => other.name().to_string(),
    }
}

/// Runs a recorded experiment into `out` and writes its manifest.
pub fn run_recorded(recorded: &Recorded, out: &Path) -> Result<(), CliError> {
    prepare_dir(out)?;
    match recorded {
        Recorded::Run(config) => write_run(config, out)?,
        Recorded::Gamma(config) => write_gamma(config, out)?,
        Recorded::Compare(config) => write_compare(config, out)?,
    }
    Manifest::new(recorded.clone()).write(out).map_err(CliError::Runtime)
}

fn write_run(config: &ExperimentConfig, out: &Path) -> Result<(), CliError> {
    let (system, runs) = run_experiment(config)?;
    let nested = runs.len() > 1;
    for run in &runs {
        let dir = if nested {
            let d = out.join(schedule_label(&run.schedule));
            prepare_dir(&d)?;
            d
        } else {
            out.to_path_buf()
        };
        for (t, trial) in run.trials.iter().enumerate() {
            write_metrics_csv(&trial.rows(), &dir.join(format!("trial_{t:03}.csv")))?;
        }
        write_metrics_csv(&run.mean, &dir.join("mean.csv"))?;
        let converged = run
            .trials
            .iter()
            .filter(|t| t.status == skm_core::RunStatus::Converged)
            .count();
        let last = run.mean.last().expect("mean has the start row");
        println!(
            "{}: {}x{} {} {}/{} converged, mean final error {:.3e}",
            schedule_label(&run.schedule),
            system.nrows(),
            system.ncols(),
            config.rule,
            converged,
            run.trials.len(),
            last.error_sq
        );
    }
    Ok(())
}

fn default_betas(m: usize) -> Vec<usize> {
    std::iter::successors(Some(1usize), |b| b.checked_mul(2))
        .take_while(|&b| b <= m)
        .collect()
}

fn write_gamma(config: &GammaConfig, out: &Path) -> Result<(), CliError> {
    let system = build_system(&config.experiment)?;
    let betas = if config.betas.is_empty() {
        default_betas(system.nrows())
    } else {
        config.betas.clone()
    };
    if let Some(&b) = betas.iter().find(|&&b| b == 0 || b > system.nrows()) {
        return usage(format!("sample size {b} outside 1..={}", system.nrows()));
    }
    let mut rows: Vec<GammaRow> = Vec::new();
    for (idx, kind) in config.error_kinds.iter().enumerate() {
        let mut rng = rng::stream(config.experiment.seed, 1 + idx as u64);
        let error = kind.draw(system.ncols(), &mut rng)?;
        rows.extend(gamma_table(
            &system,
            &error,
            &kind.to_string(),
            &betas,
            &config.experiment.source,
            config.options,
            &mut rng,
        )?);
    }
    let mut w = csv::Writer::from_path(out.join("gamma.csv")).map_err(|e| CliError::Runtime(e.into()))?;
    for row in &rows {
        w.serialize(row).map_err(|e| CliError::Runtime(e.into()))?;
    }
    w.flush().map_err(|e| CliError::Runtime(e.into()))?;
    println!("{} rows written to {}", rows.len(), out.join("gamma.csv").display());
    Ok(())
}

fn write_compare(config: &CompareConfig, out: &Path) -> Result<(), CliError> {
    let system = build_system(&config.experiment)?;
    let rows: Vec<CompareRow> = compare(
        &system,
        config.experiment.rule,
        &config.betas,
        config.experiment.stop,
        config.experiment.seed,
    )?;
    let mut w = csv::Writer::from_path(out.join("compare.csv")).map_err(|e| CliError::Runtime(e.into()))?;
    for row in &rows {
        w.serialize(row).map_err(|e| CliError::Runtime(e.into()))?;
        println!(
            "{:<12} beta={:<6} iterations={:<8} error={:.3e} flops={}",
            row.method,
            row.beta.map(|b| b.to_string()).unwrap_or_else(|| "-".into()),
            row.iterations,
            row.final_error_sq,
            row.flops
        );
    }
    w.flush().map_err(|e| CliError::Runtime(e.into()))?;
    Ok(())
}

fn graph_gen(args: &GraphArgs) -> Result<(), CliError> {
    let graph = match args.kind {
        GraphKind::Complete => complete_graph(args.n),
        GraphKind::Ba => barabasi_albert(
            args.n,
            args.ba_initial,
            args.ba_edges,
            &mut rng::stream(args.seed, rng::SYSTEM_STREAM),
        ),
    }
    .map_err(|e| CliError::Usage(e.to_string()))?;
    graph.write_edge_list(&args.output)?;
    println!("{} {}", graph.vertex_count(), graph.edge_count());
    Ok(())
}

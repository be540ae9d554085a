//! Reproducible experiments: seeded system construction, concurrent
//! trials, dynamic-range tables and solver comparisons.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Bernoulli, Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    calibrate_conjecture, dynamic_range_exact, dynamic_range_mc, gamma_lower_bound, gaussian_gamma_bound,
    incidence_gamma_bound,
};
use crate::error::{Error, Result};
use crate::graphs::{ac_system, barabasi_albert, complete_graph};
use crate::io::{embed_real_solution, read_matrix_market};
use crate::linalg::{normalize_rows, DenseMatrix, LinearSystem, Matrix};
use crate::rng::{self, SkmRng};
use crate::selection::RuleKind;
use crate::solvers::{
    cgls_run, kaczmarz_run, mean_rows, BetaSchedule, Instrumentation, MetricsRow, RunMetrics, RunStatus,
    StopCriteria,
};

/// Where the linear system comes from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Source {
    /// i.i.d. standard normal entries.
    Gaussian,
    /// i.i.d. entries uniform on `[0, 1]`.
    Uniform,
    /// Row `i` (1-based) has entries with variance `i/n`, so `E‖a_i‖² = i`.
    ScaledGaussian,
    /// Average consensus on the complete graph with `n` vertices.
    AcComplete,
    /// Average consensus on a preferential-attachment graph with `n` vertices.
    AcBa { n_initial: usize, edges_per_step: usize },
    /// MatrixMarket file with a seeded right-hand side in the range of `A`.
    MatrixMarket { path: PathBuf, drop_zero_rows: bool },
}

impl Source {
    pub fn is_incidence(&self) -> bool {
        matches!(self, Source::AcComplete | Source::AcBa { .. })
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Gaussian => f.write_str("gaussian"),
            Source::Uniform => f.write_str("uniform"),
            Source::ScaledGaussian => f.write_str("scaled-gaussian"),
            Source::AcComplete => f.write_str("ac-complete"),
            Source::AcBa { .. } => f.write_str("ac-ba"),
            Source::MatrixMarket { path, .. } => write!(f, "matrix-market:{}", path.display()),
        }
    }
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(path) = s.strip_prefix("matrix-market:") {
            if path.is_empty() {
                return Err(Error::InvalidConfig("matrix-market source needs a path".into()));
            }
            return Ok(Source::MatrixMarket {
                path: PathBuf::from(path),
                drop_zero_rows: false,
            });
        }
        match s {
            "gaussian" => Ok(Source::Gaussian),
            "uniform" => Ok(Source::Uniform),
            "scaled-gaussian" => Ok(Source::ScaledGaussian),
            "ac-complete" => Ok(Source::AcComplete),
            "ac-ba" => Ok(Source::AcBa {
                n_initial: 5,
                edges_per_step: 5,
            }),
            other => Err(Error::InvalidConfig(format!("unknown source `{other}`"))),
        }
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub source: Source,
    /// Row count for synthetic sources; ignored for graph and file sources.
    pub m: usize,
    /// Column count, or vertex count for graph sources.
    pub n: usize,
    pub rule: RuleKind,
    /// One set of trials per schedule.
    pub schedules: Vec<BetaSchedule>,
    pub trials: usize,
    pub seed: u64,
    pub stop: StopCriteria,
    pub normalize: bool,
    pub track_bound: bool,
    pub record_every: usize,
    /// Worker threads for trials; zero lets the pool decide.
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            source: Source::Gaussian,
            m: 2000,
            n: 50,
            rule: RuleKind::SkmUniform,
            schedules: vec![BetaSchedule::fixed(1)],
            trials: 20,
            seed: 0,
            stop: StopCriteria::default(),
            normalize: false,
            track_bound: false,
            record_every: 1,
            jobs: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let synthetic = matches!(self.source, Source::Gaussian | Source::Uniform | Source::ScaledGaussian);
        if synthetic && (self.m == 0 || self.n == 0) {
            return Err(Error::InvalidConfig("m and n must be positive".into()));
        }
        if self.source.is_incidence() && self.n < 2 {
            return Err(Error::InvalidConfig("graph sources need n >= 2".into()));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be positive".into()));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidConfig("record_every must be positive".into()));
        }
        if self.schedules.is_empty() {
            return Err(Error::InvalidConfig("no sample size given".into()));
        }
        self.stop.validate()
    }
}

fn dense_from<F: FnMut(usize) -> f64>(m: usize, n: usize, mut entry: F) -> Result<Matrix> {
    let data = (0..m * n).map(|k| entry(k / n)).collect();
    Ok(DenseMatrix::new(m, n, data)?.into())
}

fn standard_normals(rng: &mut SkmRng, len: usize) -> Vec<f64> {
    (0..len).map(|_| StandardNormal.sample(rng)).collect()
}

/// Builds the system from stream 0 of the master seed.
pub fn build_system(config: &ExperimentConfig) -> Result<LinearSystem> {
    let mut rng = rng::stream(config.seed, rng::SYSTEM_STREAM);
    let (m, n) = (config.m, config.n);
    let system = match &config.source {
        Source::Gaussian | Source::Uniform | Source::ScaledGaussian => {
            let matrix = match config.source {
                Source::Gaussian => dense_from(m, n, |_| StandardNormal.sample(&mut rng))?,
                Source::Uniform => dense_from(m, n, |_| rng.random::<f64>())?,
                _ => {
                    let scales: Vec<Normal<f64>> = (1..=m)
                        .map(|i| Normal::new(0.0, (i as f64 / n as f64).sqrt()).expect("positive scale"))
                        .collect();
                    dense_from(m, n, |i| scales[i].sample(&mut rng))?
                }
            };
            let x_star = standard_normals(&mut rng, n);
            LinearSystem::from_solution(matrix, &x_star)?
        }
        Source::AcComplete => {
            let graph = complete_graph(n)?;
            ac_system(&graph, &standard_normals(&mut rng, n))?
        }
        Source::AcBa {
            n_initial,
            edges_per_step,
        } => {
            let graph = barabasi_albert(n, *n_initial, *edges_per_step, &mut rng)?;
            ac_system(&graph, &standard_normals(&mut rng, n))?
        }
        Source::MatrixMarket { path, drop_zero_rows } => {
            let mut matrix = read_matrix_market(path)?;
            if *drop_zero_rows {
                matrix = matrix.without_empty_rows().0;
            }
            embed_real_solution(matrix.into(), config.seed)?
        }
    };
    if config.normalize {
        normalize_rows(&system)
    } else {
        Ok(system)
    }
}

/// Trials of one schedule plus their per-iteration mean.
#[derive(Debug, Clone)]
pub struct ScheduleRuns {
    pub schedule: BetaSchedule,
    pub trials: Vec<RunMetrics>,
    pub mean: Vec<MetricsRow>,
}

fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Runs every trial of one schedule; trial `t` draws from stream `1 + t`.
pub fn run_trials(system: &LinearSystem, config: &ExperimentConfig, schedule: BetaSchedule) -> Result<ScheduleRuns> {
    let instrumentation = Instrumentation {
        x0: None,
        track_bound: config.track_bound,
        record_every: config.record_every,
    };
    let trials: Vec<RunMetrics> = with_pool(config.jobs, || {
        (0..config.trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = rng::trial_stream(config.seed, t);
                kaczmarz_run(system, config.rule, schedule, config.stop, &mut rng, &instrumentation)
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let rows: Vec<Vec<MetricsRow>> = trials.iter().map(RunMetrics::rows).collect();
    Ok(ScheduleRuns {
        schedule,
        mean: mean_rows(&rows),
        trials,
    })
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<(LinearSystem, Vec<ScheduleRuns>)> {
    config.validate()?;
    let system = build_system(config)?;
    let runs = config
        .schedules
        .iter()
        .map(|&s| run_trials(&system, config, s))
        .collect::<Result<_>>()?;
    Ok((system, runs))
}

/// Error vector used for dynamic-range tables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ErrorKind {
    Gaussian,
    Bernoulli { p: f64 },
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ErrorKind::Gaussian => f.write_str("gaussian"),
            ErrorKind::Bernoulli { p } => write!(f, "bernoulli({p})"),
        }
    }
}

impl ErrorKind {
    /// Draws a nonzero error vector; all-zero Bernoulli draws are repeated.
    pub fn draw<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<f64>> {
        match *self {
            ErrorKind::Gaussian => Ok((0..n).map(|_| StandardNormal.sample(rng)).collect()),
            ErrorKind::Bernoulli { p } => {
                if p <= 0.0 {
                    return Err(Error::InvalidConfig("bernoulli error needs p > 0".into()));
                }
                let dist = Bernoulli::new(p).map_err(|e| Error::InvalidConfig(format!("bernoulli: {e}")))?;
                if n == 0 {
                    return Err(Error::InvalidConfig("error vector needs n >= 1".into()));
                }
                loop {
                    let e: Vec<f64> = (0..n).map(|_| if dist.sample(rng) { 1.0 } else { 0.0 }).collect();
                    if e.iter().any(|&v| v != 0.0) {
                        return Ok(e);
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaOptions {
    /// Monte Carlo samples per `β`; `None` skips the estimate.
    pub mc_samples: Option<usize>,
    /// Constant of the `c β / ln β` curve; calibrated when `None`.
    pub conjecture_c: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaRow {
    pub error_kind: String,
    pub beta: usize,
    pub gamma_exact: f64,
    pub gamma_mc: Option<f64>,
    pub gamma_mc_half_width: Option<f64>,
    pub lower_bound: f64,
    pub gaussian_bound: Option<f64>,
    pub conjectured: Option<f64>,
    pub incidence_bound: Option<f64>,
}

/// Dynamic range over `betas` at `x = x_ref + e`.
///
/// The conjectured curve is calibrated to pass through the measured `γ` at
/// the smallest `β ≥ 2` unless a constant is supplied.
pub fn gamma_table<R: Rng + ?Sized>(
    system: &LinearSystem,
    error: &[f64],
    error_label: &str,
    betas: &[usize],
    source: &Source,
    options: GammaOptions,
    rng: &mut R,
) -> Result<Vec<GammaRow>> {
    let x: Vec<f64> = system.x_ref().iter().zip(error).map(|(a, e)| a + e).collect();
    let r = system.residual(&x)?;
    let (m, n) = (system.nrows(), system.ncols());
    let gaussian = matches!(source, Source::Gaussian);
    let mut rows = Vec::with_capacity(betas.len());
    for &beta in betas {
        let gamma_exact = dynamic_range_exact(&r, beta)?;
        let mc = match options.mc_samples {
            Some(s) => Some(dynamic_range_mc(&r, beta, s, rng)?),
            None => None,
        };
        rows.push(GammaRow {
            error_kind: error_label.to_string(),
            beta,
            gamma_exact,
            gamma_mc: mc.map(|v| v.0),
            gamma_mc_half_width: mc.map(|v| v.1),
            lower_bound: gamma_lower_bound(system, &x, beta)?,
            gaussian_bound: if gaussian && beta >= 2 {
                Some(gaussian_gamma_bound(m, m, beta, n, 0.0)?)
            } else {
                None
            },
            conjectured: None,
            incidence_bound: if source.is_incidence() {
                Some(incidence_gamma_bound(&r, beta)?)
            } else {
                None
            },
        });
    }
    let c = match options.conjecture_c {
        Some(c) => Some(c),
        None => rows
            .iter()
            .filter(|r| r.beta >= 2)
            .min_by_key(|r| r.beta)
            .map(|r| calibrate_conjecture(r.beta, r.gamma_exact))
            .transpose()?,
    };
    if let Some(c) = c {
        for row in rows.iter_mut().filter(|r| r.beta >= 2) {
            let b = row.beta as f64;
            row.conjectured = Some(c * b / b.ln());
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub method: String,
    pub beta: Option<usize>,
    pub iterations: usize,
    pub final_error_sq: f64,
    pub flops: u64,
    pub elapsed_s: f64,
    pub status: RunStatus,
}

fn compare_row(method: String, beta: Option<usize>, run: &RunMetrics) -> CompareRow {
    CompareRow {
        method,
        beta,
        iterations: run.iterations,
        final_error_sq: run.final_error_sq(),
        flops: run.total_flops(),
        elapsed_s: run.elapsed_seconds(),
        status: run.status,
    }
}

/// One run of `rule` per sample size plus CGLS, all under `stop`.
pub fn compare(
    system: &LinearSystem,
    rule: RuleKind,
    betas: &[usize],
    stop: StopCriteria,
    seed: u64,
) -> Result<Vec<CompareRow>> {
    let instrumentation = Instrumentation {
        record_every: stop.max_iterations.max(1),
        ..Default::default()
    };
    let mut rows = Vec::with_capacity(betas.len() + 1);
    for &beta in betas {
        let mut rng = rng::trial_stream(seed, 0);
        let run = kaczmarz_run(system, rule, BetaSchedule::fixed(beta), stop, &mut rng, &instrumentation)?;
        rows.push(compare_row(rule.name().to_string(), Some(beta), &run));
    }
    let cgls = cgls_run(system, stop)?;
    rows.push(compare_row("cgls".into(), None, &cgls));
    Ok(rows)
}

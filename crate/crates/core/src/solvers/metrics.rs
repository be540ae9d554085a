use serde::{Deserialize, Serialize};

/// One recorded iteration. `k = 0` is the starting point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    /// Sample size used for this iteration; 0 at `k = 0` and for CGLS.
    pub beta: usize,
    pub error_sq: f64,
    pub residual_sq: f64,
    pub cumulative_flops: u64,
    pub elapsed_seconds: f64,
    pub selected_row: Option<usize>,
    /// Contraction factor evaluated at the iterate this step started from.
    pub bound_factor: Option<f64>,
    /// Running product of factors times the initial squared error.
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub records: Vec<IterationRecord>,
    pub status: RunStatus,
    /// Iterations performed, which can exceed the last recorded `k` only
    /// when records are thinned.
    pub iterations: usize,
    pub final_iterate: Vec<f64>,
}

impl RunMetrics {
    pub fn last(&self) -> &IterationRecord {
        self.records.last().expect("a run always records its start")
    }

    pub fn final_error_sq(&self) -> f64 {
        self.last().error_sq
    }

    pub fn total_flops(&self) -> u64 {
        self.last().cumulative_flops
    }

    pub fn elapsed_seconds(&self) -> f64 {
        self.last().elapsed_seconds
    }

    /// Equality ignoring wall-clock time.
    pub fn same_trace(&self, other: &RunMetrics) -> bool {
        self.status == other.status
            && self.iterations == other.iterations
            && self.final_iterate == other.final_iterate
            && self.records.len() == other.records.len()
            && self.records.iter().zip(&other.records).all(|(a, b)| {
                IterationRecord {
                    elapsed_seconds: 0.0,
                    ..a.clone()
                } == IterationRecord {
                    elapsed_seconds: 0.0,
                    ..b.clone()
                }
            })
    }

    pub fn rows(&self) -> Vec<MetricsRow> {
        self.records.iter().map(MetricsRow::from).collect()
    }
}

/// Flat row written to metrics CSV files.
///
/// Aggregated rows average `beta` and `flops`, hence the float columns.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub iteration: usize,
    pub beta: f64,
    pub error_sq: f64,
    pub residual_sq: f64,
    pub flops: f64,
    pub elapsed_s: f64,
    pub bound: Option<f64>,
}

impl From<&IterationRecord> for MetricsRow {
    fn from(r: &IterationRecord) -> Self {
        Self {
            iteration: r.k,
            beta: r.beta as f64,
            error_sq: r.error_sq,
            residual_sq: r.residual_sq,
            flops: r.cumulative_flops as f64,
            elapsed_s: r.elapsed_seconds,
            bound: r.bound,
        }
    }
}

/// Per-index arithmetic mean over trials, truncated to the shortest trial.
///
/// The bound column is present only when every trial recorded one.
pub fn mean_rows(trials: &[Vec<MetricsRow>]) -> Vec<MetricsRow> {
    let Some(len) = trials.iter().map(Vec::len).min() else {
        return Vec::new();
    };
    let count = trials.len() as f64;
    (0..len)
        .map(|i| {
            let mean = |f: &dyn Fn(&MetricsRow) -> f64| trials.iter().map(|t| f(&t[i])).sum::<f64>() / count;
            let bound = trials
                .iter()
                .map(|t| t[i].bound)
                .sum::<Option<f64>>()
                .map(|s| s / count);
            MetricsRow {
                iteration: trials[0][i].iteration,
                beta: mean(&|r| r.beta),
                error_sq: mean(&|r| r.error_sq),
                residual_sq: mean(&|r| r.residual_sq),
                flops: mean(&|r| r.flops),
                elapsed_s: mean(&|r| r.elapsed_s),
                bound,
            }
        })
        .collect()
}

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the sample size `β_k` is chosen at iteration `k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BetaSchedule {
    Fixed { beta: usize },
    /// `β_k = min(k, m)`
    SlowInc,
    /// `β_k` uniform on `1..=m`, drawn afresh every iteration.
    RandUniform,
    /// `β_k` from the dynamic range of the previous sub-residual.
    ///
    /// `raw` switches to `⌈max(m, ·)⌉`, which always evaluates to `m`.
    UseDynRng { initial: usize, raw: bool },
}

/// Norms of the sub-residual sampled in the previous iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubResidualStats {
    pub inf_norm: f64,
    pub two_norm: f64,
}

impl SubResidualStats {
    pub fn of(values: &[f64]) -> Self {
        let inf_norm = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let two_norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        Self { inf_norm, two_norm }
    }
}

impl BetaSchedule {
    pub fn fixed(beta: usize) -> Self {
        BetaSchedule::Fixed { beta }
    }

    pub fn use_dyn_rng(initial: usize) -> Self {
        BetaSchedule::UseDynRng {
            initial,
            raw: false,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            BetaSchedule::Fixed { .. } => "fixed",
            BetaSchedule::SlowInc => "slowinc",
            BetaSchedule::RandUniform => "rand",
            BetaSchedule::UseDynRng { .. } => "usedynrng",
        }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        let check = |beta: usize, what: &str| {
            if beta == 0 || beta > m {
                Err(Error::InvalidConfig(format!("{what} {beta} outside 1..={m}")))
            } else {
                Ok(())
            }
        };
        match *self {
            BetaSchedule::Fixed { beta } => check(beta, "sample size"),
            BetaSchedule::UseDynRng { initial, .. } => check(initial, "initial sample size"),
            BetaSchedule::SlowInc | BetaSchedule::RandUniform => Ok(()),
        }
    }

    /// Sample size for iteration `k ≥ 1`, always in `1..=m`.
    pub fn next_beta<R: Rng + ?Sized>(
        &self,
        k: usize,
        m: usize,
        n: usize,
        last: Option<SubResidualStats>,
        rng: &mut R,
    ) -> usize {
        let beta = match *self {
            BetaSchedule::Fixed { beta } => beta,
            BetaSchedule::SlowInc => k,
            BetaSchedule::RandUniform => rng.random_range(1..=m.max(1)),
            BetaSchedule::UseDynRng { initial, raw } => match last {
                Some(s) if k > 1 && s.two_norm > 0.0 => {
                    let ratio = (m as f64 * s.inf_norm / (n as f64 * s.two_norm)).ceil();
                    let value = if raw { ratio.max(m as f64) } else { ratio };
                    if value >= m as f64 {
                        m
                    } else {
                        value as usize
                    }
                }
                _ => initial,
            },
        };
        beta.clamp(1, m.max(1))
    }
}

/// When a run stops. The run ends at the first criterion met.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopCriteria {
    pub max_iterations: usize,
    /// Threshold on `‖x_k − x_ref‖²`.
    pub error_tol: Option<f64>,
    /// Threshold on `‖A x_k − b‖²`.
    pub residual_tol: Option<f64>,
}

impl Default for StopCriteria {
    fn default() -> Self {
        Self {
            max_iterations: 1_000_000,
            error_tol: Some(1e-6),
            residual_tol: None,
        }
    }
}

impl StopCriteria {
    pub fn iterations(max_iterations: usize) -> Self {
        Self {
            max_iterations,
            error_tol: None,
            residual_tol: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, tol) in [("error", self.error_tol), ("residual", self.residual_tol)] {
            if let Some(t) = tol {
                if !(t >= 0.0) || !t.is_finite() {
                    return Err(Error::InvalidConfig(format!("{name} tolerance must be finite and nonnegative")));
                }
            }
        }
        if self.max_iterations == usize::MAX && self.error_tol.is_none() && self.residual_tol.is_none() {
            return Err(Error::InvalidConfig("no finite stopping criterion".into()));
        }
        Ok(())
    }

    pub fn met(&self, error_sq: f64, residual_sq: Option<f64>) -> bool {
        self.error_tol.is_some_and(|t| error_sq <= t)
            || matches!((self.residual_tol, residual_sq), (Some(t), Some(r)) if r <= t)
    }
}

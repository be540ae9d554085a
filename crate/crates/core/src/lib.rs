//! Row-action solvers for consistent linear systems, from randomized
//! Kaczmarz through sampling Kaczmarz-Motzkin to Motzkin's greedy method,
//! with exact dynamic-range computation and the associated contraction
//! bounds.

pub mod analysis;
pub mod error;
pub mod experiment;
pub mod graphs;
pub mod io;
pub mod linalg;
pub mod rng;
pub mod selection;
pub mod solvers;

pub use error::{Error, Result};
pub use linalg::{CsrMatrix, DenseMatrix, LinearSystem, Matrix};
pub use selection::{ArgmaxWeights, RankedResidual, RuleKind};
pub use solvers::{BetaSchedule, RunMetrics, RunStatus, StopCriteria};

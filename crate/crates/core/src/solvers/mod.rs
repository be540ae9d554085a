//! Row-action solvers, the block step used for comparison, and CGLS.

mod block;
mod cgls;
mod flops;
mod kaczmarz;
mod metrics;
mod schedule;

pub use block::block_kaczmarz_step;
pub use cgls::cgls_run;
pub use flops::{cgls_flops, flops_of_iteration, NnzTouched};
pub use kaczmarz::{kaczmarz_run, Instrumentation};
pub use metrics::{mean_rows, IterationRecord, MetricsRow, RunMetrics, RunStatus};
pub use schedule::{BetaSchedule, StopCriteria, SubResidualStats};

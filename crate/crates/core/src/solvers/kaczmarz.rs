use std::time::Instant;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::analysis::{dynamic_range_ranked, factor_value, uniform_epsilon};
use crate::error::{Error, Result};
use crate::linalg::{norm_sq, project_row_in_place, LinearSystem};
use crate::selection::{
    argmax_position, argmax_weights, generalized_marginals, outranks, rank_residuals, RkSampler, RuleKind,
    SubsetSampler,
};
use crate::solvers::flops::{flops_of_iteration, NnzTouched};
use crate::solvers::metrics::{IterationRecord, RunMetrics, RunStatus};
use crate::solvers::schedule::{BetaSchedule, StopCriteria, SubResidualStats};

/// Optional measurements layered on top of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Instrumentation {
    /// Starting iterate; falls back to the system's start, then to zero.
    pub x0: Option<Vec<f64>>,
    /// Evaluate the per-iteration contraction factor and its running product.
    pub track_bound: bool,
    /// Keep every `record_every`-th iteration plus the final one.
    pub record_every: usize,
}

impl Default for Instrumentation {
    fn default() -> Self {
        Self {
            x0: None,
            track_bound: false,
            record_every: 1,
        }
    }
}

struct Step {
    row: usize,
    nnz: NnzTouched,
    stats: Option<SubResidualStats>,
}

enum Selector {
    Rk(RkSampler),
    Mm,
    Uniform { sampler: SubsetSampler, sub: Vec<f64> },
    Exact,
}

fn check_rule(rule: RuleKind, schedule: &BetaSchedule, m: usize) -> Result<()> {
    let required = match rule {
        RuleKind::Rk => Some(1),
        RuleKind::Mm => Some(m),
        RuleKind::SkmUniform | RuleKind::SkmExact => None,
    };
    match (required, schedule) {
        (None, _) => Ok(()),
        (Some(b), BetaSchedule::Fixed { beta }) if *beta == b => Ok(()),
        (Some(b), _) => Err(Error::InvalidConfig(format!(
            "rule {rule} requires the fixed schedule with sample size {b}"
        ))),
    }
}

/// Runs the Kaczmarz iteration `x_k = x_{k−1} − (a_t·x_{k−1} − b_t)/‖a_t‖² a_t`
/// with row `t` chosen by `rule` and sample sizes from `schedule`.
pub fn kaczmarz_run<R: Rng + ?Sized>(
    system: &LinearSystem,
    rule: RuleKind,
    schedule: BetaSchedule,
    stop: StopCriteria,
    rng: &mut R,
    instrumentation: &Instrumentation,
) -> Result<RunMetrics> {
    let (m, n) = (system.nrows(), system.ncols());
    if !system.is_consistent() {
        return Err(Error::InvalidInput("kaczmarz_run requires a consistent system".into()));
    }
    stop.validate()?;
    schedule.validate(m)?;
    check_rule(rule, &schedule, m)?;
    if instrumentation.record_every == 0 {
        return Err(Error::InvalidConfig("record_every must be positive".into()));
    }
    let mut x = match instrumentation.x0.as_deref().or(system.start()) {
        Some(x0) if x0.len() != n => {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x0.len(),
            })
        }
        Some(x0) => x0.to_vec(),
        None => vec![0.0; n],
    };

    let matrix = system.matrix();
    let norms = system.row_norms_sq();
    let mut selector = match rule {
        RuleKind::Rk => Selector::Rk(RkSampler::new(norms)?),
        RuleKind::Mm => Selector::Mm,
        RuleKind::SkmUniform => Selector::Uniform {
            sampler: SubsetSampler::new(m),
            sub: Vec::with_capacity(m),
        },
        RuleKind::SkmExact => Selector::Exact,
    };
    let sigma_sq = if instrumentation.track_bound {
        Some(system.sigma_min_sq()?)
    } else {
        None
    };
    let residual_sq_of = |x: &[f64]| system.residual(x).map(|r| norm_sq(&r));

    let e0 = system.error_sq(&x);
    let r0 = residual_sq_of(&x)?;
    let mut bound = sigma_sq.map(|_| e0);
    let mut records = vec![IterationRecord {
        k: 0,
        beta: 0,
        error_sq: e0,
        residual_sq: r0,
        cumulative_flops: 0,
        elapsed_seconds: 0.0,
        selected_row: None,
        bound_factor: None,
        bound,
    }];
    if stop.met(e0, Some(r0)) {
        return Ok(RunMetrics {
            records,
            status: RunStatus::Converged,
            iterations: 0,
            final_iterate: x,
        });
    }

    let mut flops = 0u64;
    let mut elapsed = 0.0f64;
    let mut last_stats: Option<SubResidualStats> = None;
    let mut status = RunStatus::BudgetExhausted;
    let mut iterations = 0;

    for k in 1..=stop.max_iterations {
        let beta = schedule.next_beta(k, m, n, last_stats, rng);
        let factor = match sigma_sq {
            Some(s) => contraction_at(system, &x, rule, beta, s)?,
            None => None,
        };

        let started = Instant::now();
        let step = select_row(system, &mut selector, &x, beta, rng)?;
        project_row_in_place(&mut x, matrix.row(step.row), system.rhs()[step.row], norms[step.row])?;
        elapsed += started.elapsed().as_secs_f64();

        flops += flops_of_iteration(rule, beta, m, n, step.nnz);
        if step.stats.is_some() {
            last_stats = step.stats;
        }
        iterations = k;

        if let (Some(b), Some(f)) = (bound.as_mut(), factor) {
            *b *= f;
        }
        let error_sq = system.error_sq(&x);
        let record = k % instrumentation.record_every == 0 || k == stop.max_iterations;
        let residual_sq = if record || stop.residual_tol.is_some() {
            Some(residual_sq_of(&x)?)
        } else {
            None
        };
        let done = stop.met(error_sq, residual_sq);
        if record || done {
            let residual_sq = match residual_sq {
                Some(v) => v,
                None => residual_sq_of(&x)?,
            };
            records.push(IterationRecord {
                k,
                beta,
                error_sq,
                residual_sq,
                cumulative_flops: flops,
                elapsed_seconds: elapsed,
                selected_row: Some(step.row),
                bound_factor: factor,
                bound,
            });
        }
        if done {
            status = RunStatus::Converged;
            break;
        }
    }

    Ok(RunMetrics {
        records,
        status,
        iterations,
        final_iterate: x,
    })
}

fn select_row<R: Rng + ?Sized>(
    system: &LinearSystem,
    selector: &mut Selector,
    x: &[f64],
    beta: usize,
    rng: &mut R,
) -> Result<Step> {
    let matrix = system.matrix();
    let b = system.rhs();
    let m = system.nrows();
    match selector {
        Selector::Rk(sampler) => {
            let row = sampler.sample(rng);
            let nnz = matrix.row(row).nnz();
            Ok(Step {
                row,
                nnz: NnzTouched {
                    sampled: nnz,
                    selected: nnz,
                    matrix: matrix.nnz(),
                },
                stats: None,
            })
        }
        Selector::Mm => {
            let r = system.residual(x)?;
            let mut best = 0;
            for i in 1..m {
                if outranks(r[i] * r[i], i, r[best] * r[best], best) {
                    best = i;
                }
            }
            Ok(Step {
                row: best,
                nnz: NnzTouched {
                    sampled: matrix.nnz(),
                    selected: matrix.row(best).nnz(),
                    matrix: matrix.nnz(),
                },
                stats: Some(SubResidualStats::of(&r)),
            })
        }
        Selector::Uniform { sampler, sub } => {
            let tau = sampler.sample(beta, rng)?;
            sub.clear();
            let mut sampled = 0;
            for &i in tau {
                let row = matrix.row(i);
                sampled += row.nnz();
                sub.push(row.dot(x) - b[i]);
            }
            let stats = SubResidualStats::of(sub);
            let sq: Vec<f64> = sub.iter().map(|v| v * v).collect();
            let pos = argmax_position(tau, &sq).expect("sample is nonempty");
            let row = tau[pos];
            Ok(Step {
                row,
                nnz: NnzTouched {
                    sampled,
                    selected: matrix.row(row).nnz(),
                    matrix: matrix.nnz(),
                },
                stats: Some(stats),
            })
        }
        Selector::Exact => {
            let r = system.residual(x)?;
            let ranked = rank_residuals(&r)?;
            let p = generalized_marginals(&ranked, system.row_norms_sq(), beta)?;
            let dist = WeightedIndex::new(&p).map_err(|e| Error::InvalidInput(format!("marginals: {e}")))?;
            let row = dist.sample(rng);
            Ok(Step {
                row,
                nnz: NnzTouched {
                    sampled: matrix.nnz(),
                    selected: matrix.row(row).nnz(),
                    matrix: matrix.nnz(),
                },
                stats: Some(SubResidualStats::of(&r)),
            })
        }
    }
}

/// Contraction factor at `x` for one step of `rule` with sample size `beta`.
///
/// Uniform subsets of rows with unequal norms use the `ε`-scaled factor;
/// every other rule samples from the row-norm-weighted subset distribution.
/// `None` once the residual vanishes.
fn contraction_at(
    system: &LinearSystem,
    x: &[f64],
    rule: RuleKind,
    beta: usize,
    sigma_sq: f64,
) -> Result<Option<f64>> {
    let r = system.residual(x)?;
    if r.iter().all(|&v| v == 0.0) {
        return Ok(None);
    }
    let ranked = rank_residuals(&r)?;
    let weights = argmax_weights(&ranked, beta)?;
    let gamma = dynamic_range_ranked(&ranked, &weights)?;
    let weighted_norms = weights.weighted_sum(system.row_norms_sq());
    let epsilon = match rule {
        RuleKind::SkmUniform => uniform_epsilon(system.row_norms_sq(), beta),
        _ => 1.0,
    };
    Ok(Some(factor_value(sigma_sq, gamma, weighted_norms, epsilon)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{normalize_rows, DenseMatrix, Matrix};
    use crate::rng::stream;

    fn identity_system(b: &[f64]) -> LinearSystem {
        let a: Matrix = DenseMatrix::identity(b.len()).into();
        LinearSystem::new(a, b.to_vec()).unwrap()
    }

    #[test]
    fn motzkin_hand_trace() {
        let sys = identity_system(&[3.0, 4.0]);
        let mut rng = stream(0, 1);
        let stop = StopCriteria {
            max_iterations: 10,
            error_tol: Some(0.0),
            residual_tol: None,
        };
        let run = kaczmarz_run(&sys, RuleKind::Mm, BetaSchedule::fixed(2), stop, &mut rng, &Instrumentation::default())
            .unwrap();
        assert_eq!(run.iterations, 2);
        assert_eq!(run.status, RunStatus::Converged);
        assert_eq!(run.records[1].selected_row, Some(1));
        assert_eq!(run.records[2].selected_row, Some(0));
        assert_eq!(run.final_iterate, vec![3.0, 4.0]);
    }

    #[test]
    fn start_at_solution_makes_no_progress() {
        let sys = identity_system(&[1.0, -2.0]);
        let instr = Instrumentation {
            x0: Some(vec![1.0, -2.0]),
            ..Default::default()
        };
        for (rule, beta) in [(RuleKind::Rk, 1), (RuleKind::Mm, 2), (RuleKind::SkmUniform, 2), (RuleKind::SkmExact, 1)] {
            let run = kaczmarz_run(
                &sys,
                rule,
                BetaSchedule::fixed(beta),
                StopCriteria::iterations(5),
                &mut stream(3, 1),
                &instr,
            )
            .unwrap();
            assert!(run.records.iter().all(|r| r.error_sq == 0.0));
        }
    }

    #[test]
    fn rk_identity_expectation() {
        // E‖e_k‖² = (1/2)^k ‖e_0‖² on A = I₂
        let sys = normalize_rows(&identity_system(&[1.0, 1.0])).unwrap();
        let trials = 10_000;
        let mut total = 0.0;
        for t in 0..trials {
            let run = kaczmarz_run(
                &sys,
                RuleKind::Rk,
                BetaSchedule::fixed(1),
                StopCriteria::iterations(5),
                &mut stream(42, 1 + t),
                &Instrumentation::default(),
            )
            .unwrap();
            total += run.records[5].error_sq;
        }
        let mean = total / trials as f64;
        let expected = 2.0 * 0.5f64.powi(5);
        assert!((mean - expected).abs() <= 0.05 * expected, "mean {mean} expected {expected}");
    }

    #[test]
    fn rule_schedule_mismatch_rejected() {
        let sys = identity_system(&[1.0, 2.0, 3.0]);
        let mut rng = stream(0, 1);
        let instr = Instrumentation::default();
        let stop = StopCriteria::iterations(1);
        assert!(kaczmarz_run(&sys, RuleKind::Rk, BetaSchedule::fixed(2), stop, &mut rng, &instr).is_err());
        assert!(kaczmarz_run(&sys, RuleKind::Mm, BetaSchedule::SlowInc, stop, &mut rng, &instr).is_err());
        assert!(kaczmarz_run(&sys, RuleKind::Mm, BetaSchedule::fixed(3), stop, &mut rng, &instr).is_ok());
    }

    #[test]
    fn inconsistent_rejected() {
        let a: Matrix = DenseMatrix::from_rows(&[&[1.0], &[1.0]]).unwrap().into();
        let sys = LinearSystem::new(a, vec![0.0, 1.0]).unwrap();
        let r = kaczmarz_run(
            &sys,
            RuleKind::Rk,
            BetaSchedule::fixed(1),
            StopCriteria::iterations(1),
            &mut stream(0, 1),
            &Instrumentation::default(),
        );
        assert!(r.is_err());
    }

    #[test]
    fn thinning_keeps_start_and_end() {
        let sys = identity_system(&[1.0, 2.0, 3.0, 4.0]);
        let instr = Instrumentation {
            record_every: 3,
            ..Default::default()
        };
        let run = kaczmarz_run(
            &sys,
            RuleKind::SkmUniform,
            BetaSchedule::fixed(2),
            StopCriteria::iterations(7),
            &mut stream(9, 1),
            &instr,
        )
        .unwrap();
        let ks: Vec<usize> = run.records.iter().map(|r| r.k).collect();
        assert_eq!(ks, vec![0, 3, 6, 7]);
    }
}

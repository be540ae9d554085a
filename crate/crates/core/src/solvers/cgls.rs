use std::time::Instant;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm_sq, LinearSystem};
use crate::solvers::flops::cgls_flops;
use crate::solvers::metrics::{IterationRecord, RunMetrics, RunStatus};
use crate::solvers::schedule::StopCriteria;

/// Conjugate gradients on `AᵀA x = Aᵀb` without forming `AᵀA`.
///
/// Starts from the system's start point, or zero. The run also ends when
/// the normal-equation residual vanishes, which is reported as converged.
pub fn cgls_run(system: &LinearSystem, stop: StopCriteria) -> Result<RunMetrics> {
    stop.validate()?;
    let (m, n) = (system.nrows(), system.ncols());
    if m == 0 || n == 0 {
        return Err(Error::InvalidInput("empty system".into()));
    }
    let matrix = system.matrix();
    let step_flops = cgls_flops(m, n, matrix.nnz());

    let mut x = system.start().map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; n]);
    let mut r: Vec<f64> = system.residual(&x)?.iter().map(|v| -v).collect();
    let mut s = matrix.tr_mul_vec(&r)?;
    let mut p = s.clone();
    let mut gamma = norm_sq(&s);

    let e0 = system.error_sq(&x);
    let r0 = norm_sq(&r);
    let mut records = vec![IterationRecord {
        k: 0,
        beta: 0,
        error_sq: e0,
        residual_sq: r0,
        cumulative_flops: 0,
        elapsed_seconds: 0.0,
        selected_row: None,
        bound_factor: None,
        bound: None,
    }];
    let mut status = if stop.met(e0, Some(r0)) || gamma == 0.0 {
        RunStatus::Converged
    } else {
        RunStatus::BudgetExhausted
    };
    let mut flops = 0;
    let mut elapsed = 0.0;
    let mut iterations = 0;

    if status == RunStatus::BudgetExhausted {
        for k in 1..=stop.max_iterations {
            let started = Instant::now();
            let q = matrix.mul_vec(&p)?;
            let qq = norm_sq(&q);
            if qq == 0.0 {
                status = RunStatus::Converged;
                break;
            }
            let alpha = gamma / qq;
            x.iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * p);
            r.iter_mut().zip(&q).for_each(|(r, q)| *r -= alpha * q);
            s = matrix.tr_mul_vec(&r)?;
            let gamma_next = dot(&s, &s);
            let ratio = gamma_next / gamma;
            p.iter_mut().zip(&s).for_each(|(p, s)| *p = s + ratio * *p);
            gamma = gamma_next;
            elapsed += started.elapsed().as_secs_f64();
            flops += step_flops;
            iterations = k;

            let error_sq = system.error_sq(&x);
            let residual_sq = norm_sq(&r);
            records.push(IterationRecord {
                k,
                beta: 0,
                error_sq,
                residual_sq,
                cumulative_flops: flops,
                elapsed_seconds: elapsed,
                selected_row: None,
                bound_factor: None,
                bound: None,
            });
            if stop.met(error_sq, Some(residual_sq)) || gamma == 0.0 {
                status = RunStatus::Converged;
                break;
            }
        }
    }
    Ok(RunMetrics {
        records,
        status,
        iterations,
        final_iterate: x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{DenseMatrix, Matrix};

    #[test]
    fn identity_in_one_iteration() {
        let a: Matrix = DenseMatrix::identity(4).into();
        let sys = LinearSystem::new(a, vec![1.0, -2.0, 3.0, 0.5]).unwrap();
        let run = cgls_run(&sys, StopCriteria::default()).unwrap();
        assert_eq!(run.iterations, 1);
        assert_eq!(run.status, RunStatus::Converged);
    }

    #[test]
    fn diagonal_two_iterations() {
        let a: Matrix = DenseMatrix::from_rows(&[&[1.0, 0.0], &[0.0, 2.0]]).unwrap().into();
        let sys = LinearSystem::new(a, vec![1.0, 2.0]).unwrap();
        let stop = StopCriteria {
            max_iterations: 2,
            error_tol: Some(1e-20),
            residual_tol: None,
        };
        let run = cgls_run(&sys, stop).unwrap();
        assert!(run.iterations <= 2);
        assert!(run.final_error_sq() <= 1e-20);
    }

    #[test]
    fn zero_budget_reports_start() {
        let a: Matrix = DenseMatrix::identity(2).into();
        let sys = LinearSystem::new(a, vec![1.0, 1.0]).unwrap();
        let run = cgls_run(&sys, StopCriteria::iterations(0)).unwrap();
        assert_eq!(run.records.len(), 1);
        assert_eq!(run.final_error_sq(), 2.0);
    }
}

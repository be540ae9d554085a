use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{LinearSystem, CONSISTENCY_TOL};

/// Projects `x` onto the joint solution set of the rows in `tau`:
/// `x + A_τ† (b_τ − A_τ x)`.
pub fn block_kaczmarz_step(system: &LinearSystem, tau: &[usize], x: &[f64]) -> Result<Vec<f64>> {
    let (m, n) = (system.nrows(), system.ncols());
    if tau.is_empty() {
        return Err(Error::InvalidInput("block is empty".into()));
    }
    if let Some(&i) = tau.iter().find(|&&i| i >= m) {
        return Err(Error::InvalidInput(format!("row {i} out of range for {m} rows")));
    }
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    let block = system.matrix().select_rows(tau);
    let a = DMatrix::from_row_slice(tau.len(), n, block.data());
    let b = DVector::from_iterator(tau.len(), tau.iter().map(|&i| system.rhs()[i]));
    let xv = DVector::from_column_slice(x);
    let gap = &b - &a * &xv;

    let svd = a.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let eps = sigma_max * tau.len().max(n) as f64 * f64::EPSILON;
    let step = svd.solve(&gap, eps).map_err(|e| Error::InvalidInput(e.into()))?;
    let out = xv + step;

    let res = (&a * &out - &b).norm();
    let tolerance = CONSISTENCY_TOL * (1.0 + b.norm());
    if res > tolerance {
        return Err(Error::Inconsistent {
            residual: res,
            tolerance,
        });
    }
    Ok(out.as_slice().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{project_row, DenseMatrix, Matrix};

    #[test]
    fn orthogonal_block_solves_in_one_step() {
        let a: Matrix = DenseMatrix::identity(2).into();
        let sys = LinearSystem::new(a, vec![1.0, 2.0]).unwrap();
        let x = block_kaczmarz_step(&sys, &[0, 1], &[0.0, 0.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn single_row_matches_projection() {
        let a: Matrix = DenseMatrix::from_rows(&[&[1.0, 2.0], &[3.0, -1.0]]).unwrap().into();
        let sys = LinearSystem::new(a, vec![1.0, 0.5]).unwrap();
        let x = [0.3, -0.7];
        let block = block_kaczmarz_step(&sys, &[1], &x).unwrap();
        let single = project_row(&x, sys.matrix().row(1), 0.5, sys.row_norms_sq()[1]).unwrap();
        for (p, q) in block.iter().zip(&single) {
            assert!((p - q).abs() < 1e-14);
        }
    }

    #[test]
    fn inconsistent_block_rejected() {
        let a: Matrix = DenseMatrix::from_rows(&[&[1.0, 0.0], &[1.0, 0.0]]).unwrap().into();
        let sys = LinearSystem::new(a, vec![0.0, 1.0]).unwrap();
        assert!(matches!(
            block_kaczmarz_step(&sys, &[0, 1], &[0.0, 0.0]),
            Err(Error::Inconsistent { .. })
        ));
        assert!(block_kaczmarz_step(&sys, &[], &[0.0, 0.0]).is_err());
    }
}

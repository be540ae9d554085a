//! Singular values and pseudoinverse solves through the `n × n` Gram matrix.
//!
//! Every workload here has a modest column count, so the symmetric
//! eigendecomposition of `AᵀA` gives the nonzero singular values and
//! `A† = (AᵀA)⁺ Aᵀ` without a full SVD.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Relative cutoff used when deciding which Gram eigenvalues are nonzero.
///
/// Eigenvalues at or below `rank_tol * λ_max` are treated as zero.
pub fn default_rank_tol(rows: usize, cols: usize) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON
}

/// Eigendecomposition of `AᵀA` with a rank cutoff applied.
#[derive(Debug, Clone)]
pub struct GramSpectrum {
    n: usize,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
    cutoff: f64,
}

impl GramSpectrum {
    pub fn new(matrix: &Matrix) -> Self {
        Self::with_rank_tol(matrix, default_rank_tol(matrix.nrows(), matrix.ncols()))
    }

    pub fn with_rank_tol(matrix: &Matrix, rank_tol: f64) -> Self {
        let n = matrix.ncols();
        let gram = DMatrix::from_row_slice(n, n, &matrix.gram());
        let eig = SymmetricEigen::new(gram);
        let eigenvalues: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
        let lambda_max = eigenvalues.iter().cloned().fold(0.0, f64::max);
        Self {
            n,
            eigenvalues,
            eigenvectors: eig.eigenvectors,
            cutoff: rank_tol * lambda_max,
        }
    }

    fn nonzero(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        let cutoff = self.cutoff;
        self.eigenvalues
            .iter()
            .cloned()
            .enumerate()
            .filter(move |&(_, l)| l > cutoff && l > 0.0)
    }

    pub fn rank(&self) -> usize {
        self.nonzero().count()
    }

    pub fn sigma_max(&self) -> f64 {
        self.eigenvalues.iter().cloned().fold(0.0, f64::max).sqrt()
    }

    /// Smallest squared singular value above the cutoff.
    pub fn sigma_min_sq(&self) -> Result<f64> {
        self.nonzero()
            .map(|(_, l)| l)
            .reduce(f64::min)
            .ok_or(Error::ZeroMatrix)
    }

    pub fn sigma_min(&self) -> Result<f64> {
        self.sigma_min_sq().map(f64::sqrt)
    }

    /// `(AᵀA)⁺ v` restricted to the retained eigenvectors.
    pub fn gram_pinv_apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (k, lambda) in self.nonzero() {
            let u = self.eigenvectors.column(k);
            let coeff: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() / lambda;
            for (o, ui) in out.iter_mut().zip(u.iter()) {
                *o += coeff * ui;
            }
        }
        out
    }

    /// `A† y` given the matrix the spectrum was computed from.
    pub fn pinv_apply(&self, matrix: &Matrix, y: &[f64]) -> Result<Vec<f64>> {
        let aty = matrix.tr_mul_vec(y)?;
        Ok(self.gram_pinv_apply(&aty))
    }

    /// Orthogonal projection of `v` onto `range(Aᵀ)`.
    pub fn project_row_space(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (k, _) in self.nonzero() {
            let u = self.eigenvectors.column(k);
            let coeff: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
            for (o, ui) in out.iter_mut().zip(u.iter()) {
                *o += coeff * ui;
            }
        }
        out
    }
}

/// Smallest nonzero singular value of `matrix`.
///
/// `rank_tol` is relative to the largest Gram eigenvalue; see
/// [`default_rank_tol`].
pub fn sigma_min_nz(matrix: &Matrix, rank_tol: f64) -> Result<f64> {
    GramSpectrum::with_rank_tol(matrix, rank_tol).sigma_min()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;

    fn dense(rows: &[&[f64]]) -> Matrix {
        DenseMatrix::from_rows(rows).unwrap().into()
    }

    #[test]
    fn identity_has_unit_sigma() {
        let a: Matrix = DenseMatrix::identity(3).into();
        let s = sigma_min_nz(&a, default_rank_tol(3, 3)).unwrap();
        assert!((s - 1.0).abs() < 1e-14);
    }

    #[test]
    fn repeated_column_sigma_is_sqrt_two() {
        // AᵀA = [[2, 0], [0, 0]]
        let a = dense(&[&[1.0, 0.0], &[1.0, 0.0]]);
        let s = sigma_min_nz(&a, default_rank_tol(2, 2)).unwrap();
        assert!((s - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn diagonal_sigma_min() {
        let a = dense(&[&[2.0, 0.0], &[0.0, 3.0]]);
        let s = sigma_min_nz(&a, default_rank_tol(2, 2)).unwrap();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn zero_matrix_rejected() {
        let a = Matrix::from(crate::linalg::CsrMatrix::from_triplets(2, 2, &[]).unwrap());
        assert!(matches!(
            sigma_min_nz(&a, 1e-12),
            Err(Error::ZeroMatrix)
        ));
    }

    #[test]
    fn pinv_of_rank_one() {
        let a = dense(&[&[1.0, 0.0], &[1.0, 0.0]]);
        let spec = GramSpectrum::new(&a);
        assert_eq!(spec.rank(), 1);
        let x = spec.pinv_apply(&a, &[1.0, 1.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && x[1].abs() < 1e-14);
    }
}

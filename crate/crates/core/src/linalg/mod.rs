//! Matrix storage, row projections and the Gram-based spectral routines
//! shared by the solvers and the analysis code.

mod matrix;
mod spectral;
mod system;

pub use matrix::{CsrMatrix, DenseMatrix, Matrix, Row};
pub use spectral::{default_rank_tol, sigma_min_nz, GramSpectrum};
pub use system::{
    fixed_point, normalize_rows, project_row, project_row_in_place, residual, row_norms_sq,
    LinearSystem, CONSISTENCY_TOL, FIXED_POINT_TOL,
};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum()
}

pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

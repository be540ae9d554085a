use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::linalg::{dist_sq, norm_sq, GramSpectrum, Matrix, Row};

/// Residual tolerance for the consistency invariant, relative to `1 + ‖b‖`.
pub const CONSISTENCY_TOL: f64 = 1e-8;
/// Residual tolerance used when [`fixed_point`] decides a system is inconsistent.
pub const FIXED_POINT_TOL: f64 = 1e-6;

/// `A x = b` together with cached row norms and the point errors are measured against.
#[derive(Debug)]
pub struct LinearSystem {
    matrix: Matrix,
    rhs: Vec<f64>,
    row_norms_sq: Vec<f64>,
    x_ref: Vec<f64>,
    start: Option<Vec<f64>>,
    consistent: bool,
    spectrum: OnceLock<GramSpectrum>,
}

impl Clone for LinearSystem {
    fn clone(&self) -> Self {
        let spectrum = OnceLock::new();
        if let Some(s) = self.spectrum.get() {
            let _ = spectrum.set(s.clone());
        }
        Self {
            matrix: self.matrix.clone(),
            rhs: self.rhs.clone(),
            row_norms_sq: self.row_norms_sq.clone(),
            x_ref: self.x_ref.clone(),
            start: self.start.clone(),
            consistent: self.consistent,
            spectrum,
        }
    }
}

impl LinearSystem {
    /// Builds a system whose reference point is the minimum-norm solution `A†b`.
    pub fn new(matrix: Matrix, rhs: Vec<f64>) -> Result<Self> {
        let mut sys = Self::unchecked(matrix, rhs, None)?;
        let spectrum = sys.spectrum();
        let x_ref = spectrum.pinv_apply(&sys.matrix, &sys.rhs)?;
        sys.consistent = residual_within(&sys.matrix, &x_ref, &sys.rhs, CONSISTENCY_TOL)?;
        sys.x_ref = x_ref;
        Ok(sys)
    }

    /// Builds the consistent system `A x = A x*`.
    ///
    /// When `A` has full column rank the reference point is `x*` itself,
    /// otherwise it is the minimum-norm solution.
    pub fn from_solution(matrix: Matrix, x_star: &[f64]) -> Result<Self> {
        let rhs = matrix.mul_vec(x_star)?;
        let mut sys = Self::unchecked(matrix, rhs, None)?;
        let n = sys.matrix.ncols();
        sys.x_ref = if sys.spectrum().rank() == n {
            x_star.to_vec()
        } else {
            sys.spectrum().pinv_apply(&sys.matrix, &sys.rhs)?
        };
        sys.consistent = residual_within(&sys.matrix, &sys.x_ref, &sys.rhs, CONSISTENCY_TOL)?;
        Ok(sys)
    }

    /// Builds a system with an explicitly supplied reference point.
    pub fn from_parts(matrix: Matrix, rhs: Vec<f64>, x_ref: Vec<f64>) -> Result<Self> {
        if x_ref.len() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.ncols(),
                got: x_ref.len(),
            });
        }
        let mut sys = Self::unchecked(matrix, rhs, None)?;
        sys.consistent = residual_within(&sys.matrix, &x_ref, &sys.rhs, CONSISTENCY_TOL)?;
        sys.x_ref = x_ref;
        Ok(sys)
    }

    fn unchecked(matrix: Matrix, rhs: Vec<f64>, start: Option<Vec<f64>>) -> Result<Self> {
        if rhs.len() != matrix.nrows() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                got: rhs.len(),
            });
        }
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("right-hand side is not finite".into()));
        }
        let norms = row_norms_sq(&matrix);
        if let Some(i) = norms.iter().position(|&v| v <= 0.0) {
            return Err(Error::ZeroRow(i));
        }
        let n = matrix.ncols();
        Ok(Self {
            matrix,
            rhs,
            row_norms_sq: norms,
            x_ref: vec![0.0; n],
            start,
            consistent: false,
            spectrum: OnceLock::new(),
        })
    }

    /// Sets the starting iterate and moves the reference point to the
    /// projection of `x0` onto the solution set.
    pub fn with_start(mut self, x0: Vec<f64>) -> Result<Self> {
        self.x_ref = fixed_point(&self, &x0)?;
        self.start = Some(x0);
        Ok(self)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn row_norms_sq(&self) -> &[f64] {
        &self.row_norms_sq
    }

    pub fn x_ref(&self) -> &[f64] {
        &self.x_ref
    }

    /// Starting iterate suggested by the system builder, if any.
    pub fn start(&self) -> Option<&[f64]> {
        self.start.as_deref()
    }

    pub fn is_consistent(&self) -> bool {
        self.consistent
    }

    pub fn nrows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.row_norms_sq.iter().sum()
    }

    /// Gram spectrum, computed on first use.
    pub fn spectrum(&self) -> &GramSpectrum {
        self.spectrum.get_or_init(|| GramSpectrum::new(&self.matrix))
    }

    pub fn sigma_min_sq(&self) -> Result<f64> {
        self.spectrum().sigma_min_sq()
    }

    pub fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        residual(&self.matrix, x, &self.rhs)
    }

    pub fn error_sq(&self, x: &[f64]) -> f64 {
        dist_sq(x, &self.x_ref)
    }
}

/// Squared Euclidean norm of each row.
pub fn row_norms_sq(matrix: &Matrix) -> Vec<f64> {
    (0..matrix.nrows()).map(|i| matrix.row(i).norm_sq()).collect()
}

/// `A x − b`
pub fn residual(matrix: &Matrix, x: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != matrix.nrows() {
        return Err(Error::DimensionMismatch {
            expected: matrix.nrows(),
            got: b.len(),
        });
    }
    let mut r = matrix.mul_vec(x)?;
    r.iter_mut().zip(b).for_each(|(r, b)| *r -= b);
    Ok(r)
}

fn residual_within(matrix: &Matrix, x: &[f64], b: &[f64], tol: f64) -> Result<bool> {
    let r = residual(matrix, x, b)?;
    Ok(norm_sq(&r).sqrt() <= tol * (1.0 + norm_sq(b).sqrt()))
}

/// Orthogonal projection of `x` onto the hyperplane `a·x = b`.
pub fn project_row(x: &[f64], row: Row<'_>, b: f64, norm_sq: f64) -> Result<Vec<f64>> {
    let mut out = x.to_vec();
    project_row_in_place(&mut out, row, b, norm_sq)?;
    Ok(out)
}

/// In-place projection; returns the signed residual `a·x − b` before the step.
pub fn project_row_in_place(x: &mut [f64], row: Row<'_>, b: f64, norm_sq: f64) -> Result<f64> {
    if !(norm_sq > 0.0) {
        return Err(Error::InvalidInput(format!(
            "row norm must be positive, got {norm_sq}"
        )));
    }
    let r = row.dot(x) - b;
    if r != 0.0 {
        row.axpy(-r / norm_sq, x);
    }
    Ok(r)
}

/// Projection of `x0` onto the solution set: `x0 + A†(b − A x0)`.
pub fn fixed_point(system: &LinearSystem, x0: &[f64]) -> Result<Vec<f64>> {
    let matrix = system.matrix();
    let mut gap = residual(matrix, x0, system.rhs())?;
    gap.iter_mut().for_each(|v| *v = -*v);
    let step = system.spectrum().pinv_apply(matrix, &gap)?;
    let x: Vec<f64> = x0.iter().zip(&step).map(|(a, b)| a + b).collect();
    let r = residual(matrix, &x, system.rhs())?;
    let tolerance = FIXED_POINT_TOL * (1.0 + norm_sq(system.rhs()).sqrt());
    let res = norm_sq(&r).sqrt();
    if res > tolerance {
        return Err(Error::Inconsistent {
            residual: res,
            tolerance,
        });
    }
    Ok(x)
}

/// Scales every equation to unit row norm. The solution set is unchanged.
pub fn normalize_rows(system: &LinearSystem) -> Result<LinearSystem> {
    let scale: Vec<f64> = system
        .row_norms_sq()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v > 0.0 {
                Ok(1.0 / v.sqrt())
            } else {
                Err(Error::ZeroRow(i))
            }
        })
        .collect::<Result<_>>()?;
    let matrix = system.matrix().scale_rows(&scale);
    let rhs: Vec<f64> = system.rhs().iter().zip(&scale).map(|(b, s)| b * s).collect();
    let mut out = LinearSystem::unchecked(matrix, rhs, system.start.clone())?;
    out.x_ref = system.x_ref.clone();
    out.consistent = system.consistent;
    Ok(out)
}

//! Dense row-major and compressed-sparse-row matrices.
//!
//! Row-action methods only ever touch one row (or a handful of rows) per
//! iteration, so both storage formats expose rows through the borrowed
//! [`Row`] view and everything above this module is format-agnostic.

use crate::error::{Error, Result};

/// Dense matrix in row-major layout: `data[i * cols + j] = A[i, j]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite entry at ({}, {})",
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equal-length row slices.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self {
            rows: n,
            cols: n,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }
}

/// Compressed sparse row matrix.
///
/// Column indices are strictly increasing within a row and every stored
/// value is finite and nonzero.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn new(
        rows: usize,
        cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_ptr.len() != rows + 1 {
            return Err(Error::DimensionMismatch {
                expected: rows + 1,
                got: row_ptr.len(),
            });
        }
        if row_ptr[0] != 0 || row_ptr[rows] != values.len() || col_idx.len() != values.len() {
            return Err(Error::InvalidInput(
                "row pointer does not match stored values".into(),
            ));
        }
        for i in 0..rows {
            let (start, end) = (row_ptr[i], row_ptr[i + 1]);
            if start > end {
                return Err(Error::InvalidInput(format!(
                    "row pointer decreases at row {i}"
                )));
            }
            let cols_i = &col_idx[start..end];
            if cols_i.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidInput(format!(
                    "column indices of row {i} are not strictly increasing"
                )));
            }
            if cols_i.last().is_some_and(|&c| c >= cols) {
                return Err(Error::InvalidInput(format!(
                    "column index out of range in row {i}"
                )));
            }
        }
        if values.iter().any(|v| !v.is_finite() || *v == 0.0) {
            return Err(Error::InvalidInput(
                "stored values must be finite and nonzero".into(),
            ));
        }
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Assembles a CSR matrix from `(row, col, value)` triplets.
    ///
    /// Duplicate coordinates are summed and entries that end up zero are
    /// dropped.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        for &(i, j, _) in &sorted {
            if i >= rows || j >= cols {
                return Err(Error::InvalidInput(format!(
                    "entry ({i}, {j}) outside a {rows}x{cols} matrix"
                )));
            }
        }
        sorted.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values = Vec::with_capacity(sorted.len());
        let mut k = 0;
        while k < sorted.len() {
            let (i, j, mut v) = sorted[k];
            k += 1;
            while k < sorted.len() && sorted[k].0 == i && sorted[k].1 == j {
                v += sorted[k].2;
                k += 1;
            }
            if v != 0.0 {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
            }
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self::new(rows, cols, row_ptr, col_idx, values)
    }

    pub fn from_dense(dense: &DenseMatrix) -> Self {
        let mut row_ptr = Vec::with_capacity(dense.rows() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..dense.rows() {
            for (j, &v) in dense.row(i).iter().enumerate() {
                if v != 0.0 {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(values.len());
        }
        Self {
            rows: dense.rows(),
            cols: dense.cols(),
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut data = vec![0.0; self.rows * self.cols];
        for i in 0..self.rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                data[i * self.cols + self.col_idx[k]] = self.values[k];
            }
        }
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    /// Returns a copy without empty rows, plus the original index of each kept row.
    pub fn without_empty_rows(&self) -> (Self, Vec<usize>) {
        let kept: Vec<usize> = (0..self.rows)
            .filter(|&i| self.row_ptr[i + 1] > self.row_ptr[i])
            .collect();
        let mut row_ptr = Vec::with_capacity(kept.len() + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::with_capacity(self.values.len());
        let mut values = Vec::with_capacity(self.values.len());
        for &i in &kept {
            let range = self.row_ptr[i]..self.row_ptr[i + 1];
            col_idx.extend_from_slice(&self.col_idx[range.clone()]);
            values.extend_from_slice(&self.values[range]);
            row_ptr.push(values.len());
        }
        let m = Self {
            rows: kept.len(),
            cols: self.cols,
            row_ptr,
            col_idx,
            values,
        };
        (m, kept)
    }

    pub fn transpose(&self) -> Self {
        let mut triplets = Vec::with_capacity(self.values.len());
        for i in 0..self.rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                triplets.push((self.col_idx[k], i, self.values[k]));
            }
        }
        Self::from_triplets(self.cols, self.rows, &triplets)
            .expect("transpose of a valid matrix is valid")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> Row<'_> {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        Row::Sparse {
            cols: &self.col_idx[range.clone()],
            vals: &self.values[range],
        }
    }

    /// Entry lookup by binary search within the row.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }
}

/// Borrowed view of one matrix row.
#[derive(Debug, Clone, Copy)]
pub enum Row<'a> {
    Dense(&'a [f64]),
    Sparse { cols: &'a [usize], vals: &'a [f64] },
}

impl Row<'_> {
    pub fn dot(&self, x: &[f64]) -> f64 {
        match *self {
            Row::Dense(a) => a.iter().zip(x).map(|(a, x)| a * x).sum(),
            Row::Sparse { cols, vals } => cols.iter().zip(vals).map(|(&j, v)| v * x[j]).sum(),
        }
    }

    /// `y += alpha * row`
    pub fn axpy(&self, alpha: f64, y: &mut [f64]) {
        match *self {
            Row::Dense(a) => y.iter_mut().zip(a).for_each(|(y, a)| *y += alpha * a),
            Row::Sparse { cols, vals } => {
                for (&j, v) in cols.iter().zip(vals) {
                    y[j] += alpha * v;
                }
            }
        }
    }

    pub fn norm_sq(&self) -> f64 {
        let vals = match *self {
            Row::Dense(a) => a,
            Row::Sparse { vals, .. } => vals,
        };
        vals.iter().map(|v| v * v).sum()
    }

    /// Stored entries; for dense rows this is the row length.
    pub fn nnz(&self) -> usize {
        match *self {
            Row::Dense(a) => a.len(),
            Row::Sparse { vals, .. } => vals.len(),
        }
    }

    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        match *self {
            Row::Dense(a) => a.to_vec(),
            Row::Sparse { cols, vals } => {
                let mut out = vec![0.0; n];
                for (&j, &v) in cols.iter().zip(vals) {
                    out[j] = v;
                }
                out
            }
        }
    }
}

/// A matrix in either storage format.
#[derive(Debug, Clone, PartialEq)]
pub enum Matrix {
    Dense(DenseMatrix),
    Sparse(CsrMatrix),
}

impl From<DenseMatrix> for Matrix {
    fn from(m: DenseMatrix) -> Self {
        Matrix::Dense(m)
    }
}

impl From<CsrMatrix> for Matrix {
    fn from(m: CsrMatrix) -> Self {
        Matrix::Sparse(m)
    }
}

impl Matrix {
    pub fn nrows(&self) -> usize {
        match self {
            Matrix::Dense(m) => m.rows(),
            Matrix::Sparse(m) => m.rows(),
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            Matrix::Dense(m) => m.cols(),
            Matrix::Sparse(m) => m.cols(),
        }
    }

    pub fn nnz(&self) -> usize {
        match self {
            Matrix::Dense(m) => m.rows() * m.cols(),
            Matrix::Sparse(m) => m.nnz(),
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, Matrix::Sparse(_))
    }

    pub fn row(&self, i: usize) -> Row<'_> {
        match self {
            Matrix::Dense(m) => Row::Dense(m.row(i)),
            Matrix::Sparse(m) => m.row(i),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            Matrix::Dense(m) => m.get(i, j),
            Matrix::Sparse(m) => m.get(i, j),
        }
    }

    /// `A x`
    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.ncols(), x.len())?;
        Ok((0..self.nrows()).map(|i| self.row(i).dot(x)).collect())
    }

    /// `Aᵀ y`
    pub fn tr_mul_vec(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len(self.nrows(), y.len())?;
        let mut out = vec![0.0; self.ncols()];
        for (i, &yi) in y.iter().enumerate() {
            if yi != 0.0 {
                self.row(i).axpy(yi, &mut out);
            }
        }
        Ok(out)
    }

    /// Dense `n × n` Gram matrix `AᵀA` in row-major order.
    pub fn gram(&self) -> Vec<f64> {
        let n = self.ncols();
        let mut g = vec![0.0; n * n];
        for i in 0..self.nrows() {
            match self.row(i) {
                Row::Dense(a) => {
                    for (p, &ap) in a.iter().enumerate() {
                        if ap == 0.0 {
                            continue;
                        }
                        let gp = &mut g[p * n..(p + 1) * n];
                        for q in p..n {
                            gp[q] += ap * a[q];
                        }
                    }
                }
                Row::Sparse { cols, vals } => {
                    for (s, (&p, &ap)) in cols.iter().zip(vals).enumerate() {
                        for (&q, &aq) in cols[s..].iter().zip(&vals[s..]) {
                            g[p * n + q] += ap * aq;
                        }
                    }
                }
            }
        }
        for p in 0..n {
            for q in 0..p {
                g[p * n + q] = g[q * n + p];
            }
        }
        g
    }

    /// Copy with row `i` scaled by `scale[i]`.
    pub fn scale_rows(&self, scale: &[f64]) -> Matrix {
        match self {
            Matrix::Dense(m) => {
                let mut out = m.clone();
                for (i, &s) in scale.iter().enumerate() {
                    out.row_mut(i).iter_mut().for_each(|v| *v *= s);
                }
                Matrix::Dense(out)
            }
            Matrix::Sparse(m) => {
                let mut out = m.clone();
                for (i, &s) in scale.iter().enumerate() {
                    for k in out.row_ptr[i]..out.row_ptr[i + 1] {
                        out.values[k] *= s;
                    }
                }
                Matrix::Sparse(out)
            }
        }
    }

    /// Dense copy of the rows listed in `rows`, in that order.
    pub fn select_rows(&self, rows: &[usize]) -> DenseMatrix {
        let n = self.ncols();
        let mut data = Vec::with_capacity(rows.len() * n);
        for &i in rows {
            data.extend(self.row(i).to_dense(n));
        }
        DenseMatrix {
            rows: rows.len(),
            cols: n,
            data,
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            Matrix::Dense(m) => m.clone(),
            Matrix::Sparse(m) => m.to_dense(),
        }
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

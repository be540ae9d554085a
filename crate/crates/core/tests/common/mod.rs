#![allow(dead_code)]

use skm_core::linalg::{norm_sq, project_row};
use skm_core::selection::{enumerate_subsets, outranks};
use skm_core::{DenseMatrix, LinearSystem, Matrix};

pub fn dense(m: usize, n: usize, data: Vec<f64>) -> Matrix {
    DenseMatrix::new(m, n, data).unwrap().into()
}

/// Argmax of `tau` under the strict `(r², index)` order, found by scanning.
pub fn scan_argmax(r: &[f64], tau: &[usize]) -> usize {
    let mut best = tau[0];
    for &i in &tau[1..] {
        if outranks(r[i] * r[i], i, r[best] * r[best], best) {
            best = i;
        }
    }
    best
}

pub fn enumerated_gamma(r: &[f64], beta: usize) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for tau in enumerate_subsets(r.len(), beta).unwrap() {
        num += tau.iter().map(|&i| r[i] * r[i]).sum::<f64>();
        let t = scan_argmax(r, &tau);
        den += r[t] * r[t];
    }
    num / den
}

/// Subset probabilities proportional to the squared norm of the argmax row.
pub fn enumerated_subset_law(system: &LinearSystem, x: &[f64], beta: usize) -> Vec<(Vec<usize>, usize, f64)> {
    let r = system.residual(x).unwrap();
    let norms = system.row_norms_sq();
    let mut out: Vec<(Vec<usize>, usize, f64)> = enumerate_subsets(r.len(), beta)
        .unwrap()
        .map(|tau| {
            let t = scan_argmax(&r, &tau);
            (tau, t, norms[t])
        })
        .collect();
    let total: f64 = out.iter().map(|o| o.2).sum();
    out.iter_mut().for_each(|o| o.2 /= total);
    out
}

/// `E_τ ‖x_1 − x_ref‖²` by enumeration.
pub fn enumerated_expected_error(system: &LinearSystem, x: &[f64], beta: usize) -> f64 {
    enumerated_subset_law(system, x, beta)
        .into_iter()
        .map(|(_, t, p)| {
            let x1 = project_row(x, system.matrix().row(t), system.rhs()[t], system.row_norms_sq()[t]).unwrap();
            p * system.error_sq(&x1)
        })
        .sum()
}

pub fn error_sq(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm_sq(&d)
}

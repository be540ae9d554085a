//! Deterministic floating-point operation counts.
//!
//! Only solver arithmetic is charged; error norms, dynamic-range estimates
//! and other instrumentation are free.

use crate::selection::RuleKind;

/// Nonzero counts an iteration touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct NnzTouched {
    /// Nonzeros across the sampled rows.
    pub sampled: usize,
    /// Nonzeros in the row projected onto.
    pub selected: usize,
    /// Nonzeros in the whole matrix.
    pub matrix: usize,
}

fn projection(n: usize, selected: usize) -> u64 {
    (2 * selected + n + 2) as u64
}

pub fn flops_of_iteration(rule: RuleKind, beta: usize, m: usize, n: usize, nnz: NnzTouched) -> u64 {
    match rule {
        RuleKind::Rk | RuleKind::SkmUniform => (2 * nnz.sampled + beta) as u64 + projection(n, nnz.selected),
        RuleKind::Mm => (2 * nnz.matrix + m) as u64 + projection(n, nnz.selected),
        RuleKind::SkmExact => {
            let sort = (m as f64 * (m.max(1) as f64).log2()).ceil() as u64;
            (2 * nnz.matrix + 5 * m) as u64 + sort + projection(n, nnz.selected)
        }
    }
}

/// One CGLS iteration: two products with `A`, vector updates on both sides.
pub fn cgls_flops(m: usize, n: usize, nnz: usize) -> u64 {
    (4 * nnz + 10 * n + 6 * m) as u64
}

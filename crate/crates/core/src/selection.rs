//! Row-selection rules.
//!
//! Everything that depends on "which row of a subset has the largest
//! residual" goes through one strict total order on rows: row `i` outranks
//! row `j` when `r_i² > r_j²`, or when they tie and `i > j`. Under a strict
//! order, row `i` is the argmax of exactly `C(rank_i − 1, β − 1)` of the
//! `C(m, β)` subsets of size `β`, which turns every sum over subsets into
//! an `O(m log m)` sum over rows.

use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest subset count [`enumerate_subsets`] will walk.
pub const ENUMERATION_LIMIT: u64 = 1_000_000;

/// `true` when `(va, a)` is strictly greater than `(vb, b)` in the row order.
#[inline]
pub fn outranks(va: f64, a: usize, vb: f64, b: usize) -> bool {
    va > vb || (va == vb && a > b)
}

/// Squared residuals with their ascending rank under the strict row order.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedResidual {
    sq: Vec<f64>,
    order: Vec<usize>,
    rank: Vec<usize>,
}

impl RankedResidual {
    pub fn sq(&self) -> &[f64] {
        &self.sq
    }

    /// Row indices sorted ascending.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// 1-based ranks; `rank[i] == m` for the row with the largest residual.
    pub fn rank(&self) -> &[usize] {
        &self.rank
    }

    pub fn len(&self) -> usize {
        self.sq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sq.is_empty()
    }

    /// Row with the largest residual (Motzkin's choice).
    pub fn top(&self) -> usize {
        *self.order.last().expect("ranked residual is nonempty")
    }
}

pub fn rank_residuals(r: &[f64]) -> Result<RankedResidual> {
    if r.is_empty() {
        return Err(Error::InvalidInput("residual is empty".into()));
    }
    if let Some(i) = r.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("residual entry {i} is not finite")));
    }
    let sq: Vec<f64> = r.iter().map(|v| v * v).collect();
    let mut order: Vec<usize> = (0..sq.len()).collect();
    order.sort_unstable_by(|&a, &b| sq[a].total_cmp(&sq[b]).then(a.cmp(&b)));
    let mut rank = vec![0; sq.len()];
    for (pos, &i) in order.iter().enumerate() {
        rank[i] = pos + 1;
    }
    Ok(RankedResidual { sq, order, rank })
}

/// Per-row argmax subset counts, normalized and stored as logarithms.
///
/// `log_w[i] = ln C(rank_i − 1, β − 1) − ln C(m − 1, β − 1)`, so the top row
/// has weight one and rows ranked below `β` have weight zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ArgmaxWeights {
    log_w: Vec<f64>,
    beta: usize,
}

impl ArgmaxWeights {
    pub fn log_w(&self) -> &[f64] {
        &self.log_w
    }

    pub fn beta(&self) -> usize {
        self.beta
    }

    pub fn len(&self) -> usize {
        self.log_w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_w.is_empty()
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.log_w[i].exp()
    }

    /// Fraction of all size-`β` subsets in which row `i` is the argmax.
    ///
    /// Uses `C(m − 1, β − 1) / C(m, β) = β / m`.
    pub fn subset_fraction(&self, i: usize) -> f64 {
        self.weight(i) * self.beta as f64 / self.log_w.len() as f64
    }

    /// `Σ_i c_i w_i`, the subset sum `Σ_τ c_{t(τ)}` divided by `C(m − 1, β − 1)`.
    pub fn weighted_sum(&self, values: &[f64]) -> f64 {
        self.log_w
            .iter()
            .zip(values)
            .filter(|(lw, _)| lw.is_finite())
            .map(|(lw, v)| lw.exp() * v)
            .sum()
    }
}

pub fn argmax_weights(ranked: &RankedResidual, beta: usize) -> Result<ArgmaxWeights> {
    let m = ranked.len();
    check_beta(m, beta)?;
    // by_rank[r] for r in 1..=m, built downward from the top row using
    // C(s − 2, β − 1) / C(s − 1, β − 1) = (s − β) / (s − 1).
    let mut by_rank = vec![f64::NEG_INFINITY; m + 1];
    by_rank[m] = 0.0;
    for s in (2..=m).rev() {
        if s <= beta {
            break;
        }
        by_rank[s - 1] = by_rank[s] + ((s - beta) as f64).ln() - ((s - 1) as f64).ln();
    }
    let log_w = ranked.rank.iter().map(|&r| by_rank[r]).collect();
    Ok(ArgmaxWeights { log_w, beta })
}

fn check_beta(m: usize, beta: usize) -> Result<()> {
    if beta == 0 || beta > m {
        return Err(Error::InvalidInput(format!(
            "sample size {beta} outside 1..={m}"
        )));
    }
    Ok(())
}

/// Categorical sampler with `P(i) = ‖a_i‖² / ‖A‖_F²`.
#[derive(Debug, Clone)]
pub struct RkSampler {
    dist: WeightedIndex<f64>,
}

impl RkSampler {
    pub fn new(row_norms_sq: &[f64]) -> Result<Self> {
        let dist = WeightedIndex::new(row_norms_sq.iter().copied())
            .map_err(|e| Error::InvalidInput(format!("row norms: {e}")))?;
        Ok(Self { dist })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.dist.sample(rng)
    }
}

pub fn rk_sample<R: Rng + ?Sized>(row_norms_sq: &[f64], rng: &mut R) -> Result<usize> {
    Ok(RkSampler::new(row_norms_sq)?.sample(rng))
}

/// Draws uniform size-`β` subsets of `{0, …, m − 1}` by partial Fisher-Yates.
///
/// The permutation buffer is reused between draws. Any arrangement is a
/// valid starting point for a partial shuffle, so a draw costs `O(β)`.
#[derive(Debug, Clone)]
pub struct SubsetSampler {
    perm: Vec<usize>,
}

impl SubsetSampler {
    pub fn new(m: usize) -> Self {
        Self {
            perm: (0..m).collect(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, beta: usize, rng: &mut R) -> Result<&[usize]> {
        let m = self.perm.len();
        check_beta(m, beta)?;
        for i in 0..beta.min(m - 1) {
            let j = rng.random_range(i..m);
            self.perm.swap(i, j);
        }
        Ok(&self.perm[..beta])
    }
}

/// One uniform size-`β` subset, returned sorted.
pub fn sample_uniform_subset<R: Rng + ?Sized>(m: usize, beta: usize, rng: &mut R) -> Result<Vec<usize>> {
    let mut sampler = SubsetSampler::new(m);
    let mut tau = sampler.sample(beta, rng)?.to_vec();
    tau.sort_unstable();
    Ok(tau)
}

/// Member of `tau` with the highest rank.
pub fn select_skm(ranked: &RankedResidual, tau: &[usize]) -> Option<usize> {
    tau.iter().copied().max_by_key(|&i| ranked.rank[i])
}

/// Argmax over a sampled sub-residual without ranking the full residual.
///
/// `sub_sq[k]` is the squared residual of row `tau[k]`; returns the
/// position `k` of the winner.
pub fn argmax_position(tau: &[usize], sub_sq: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for k in 0..tau.len() {
        match best {
            Some(b) if !outranks(sub_sq[k], tau[k], sub_sq[b], tau[b]) => {}
            _ => best = Some(k),
        }
    }
    best
}

/// Row marginals of the iterate-dependent subset distribution.
///
/// Subsets are drawn with probability proportional to the squared norm of
/// their argmax row; marginalizing over subsets gives
/// `P(t = i) ∝ ‖a_i‖² · C(rank_i − 1, β − 1)`.
pub fn generalized_marginals(ranked: &RankedResidual, row_norms_sq: &[f64], beta: usize) -> Result<Vec<f64>> {
    if row_norms_sq.len() != ranked.len() {
        return Err(Error::DimensionMismatch {
            expected: ranked.len(),
            got: row_norms_sq.len(),
        });
    }
    let weights = argmax_weights(ranked, beta)?;
    let log_p: Vec<f64> = weights
        .log_w
        .iter()
        .zip(row_norms_sq)
        .map(|(lw, n)| lw + n.ln())
        .collect();
    let max = log_p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = log_p.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    Ok(p)
}

/// `C(n, k)` as a float, exact while the value fits in 53 bits.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

/// `ln C(n, k)`; `−∞` when `k > n`.
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    (0..k)
        .map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln())
        .sum()
}

/// All size-`β` subsets of `{0, …, m − 1}` in lexicographic order.
pub fn enumerate_subsets(m: usize, beta: usize) -> Result<Subsets> {
    check_beta(m, beta)?;
    let count = binomial(m, beta);
    if count > ENUMERATION_LIMIT as f64 {
        return Err(Error::TooManySubsets {
            count,
            limit: ENUMERATION_LIMIT,
        });
    }
    Ok(Subsets {
        m,
        current: Some((0..beta).collect()),
    })
}

#[derive(Debug, Clone)]
pub struct Subsets {
    m: usize,
    current: Option<Vec<usize>>,
}

impl Iterator for Subsets {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.take()?;
        let mut next = out.clone();
        let k = next.len();
        let mut i = k;
        while i > 0 {
            i -= 1;
            if next[i] < self.m - k + i {
                next[i] += 1;
                for j in i + 1..k {
                    next[j] = next[j - 1] + 1;
                }
                self.current = Some(next);
                break;
            }
        }
        Some(out)
    }
}

/// Row-selection strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleKind {
    /// Randomized Kaczmarz: rows drawn proportionally to squared norm.
    Rk,
    /// Motzkin's method: always the largest residual.
    Mm,
    /// Uniform size-`β` subset, then the largest residual within it.
    SkmUniform,
    /// Iterate-dependent subset distribution, sampled through row marginals.
    SkmExact,
}

impl RuleKind {
    pub fn name(self) -> &'static str {
        match self {
            RuleKind::Rk => "rk",
            RuleKind::Mm => "mm",
            RuleKind::SkmUniform => "skm-uniform",
            RuleKind::SkmExact => "skm-exact",
        }
    }
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RuleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rk" => Ok(RuleKind::Rk),
            "mm" => Ok(RuleKind::Mm),
            "skm-uniform" | "skm" => Ok(RuleKind::SkmUniform),
            "skm-exact" => Ok(RuleKind::SkmExact),
            other => Err(Error::InvalidConfig(format!("unknown rule `{other}`"))),
        }
    }
}

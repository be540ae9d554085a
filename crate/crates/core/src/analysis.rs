//! Dynamic range of the residual and the contraction factors built on it.
//!
//! The dynamic range at sample size `β` is
//! `γ = Σ_τ ‖r_τ‖² / Σ_τ ‖r_τ‖_∞²` over all size-`β` subsets `τ`. Every
//! subset sum is evaluated through argmax weights, see [`crate::selection`].

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::LinearSystem;
use crate::selection::{argmax_weights, rank_residuals, ArgmaxWeights, RankedResidual, SubsetSampler};

/// Source formula of a contraction factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorFormula {
    /// `1 − σ²/‖A‖_F²`
    RkEq1,
    /// `1 − σ²/m` for unit rows, independent of `β`.
    SkmPrev,
    /// General factor under the norm-weighted subset distribution.
    Thm2,
    /// `1 − βσ²/(γm)` for unit rows.
    Cor1,
    /// [`FactorFormula::Thm2`] with the numerator scaled by `ε`.
    Cor3 { epsilon: f64 },
    /// `1 − σ²/γ`
    MmImproved,
    /// `1 − σ²/(4γ)`
    MmHn18,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractionFactor {
    pub value: f64,
    pub formula: FactorFormula,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicRangeReport {
    pub beta: usize,
    pub gamma_exact: f64,
    /// Estimate and 95% half-width.
    pub gamma_mc: Option<(f64, f64)>,
    pub lower_bound: f64,
    pub trivial_bounds: (f64, f64),
    pub gaussian_bound: Option<f64>,
    pub incidence_bound: Option<f64>,
}

/// `γ` from a ranked residual and its argmax weights.
pub fn dynamic_range_ranked(ranked: &RankedResidual, weights: &ArgmaxWeights) -> Result<f64> {
    let total: f64 = ranked.sq().iter().sum();
    if total == 0.0 {
        return Err(Error::ZeroResidual);
    }
    Ok(total / weights.weighted_sum(ranked.sq()))
}

pub fn dynamic_range_exact(r: &[f64], beta: usize) -> Result<f64> {
    let ranked = rank_residuals(r)?;
    let weights = argmax_weights(&ranked, beta)?;
    dynamic_range_ranked(&ranked, &weights)
}

/// Ratio of sample means of `‖r_τ‖²` and `‖r_τ‖_∞²` over uniform subsets,
/// with a delta-method 95% half-width.
pub fn dynamic_range_mc<R: Rng + ?Sized>(r: &[f64], beta: usize, n_samples: usize, rng: &mut R) -> Result<(f64, f64)> {
    if n_samples < 100 {
        return Err(Error::InvalidInput(format!("need at least 100 samples, got {n_samples}")));
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("residual is not finite".into()));
    }
    if r.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroResidual);
    }
    let mut sampler = SubsetSampler::new(r.len());
    let mut xs = Vec::with_capacity(n_samples);
    let mut ys = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let tau = sampler.sample(beta, rng)?;
        let (mut sum, mut max) = (0.0f64, 0.0f64);
        for &i in tau {
            let v = r[i] * r[i];
            sum += v;
            max = max.max(v);
        }
        xs.push(sum);
        ys.push(max);
    }
    let count = n_samples as f64;
    let mx = xs.iter().sum::<f64>() / count;
    let my = ys.iter().sum::<f64>() / count;
    let ratio = mx / my;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    let denom = count - 1.0;
    let var = (sxx / denom - 2.0 * ratio * sxy / denom + ratio * ratio * syy / denom) / (my * my * count);
    Ok((ratio, 1.96 * var.max(0.0).sqrt()))
}

/// Lower bound `γ ≥ σ²_min / Σ_i ‖a_i‖² w_i`.
pub fn gamma_lower_bound(system: &LinearSystem, x: &[f64], beta: usize) -> Result<f64> {
    let (_, weights) = ranked_weights(system, x, beta)?;
    Ok(system.sigma_min_sq()? / weights.weighted_sum(system.row_norms_sq()))
}

fn ranked_weights(system: &LinearSystem, x: &[f64], beta: usize) -> Result<(RankedResidual, ArgmaxWeights)> {
    let r = system.residual(x)?;
    if r.iter().all(|&v| v == 0.0) {
        return Err(Error::ZeroResidual);
    }
    let ranked = rank_residuals(&r)?;
    let weights = argmax_weights(&ranked, beta)?;
    Ok((ranked, weights))
}

/// `1 − ε σ² / (γ Σ_i ‖a_i‖² w_i)`.
///
/// The subtracted term never exceeds one in exact arithmetic; a value below
/// zero by rounding only is reported as zero.
pub fn factor_value(sigma_sq: f64, gamma: f64, weighted_norms: f64, epsilon: f64) -> f64 {
    let value = 1.0 - epsilon * sigma_sq / (gamma * weighted_norms);
    if value < 0.0 && value > -1e-12 {
        0.0
    } else {
        value
    }
}

pub fn contraction_thm2(system: &LinearSystem, x: &[f64], beta: usize) -> Result<ContractionFactor> {
    let value = scaled_factor(system, x, beta, 1.0)?;
    Ok(ContractionFactor {
        value,
        formula: FactorFormula::Thm2,
    })
}

pub fn contraction_cor3(system: &LinearSystem, x: &[f64], beta: usize, epsilon: f64) -> Result<ContractionFactor> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidInput(format!("epsilon {epsilon} outside (0, 1]")));
    }
    let value = scaled_factor(system, x, beta, epsilon)?;
    Ok(ContractionFactor {
        value,
        formula: FactorFormula::Cor3 { epsilon },
    })
}

fn scaled_factor(system: &LinearSystem, x: &[f64], beta: usize, epsilon: f64) -> Result<f64> {
    let (ranked, weights) = ranked_weights(system, x, beta)?;
    let gamma = dynamic_range_ranked(&ranked, &weights)?;
    Ok(factor_value(
        system.sigma_min_sq()?,
        gamma,
        weights.weighted_sum(system.row_norms_sq()),
        epsilon,
    ))
}

/// `ε = min ‖a_i‖² / max ‖a_i‖²` for uniform subsets; one when `β = m`,
/// where the only subset is drawn with certainty under either distribution.
pub fn uniform_epsilon(row_norms_sq: &[f64], beta: usize) -> f64 {
    if beta >= row_norms_sq.len() {
        return 1.0;
    }
    let min = row_norms_sq.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = row_norms_sq.iter().cloned().fold(0.0, f64::max);
    min / max
}

pub fn rk_factor(sigma_sq: f64, frobenius_sq: f64) -> ContractionFactor {
    ContractionFactor {
        value: 1.0 - sigma_sq / frobenius_sq,
        formula: FactorFormula::RkEq1,
    }
}

pub fn skm_prev_factor(sigma_sq: f64, m: usize) -> ContractionFactor {
    ContractionFactor {
        value: 1.0 - sigma_sq / m as f64,
        formula: FactorFormula::SkmPrev,
    }
}

pub fn cor1_factor(sigma_sq: f64, gamma: f64, beta: usize, m: usize) -> ContractionFactor {
    ContractionFactor {
        value: 1.0 - beta as f64 * sigma_sq / (gamma * m as f64),
        formula: FactorFormula::Cor1,
    }
}

/// `(1 − σ²/γ, 1 − σ²/(4γ))`
pub fn mm_factors(sigma_sq: f64, gamma: f64) -> (f64, f64) {
    (1.0 - sigma_sq / gamma, 1.0 - sigma_sq / (4.0 * gamma))
}

/// Running product of `factors` times `e0_sq`.
pub fn bound_curve(factors: &[f64], e0_sq: f64) -> Result<Vec<f64>> {
    if let Some(f) = factors.iter().find(|f| !(**f >= 0.0 && **f <= 1.0)) {
        return Err(Error::InvalidInput(format!("contraction factor {f} outside [0, 1]")));
    }
    let mut acc = e0_sq;
    Ok(factors
        .iter()
        .map(|f| {
            acc *= f;
            acc
        })
        .collect())
}

/// Upper bound on the expected dynamic range for Gaussian rows.
///
/// `m_prime` counts rows independent of the current error and
/// `extra_norms_sq_over_var` is `Σ ‖a_i‖²/σ²` over the remaining rows.
pub fn gaussian_gamma_bound(m: usize, m_prime: usize, beta: usize, n: usize, extra_norms_sq_over_var: f64) -> Result<f64> {
    if beta < 2 {
        return Err(Error::InvalidInput("gaussian bound needs beta >= 2".into()));
    }
    if m_prime > m || beta > m_prime {
        return Err(Error::InvalidInput(format!(
            "need beta <= m' <= m, got beta={beta}, m'={m_prime}, m={m}"
        )));
    }
    let log_ratio: f64 = (0..beta)
        .map(|i| ((m - i) as f64).ln() - ((m_prime - i) as f64).ln())
        .sum();
    Ok(log_ratio.exp() * (beta as f64 * n as f64 + extra_norms_sq_over_var) / (beta as f64).ln())
}

/// `c β / ln β` for each `β`.
pub fn conjectured_gauss_curve(betas: &[usize], scale_c: f64) -> Result<Vec<f64>> {
    betas
        .iter()
        .map(|&b| {
            if b < 2 {
                Err(Error::InvalidInput("conjectured curve needs beta >= 2".into()))
            } else {
                Ok(scale_c * b as f64 / (b as f64).ln())
            }
        })
        .collect()
}

/// The `c` for which `c β / ln β` passes through `(beta, gamma)`.
pub fn calibrate_conjecture(beta: usize, gamma: f64) -> Result<f64> {
    if beta < 2 {
        return Err(Error::InvalidInput("calibration needs beta >= 2".into()));
    }
    Ok(gamma * (beta as f64).ln() / beta as f64)
}

/// Dynamic-range bound for incidence systems from the edge differences
/// `d_e = x_i − x_j` of the current error.
pub fn incidence_gamma_bound(edge_differences: &[f64], beta: usize) -> Result<f64> {
    let m = edge_differences.len();
    if beta == 0 || beta > m {
        return Err(Error::InvalidInput(format!("sample size {beta} outside 1..={m}")));
    }
    let sq: Vec<f64> = edge_differences.iter().map(|d| d * d).collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_unstable_by(|&a, &b| sq[a].total_cmp(&sq[b]).then(a.cmp(&b)));
    let total: f64 = sq.iter().sum();
    let top: f64 = order[beta - 1..].iter().map(|&i| sq[i]).sum();
    if top == 0.0 {
        return Err(Error::ZeroResidual);
    }
    Ok(beta as f64 * (m - beta + 1) as f64 * total / (m as f64 * top))
}

/// Inputs for [`dynamic_range_report`] beyond the residual itself.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReportOptions {
    pub mc_samples: Option<usize>,
    /// `(m, n)` of a Gaussian matrix drawn independently of the error.
    pub gaussian: Option<(usize, usize)>,
    /// The residual is a vector of edge differences of an incidence system.
    pub incidence: bool,
}

pub fn dynamic_range_report<R: Rng + ?Sized>(
    system: &LinearSystem,
    x: &[f64],
    beta: usize,
    options: ReportOptions,
    rng: &mut R,
) -> Result<DynamicRangeReport> {
    let r = system.residual(x)?;
    let gamma_exact = dynamic_range_exact(&r, beta)?;
    let gamma_mc = match options.mc_samples {
        Some(s) => Some(dynamic_range_mc(&r, beta, s, rng)?),
        None => None,
    };
    let gaussian_bound = match options.gaussian {
        Some((m, n)) if beta >= 2 => Some(gaussian_gamma_bound(m, m, beta, n, 0.0)?),
        _ => None,
    };
    let incidence_bound = if options.incidence {
        Some(incidence_gamma_bound(&r, beta)?)
    } else {
        None
    };
    Ok(DynamicRangeReport {
        beta,
        gamma_exact,
        gamma_mc,
        lower_bound: gamma_lower_bound(system, x, beta)?,
        trivial_bounds: (1.0, beta as f64),
        gaussian_bound,
        incidence_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{normalize_rows, DenseMatrix, Matrix};
    use crate::rng::stream;
    use crate::selection::enumerate_subsets;

    fn enumerated_gamma(r: &[f64], beta: usize) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for tau in enumerate_subsets(r.len(), beta).unwrap() {
            num += tau.iter().map(|&i| r[i] * r[i]).sum::<f64>();
            den += tau.iter().map(|&i| r[i] * r[i]).fold(0.0, f64::max);
        }
        num / den
    }

    #[test]
    fn gamma_examples() {
        assert!((dynamic_range_exact(&[3.0; 7], 4).unwrap() - 4.0).abs() < 1e-12);
        assert!((dynamic_range_exact(&[0.0, 0.0, 5.0, 0.0], 3).unwrap() - 1.0).abs() < 1e-12);
        assert!((dynamic_range_exact(&[0.3, -2.0, 1.1], 1).unwrap() - 1.0).abs() < 1e-12);
        assert!((dynamic_range_exact(&[1.0, 2.0], 2).unwrap() - 1.25).abs() < 1e-14);
        assert!(matches!(dynamic_range_exact(&[0.0, 0.0], 1), Err(Error::ZeroResidual)));
    }

    #[test]
    fn gamma_matches_enumeration() {
        let r = [0.4, -1.3, 2.2, 0.0, 0.7, 0.7, -3.1, 1.0];
        for beta in 1..=r.len() {
            let exact = dynamic_range_exact(&r, beta).unwrap();
            assert!((exact - enumerated_gamma(&r, beta)).abs() < 1e-10);
        }
    }

    #[test]
    fn monte_carlo_examples() {
        let mut rng = stream(3, 0);
        let (est, hw) = dynamic_range_mc(&[2.0; 10], 4, 500, &mut rng).unwrap();
        assert_eq!(est, 4.0);
        assert_eq!(hw, 0.0);
        let (est, _) = dynamic_range_mc(&[1.0, 5.0, -2.0], 1, 200, &mut rng).unwrap();
        assert_eq!(est, 1.0);
        assert!(dynamic_range_mc(&[1.0, 2.0], 1, 99, &mut rng).is_err());
    }

    #[test]
    fn monte_carlo_covers_exact() {
        let mut rng = stream(8, 0);
        let r: Vec<f64> = (0..30).map(|i| ((i * 37 % 11) as f64 - 5.0) * 0.3 + 0.1).collect();
        let exact = dynamic_range_exact(&r, 5).unwrap();
        let (est, hw) = dynamic_range_mc(&r, 5, 100_000, &mut rng).unwrap();
        assert!((est - exact).abs() <= hw * 1.5, "est {est} ± {hw}, exact {exact}");
    }

    #[test]
    fn identity_lower_bound() {
        let m = 5;
        let a: Matrix = DenseMatrix::identity(m).into();
        let sys = LinearSystem::new(a, vec![1.0; m]).unwrap();
        let x = vec![0.0, 0.5, -1.0, 2.0, 0.0];
        let lb = gamma_lower_bound(&sys, &x, 1).unwrap();
        assert!((lb - 1.0 / m as f64).abs() < 1e-14);
        let lb3 = gamma_lower_bound(&sys, &x, 3).unwrap();
        assert!((lb3 - 3.0 / m as f64).abs() < 1e-12);
    }

    #[test]
    fn thm2_reductions() {
        let rows: Vec<Vec<f64>> = vec![
            vec![1.0, 2.0, 0.0],
            vec![0.0, 1.0, -1.0],
            vec![3.0, 0.0, 1.0],
            vec![1.0, 1.0, 1.0],
            vec![-2.0, 0.5, 1.0],
        ];
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let a: Matrix = DenseMatrix::from_rows(&refs).unwrap().into();
        let sys = normalize_rows(&LinearSystem::from_solution(a, &[1.0, -1.0, 2.0]).unwrap()).unwrap();
        let x = [0.2, 0.4, -0.3];
        let sigma = sys.sigma_min_sq().unwrap();
        let r = sys.residual(&x).unwrap();
        for beta in 1..=5 {
            let gamma = dynamic_range_exact(&r, beta).unwrap();
            let thm2 = contraction_thm2(&sys, &x, beta).unwrap().value;
            let cor1 = cor1_factor(sigma, gamma, beta, 5).value;
            assert!((thm2 - cor1).abs() < 1e-12);
            let cor3 = contraction_cor3(&sys, &x, beta, 1.0).unwrap().value;
            assert_eq!(thm2, cor3);
        }
        let rk = rk_factor(sigma, 5.0).value;
        assert!((contraction_thm2(&sys, &x, 1).unwrap().value - rk).abs() < 1e-12);
        assert!(contraction_cor3(&sys, &x, 2, 0.0).is_err());
    }

    #[test]
    fn rank_one_factor_is_zero() {
        let a: Matrix = DenseMatrix::from_rows(&[&[1.0, 2.0], &[2.0, 4.0], &[-1.0, -2.0]]).unwrap().into();
        let sys = LinearSystem::from_solution(a, &[1.0, 0.0]).unwrap();
        let x = [0.3, -0.7];
        for beta in 1..=3 {
            let f = contraction_thm2(&sys, &x, beta).unwrap().value;
            assert!(f.abs() < 1e-12, "beta {beta}: {f}");
            assert!(f >= 0.0);
        }
    }

    #[test]
    fn equal_norm_reduction() {
        let a: Matrix = DenseMatrix::from_rows(&[&[2.0, 0.0], &[0.0, 2.0], &[2f64.sqrt(), 2f64.sqrt()]])
            .unwrap()
            .into();
        let sys = LinearSystem::from_solution(a, &[1.0, 1.0]).unwrap();
        let x = [0.0, 0.3];
        let sigma = sys.sigma_min_sq().unwrap();
        let r = sys.residual(&x).unwrap();
        let gamma = dynamic_range_exact(&r, 2).unwrap();
        let expected = 1.0 - 2.0 * sigma / (gamma * 12.0);
        assert!((contraction_thm2(&sys, &x, 2).unwrap().value - expected).abs() < 1e-12);
    }

    #[test]
    fn epsilon_examples() {
        assert_eq!(uniform_epsilon(&[1.0, 4.0], 1), 0.25);
        assert_eq!(uniform_epsilon(&[3.0, 3.0, 3.0], 2), 1.0);
        assert_eq!(uniform_epsilon(&[1.0, 4.0], 2), 1.0);
    }

    #[test]
    fn mm_examples() {
        assert_eq!(mm_factors(1.0, 2.0), (0.5, 0.875));
        let (a, b) = mm_factors(1.0, 1e12);
        assert!(a > 0.999 && b > 0.999);
    }

    #[test]
    fn bound_curve_examples() {
        assert_eq!(bound_curve(&[1.0, 1.0], 3.0).unwrap(), vec![3.0, 3.0]);
        assert_eq!(bound_curve(&[0.5; 3], 1.0).unwrap(), vec![0.5, 0.25, 0.125]);
        assert!(bound_curve(&[1.5], 1.0).is_err());
        assert!(bound_curve(&[f64::NAN], 1.0).is_err());
    }

    #[test]
    fn gaussian_bound_examples() {
        let plain = gaussian_gamma_bound(50, 50, 4, 10, 0.0).unwrap();
        assert!((plain - 40.0 / 4f64.ln()).abs() < 1e-12);
        let shifted = gaussian_gamma_bound(100, 98, 10, 5, 0.0).unwrap();
        assert!((shifted - 26.838423038964997).abs() < 1e-10);
        assert!(gaussian_gamma_bound(10, 10, 1, 3, 0.0).is_err());
        assert!(gaussian_gamma_bound(10, 11, 2, 3, 0.0).is_err());
    }

    #[test]
    fn conjecture_examples() {
        let e2 = std::f64::consts::E * std::f64::consts::E;
        let v = 1.0 * e2 / e2.ln();
        assert!((v - e2 / 2.0).abs() < 1e-14);
        let curve = conjectured_gauss_curve(&[3, 4, 8, 100, 1000], 1.0).unwrap();
        assert!(curve.windows(2).all(|w| w[0] < w[1]));
        let c = calibrate_conjecture(4, 2.5).unwrap();
        assert!((conjectured_gauss_curve(&[4], c).unwrap()[0] - 2.5).abs() < 1e-14);
        assert!(conjectured_gauss_curve(&[1], 1.0).is_err());
    }

    #[test]
    fn incidence_examples() {
        let d = [0.3, -1.0, 2.0, 0.1];
        assert!((incidence_gamma_bound(&d, 1).unwrap() - 1.0).abs() < 1e-14);
        let flat = [1.5; 6];
        for beta in 1..=6 {
            assert!((incidence_gamma_bound(&flat, beta).unwrap() - beta as f64).abs() < 1e-12);
        }
        for beta in 1..=4 {
            assert!(incidence_gamma_bound(&d, beta).unwrap() >= dynamic_range_exact(&d, beta).unwrap() - 1e-12);
        }
        assert!(incidence_gamma_bound(&[0.0, 0.0, 1.0], 3).is_ok());
        assert!(incidence_gamma_bound(&[1.0, 0.0, 0.0], 3).is_ok());
        assert!(matches!(incidence_gamma_bound(&[0.0, 0.0], 2), Err(Error::ZeroResidual)));
    }
}

mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{dense, enumerated_expected_error, enumerated_gamma, enumerated_subset_law, scan_argmax};
use skm_core::analysis::{
    bound_curve, contraction_thm2, dynamic_range_exact, gamma_lower_bound, incidence_gamma_bound, mm_factors,
};
use skm_core::selection::{argmax_weights, generalized_marginals, rank_residuals, select_skm, SubsetSampler};
use skm_core::solvers::block_kaczmarz_step;
use skm_core::linalg::project_row;
use skm_core::LinearSystem;

fn residual_strategy(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    // small integer grid so ties are common
    prop::collection::vec((-4i32..=4).prop_map(|v| v as f64 * 0.5), 1..=max_len)
        .prop_filter("nonzero", |r| r.iter().any(|&v| v != 0.0))
}

/// `(m, n, entries, x_star, x0 coefficients)` for a small consistent system.
fn system_strategy() -> impl Strategy<Value = (usize, usize, Vec<f64>, Vec<f64>, Vec<f64>)> {
    (2usize..=8, 1usize..=4).prop_flat_map(|(m, n)| {
        (
            Just(m),
            Just(n),
            prop::collection::vec(-3.0f64..3.0, m * n),
            prop::collection::vec(-2.0f64..2.0, n),
            prop::collection::vec(-2.0f64..2.0, m),
        )
    })
}

fn build(m: usize, n: usize, data: Vec<f64>, x_star: &[f64]) -> Option<LinearSystem> {
    LinearSystem::from_solution(dense(m, n, data), x_star).ok()
}

fn row_space_point(sys: &LinearSystem, z: &[f64]) -> Vec<f64> {
    sys.matrix().tr_mul_vec(z).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn ranks_are_a_permutation(r in residual_strategy(20)) {
        let ranked = rank_residuals(&r).unwrap();
        let mut ranks = ranked.rank().to_vec();
        ranks.sort_unstable();
        prop_assert_eq!(ranks, (1..=r.len()).collect::<Vec<_>>());
        prop_assert_eq!(ranked.rank()[ranked.top()], r.len());
    }

    #[test]
    fn argmax_fractions_sum_to_one(r in residual_strategy(30), pick in 0usize..1000) {
        let m = r.len();
        let beta = 1 + pick % m;
        let w = argmax_weights(&rank_residuals(&r).unwrap(), beta).unwrap();
        let total: f64 = (0..m).map(|i| w.subset_fraction(i)).sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn gamma_laws(r in residual_strategy(8), pick in 0usize..1000) {
        let beta = 1 + pick % r.len();
        let g = dynamic_range_exact(&r, beta).unwrap();
        prop_assert!(g >= 1.0 - 1e-12 && g <= beta as f64 + 1e-12);
        prop_assert!((g - enumerated_gamma(&r, beta)).abs() < 1e-10);
    }

    #[test]
    fn gamma_is_scale_invariant(r in residual_strategy(12), c in 0.01f64..100.0, pick in 0usize..1000) {
        let beta = 1 + pick % r.len();
        let scaled: Vec<f64> = r.iter().map(|v| -c * v).collect();
        let a = dynamic_range_exact(&r, beta).unwrap();
        let b = dynamic_range_exact(&scaled, beta).unwrap();
        prop_assert!((a - b).abs() < 1e-10 * a);
    }

    #[test]
    fn selected_row_is_subset_argmax(r in residual_strategy(12), seed in any::<u64>(), pick in 0usize..1000) {
        let beta = 1 + pick % r.len();
        let ranked = rank_residuals(&r).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tau = SubsetSampler::new(r.len()).sample(beta, &mut rng).unwrap().to_vec();
        prop_assert_eq!(select_skm(&ranked, &tau), Some(scan_argmax(&r, &tau)));
    }

    #[test]
    fn marginals_match_enumeration((m, n, data, x_star, z) in system_strategy(), pick in 0usize..100) {
        let Some(sys) = build(m, n, data, &x_star) else { return Ok(()) };
        let x = row_space_point(&sys, &z);
        let r = sys.residual(&x).unwrap();
        prop_assume!(r.iter().any(|&v| v != 0.0));
        let beta = 1 + pick % m.min(3);
        let p = generalized_marginals(&rank_residuals(&r).unwrap(), sys.row_norms_sq(), beta).unwrap();
        let mut q = vec![0.0; m];
        for (_, t, prob) in enumerated_subset_law(&sys, &x, beta) {
            q[t] += prob;
        }
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn expected_step_obeys_contraction((m, n, data, x_star, z) in system_strategy(), pick in 0usize..100) {
        let Some(sys) = build(m, n, data, &x_star) else { return Ok(()) };
        prop_assume!(sys.sigma_min_sq().is_ok());
        let x = row_space_point(&sys, &z);
        prop_assume!(sys.residual(&x).unwrap().iter().any(|&v| v != 0.0));
        let beta = 1 + pick % m.min(3);
        let expected = enumerated_expected_error(&sys, &x, beta);
        let factor = contraction_thm2(&sys, &x, beta).unwrap().value;
        let e0 = sys.error_sq(&x);
        prop_assert!(factor * e0 - expected >= -1e-12 * (1.0 + e0), "slack {}", factor * e0 - expected);
        prop_assert!(factor <= 1.0);
        prop_assert!(gamma_lower_bound(&sys, &x, beta).unwrap()
            <= dynamic_range_exact(&sys.residual(&x).unwrap(), beta).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn block_step_dominates((m, n, data, x_star, z) in system_strategy(), seed in any::<u64>(), pick in 0usize..100) {
        let Some(sys) = build(m, n, data, &x_star) else { return Ok(()) };
        let x: Vec<f64> = (0..n).map(|j| x_star[j] + z[j % m]).collect();
        let x = x.as_slice();
        let beta = 1 + pick % m;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tau = SubsetSampler::new(m).sample(beta, &mut rng).unwrap().to_vec();
        let r = sys.residual(x).unwrap();
        let t = scan_argmax(&r, &tau);
        let skm = project_row(x, sys.matrix().row(t), sys.rhs()[t], sys.row_norms_sq()[t]).unwrap();
        let bk = block_kaczmarz_step(&sys, &tau, x).unwrap();
        let (e_bk, e_skm, e0) = (sys.error_sq(&bk), sys.error_sq(&skm), sys.error_sq(x));
        prop_assert!(e_bk <= e_skm + 1e-10 * (1.0 + e0));
        prop_assert!(e_skm <= e0 + 1e-10 * (1.0 + e0));
    }

    #[test]
    fn incidence_bound_dominates_gamma(d in residual_strategy(12), pick in 0usize..1000) {
        let beta = 1 + pick % d.len();
        let bound = match incidence_gamma_bound(&d, beta) {
            Ok(b) => b,
            Err(_) => return Ok(()),
        };
        prop_assert!(bound >= dynamic_range_exact(&d, beta).unwrap() * (1.0 - 1e-12));
    }

    #[test]
    fn mm_ordering(s in 1e-6f64..10.0, g in 1.0f64..1e4) {
        let (improved, hn18) = mm_factors(s, g);
        prop_assert!(improved < hn18);
    }

    #[test]
    fn bound_curves_do_not_increase(f in prop::collection::vec(0.0f64..=1.0, 1..50), e0 in 0.0f64..10.0) {
        let c = bound_curve(&f, e0).unwrap();
        prop_assert!(c[0] <= e0);
        prop_assert!(c.windows(2).all(|w| w[1] <= w[0]));
    }
}

mod common;

use proptest::prelude::*;

use common::dense;
use skm_core::graphs::{ac_system, barabasi_albert, complete_graph, incidence_matrix};
use skm_core::linalg::{fixed_point, normalize_rows};
use skm_core::rng::{stream, trial_stream};
use skm_core::selection::RuleKind;
use skm_core::solvers::{cgls_run, kaczmarz_run, Instrumentation};
use skm_core::{BetaSchedule, LinearSystem, StopCriteria};

fn rules(m: usize) -> Vec<(RuleKind, BetaSchedule)> {
    vec![
        (RuleKind::Rk, BetaSchedule::fixed(1)),
        (RuleKind::Mm, BetaSchedule::fixed(m)),
        (RuleKind::SkmUniform, BetaSchedule::fixed((m / 2).max(1))),
        (RuleKind::SkmUniform, BetaSchedule::SlowInc),
        (RuleKind::SkmUniform, BetaSchedule::RandUniform),
        (RuleKind::SkmUniform, BetaSchedule::use_dyn_rng(1)),
        (RuleKind::SkmExact, BetaSchedule::fixed(2.min(m))),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn error_never_increases(
        (m, n, data, x_star) in (2usize..12, 1usize..5).prop_flat_map(|(m, n)| (
            Just(m), Just(n),
            prop::collection::vec(-3.0f64..3.0, m * n),
            prop::collection::vec(-2.0f64..2.0, n),
        )),
        seed in any::<u64>(),
    ) {
        let Ok(sys) = LinearSystem::from_solution(dense(m, n, data), &x_star) else { return Ok(()) };
        prop_assume!(sys.is_consistent());
        for (rule, schedule) in rules(m) {
            let run = kaczmarz_run(&sys, rule, schedule, StopCriteria::iterations(40), &mut stream(seed, 1),
                &Instrumentation::default()).unwrap();
            for w in run.records.windows(2) {
                // re-projecting onto a satisfied row moves x by roundoff only
                prop_assert!(w[1].error_sq <= w[0].error_sq * (1.0 + 1e-10) + 1e-20, "{rule} {schedule:?}");
                prop_assert!(w[1].cumulative_flops >= w[0].cumulative_flops);
                prop_assert!(w[1].k > w[0].k);
            }
        }
    }
}

fn gaussian_system(m: usize, n: usize, seed: u64) -> LinearSystem {
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = stream(seed, 0);
    let data: Vec<f64> = (0..m * n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    LinearSystem::from_solution(dense(m, n, data), &x).unwrap()
}

#[test]
fn runs_are_deterministic() {
    let sys = gaussian_system(60, 6, 3);
    let instr = Instrumentation {
        track_bound: true,
        ..Default::default()
    };
    for (rule, schedule) in rules(60) {
        let a = kaczmarz_run(&sys, rule, schedule, StopCriteria::iterations(50), &mut trial_stream(5, 0), &instr).unwrap();
        let b = kaczmarz_run(&sys, rule, schedule, StopCriteria::iterations(50), &mut trial_stream(5, 0), &instr).unwrap();
        assert!(a.same_trace(&b), "{rule} {schedule:?}");
    }
}

#[test]
fn tracked_bounds_are_valid_factors() {
    let sys = normalize_rows(&gaussian_system(80, 8, 4)).unwrap();
    let instr = Instrumentation {
        track_bound: true,
        ..Default::default()
    };
    for (rule, schedule) in rules(80) {
        let run = kaczmarz_run(&sys, rule, schedule, StopCriteria::iterations(100), &mut trial_stream(1, 0), &instr).unwrap();
        for r in &run.records[1..] {
            let f = r.bound_factor.unwrap();
            assert!(f > 0.0 && f <= 1.0, "{rule} factor {f}");
        }
        let bounds: Vec<f64> = run.records.iter().map(|r| r.bound.unwrap()).collect();
        assert!(bounds.windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn every_rule_converges_on_a_tall_system() {
    let sys = gaussian_system(200, 10, 8);
    let stop = StopCriteria {
        max_iterations: 20_000,
        error_tol: Some(1e-12),
        residual_tol: None,
    };
    for (rule, schedule) in rules(200) {
        let run = kaczmarz_run(&sys, rule, schedule, stop, &mut trial_stream(2, 0), &Instrumentation::default()).unwrap();
        assert_eq!(run.status, skm_core::RunStatus::Converged, "{rule} {schedule:?}");
    }
    let cg = cgls_run(&sys, stop).unwrap();
    assert_eq!(cg.status, skm_core::RunStatus::Converged);
}

#[test]
fn cgls_reaches_min_norm_solution_when_rank_deficient() {
    // third column repeats the first
    let rows = [[1.0, 2.0, 1.0], [0.0, 1.0, 0.0], [3.0, -1.0, 3.0], [1.0, 1.0, 1.0]];
    let data: Vec<f64> = rows.iter().flatten().copied().collect();
    let sys = LinearSystem::new(dense(4, 3, data), vec![3.0, 1.0, 2.0, 2.0]).unwrap();
    assert!(sys.is_consistent());
    let run = cgls_run(&sys, StopCriteria { max_iterations: 50, error_tol: Some(1e-24), residual_tol: None }).unwrap();
    assert!(run.final_error_sq() < 1e-20);
}

#[test]
fn consensus_fixed_point_is_the_mean() {
    for graph in [complete_graph(12).unwrap(), barabasi_albert(40, 5, 3, &mut stream(2, 0)).unwrap()] {
        let q = incidence_matrix(&graph);
        for i in 0..q.rows() {
            assert_eq!(q.row(i).dot(&vec![1.0; q.cols()]), 0.0);
        }
        let values: Vec<f64> = (0..graph.vertex_count()).map(|i| ((i * 7) % 5) as f64 - 1.3).collect();
        let sys = ac_system(&graph, &values).unwrap();
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let fp = fixed_point(&sys, &values).unwrap();
        assert!(fp.iter().all(|v| (v - mean).abs() < 1e-10));
    }
}

#[test]
fn preferential_attachment_is_heavy_tailed() {
    for seed in 0..20 {
        let g = barabasi_albert(300, 5, 5, &mut stream(seed, 0)).unwrap();
        let mut deg = g.degrees();
        deg.sort_unstable();
        let median = (deg[149] + deg[150]) as f64 / 2.0;
        assert!(*deg.last().unwrap() as f64 >= 5.0 * median, "seed {seed}");
    }
}

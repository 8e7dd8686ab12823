mod common;

use kgraph::simulation::SimulationOptions;
use kgraph::{
    build_kmst, estimate_power, generate_scenario, null_moments, pairwise_distances, permutation_test, ss_test,
    Dataset, Error, Family, Method, Metric, ScenarioSpec, SimilarityGraph, StatKind, TestContext,
};

#[test]
fn separated_clusters_reach_smallest_permutation_p_value() {
    let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![if i < 20 { 0.0 } else { 100.0 }, i as f64 * 0.01]).collect();
    let labels: Vec<usize> = (0..40).map(|i| usize::from(i >= 20)).collect();
    let data = Dataset::from_rows(rows, labels).unwrap();
    let g = build_kmst(&pairwise_distances(&data, Metric::Euclidean), 3).unwrap();
    let r = permutation_test(&g, data.labels(), data.group_sizes(), StatKind::Sum, 999, 5).unwrap();
    assert_eq!(r.p_value, 1.0 / 1000.0);
    assert_eq!(r.n_permutations, Some(999));
}

#[test]
fn permutation_p_value_is_super_uniform_under_null() {
    // 5000 rather than 1000 replicates: the bound is only ~1.5 Monte Carlo
    // standard errors above the nominal rate at 1000.
    const REPS: usize = 5000;
    const B: usize = 99;
    let alpha = 0.05;
    let spec = ScenarioSpec::balanced(Family::S1Location, 3, 5, 15, 0.0);
    let report = estimate_power(
        &spec,
        &[Method::PermSum],
        alpha,
        REPS,
        314,
        SimulationOptions { k_mst: 3, n_perm: B, ..Default::default() },
    )
    .unwrap();
    let rate = report.results[0].rate;
    assert!(rate <= alpha + 1.0 / (B as f64 + 1.0), "rate {rate}");
}

#[test]
fn permutation_p_value_tracks_exact_enumeration() {
    let g = SimilarityGraph::path(8);
    let labels = [0, 0, 1, 0, 1, 1, 2, 2];
    let sizes = [3, 3, 2];
    let m = null_moments(&g, &sizes).unwrap();
    for kind in [StatKind::Within, StatKind::All] {
        let exact = common::exact_permutation_p(&g, &labels, &sizes, &m, kind);
        let b = 20_000;
        let got = permutation_test(&g, &labels, &sizes, kind, b, 77).unwrap().p_value;
        let se = (exact * (1.0 - exact) / b as f64).sqrt();
        assert!((got - exact).abs() <= 3.0 * se + 1.0 / b as f64, "{kind:?}: {got} vs {exact}");
    }
}

#[test]
fn fast_combined_size_with_five_groups_in_high_dimension() {
    let spec = ScenarioSpec::balanced(Family::S1Location, 5, 100, 50, 0.0);
    let report = estimate_power(&spec, &[Method::FastCombined], 0.05, 1000, 99, SimulationOptions::default()).unwrap();
    let rate = report.results[0].rate;
    assert!((0.025..=0.07).contains(&rate), "rate {rate}");
}

#[test]
fn single_group_is_rejected() {
    let g = SimilarityGraph::path(5);
    let err = ss_test(&g, &[0; 5], &[5]).unwrap_err();
    assert!(matches!(err, Error::InvalidInput(_)));
    assert!(err.to_string().contains("need at least two groups"));
}

#[test]
fn run_dispatches_every_method() {
    let spec = ScenarioSpec::balanced(Family::S2Scale, 3, 10, 20, 0.5);
    let data = generate_scenario(&spec, 1, 0).unwrap();
    let g = build_kmst(&pairwise_distances(&data, Metric::Euclidean), 5).unwrap();
    let ctx = TestContext::new(&g, data.labels(), data.group_sizes()).unwrap();
    for method in Method::ALL {
        let r = ctx.run(method, 200, 3).unwrap();
        assert_eq!(r.method, method);
        assert!((0.0..=1.0).contains(&r.p_value));
        assert_eq!(r.n_permutations.is_some(), method.is_permutation());
        assert_eq!(Method::from_label(method.label()), Some(method));
    }
}

mod common;

use std::collections::HashSet;

use kgraph::{build_kmst, build_kmst_trees, condition_stats, pairwise_distances, Dataset, DistanceMatrix, Metric};
use proptest::prelude::*;

fn random_points(n: usize, d: usize, seed: u64) -> Dataset {
    use rand::Rng;
    let mut r = common::rng(seed);
    let rows = (0..n).map(|_| (0..d).map(|_| r.random::<f64>()).collect()).collect();
    Dataset::from_rows(rows, vec![0; n]).unwrap()
}

fn is_connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in edges {
        adj[u].push(v);
        adj[v].push(u);
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(x) = stack.pop() {
        for &y in &adj[x] {
            if !seen[y] {
                seen[y] = true;
                stack.push(y);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn kmst_degree_sum_and_connectivity(n in 2usize..40, k in 1usize..6, seed in any::<u64>()) {
        prop_assume!(2 * k <= n);
        let d = pairwise_distances(&random_points(n, 3, seed), Metric::Euclidean);
        // Greedy peeling may run out of edges before k trees; that must surface as an error.
        let g = match build_kmst(&d, k) {
            Ok(g) => g,
            Err(kgraph::Error::Construction { .. }) if k > 1 => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        prop_assert_eq!(g.edge_count(), k * (n - 1));
        prop_assert_eq!(g.degrees().iter().sum::<usize>(), 2 * k * (n - 1));
        let trees = build_kmst_trees(&d, k).unwrap();
        prop_assert!(is_connected(n, &trees[0]));
        let mut all = HashSet::new();
        for t in &trees {
            prop_assert!(is_connected(n, t));
            for e in t {
                prop_assert!(all.insert(*e));
            }
        }
    }

    #[test]
    fn kmst_is_permutation_equivariant(n in 4usize..25, k in 1usize..3, seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let ds = random_points(n, 2, seed);
        let d = pairwise_distances(&ds, Metric::Euclidean);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut common::rng(seed ^ 0x5eed));
        // Node i of the original becomes node perm[i].
        let mut rows = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                rows[perm[i]][perm[j]] = d.get(i, j);
            }
        }
        let permuted = DistanceMatrix::from_rows(rows).unwrap();
        let (g, h) = match (build_kmst(&d, k), build_kmst(&permuted, k)) {
            (Ok(g), Ok(h)) => (g, h),
            (Err(_), Err(_)) => return Ok(()),
            _ => return Err(TestCaseError::fail("construction succeeded on only one labelling")),
        };
        let mapped: HashSet<(usize, usize)> = g
            .edges()
            .iter()
            .map(|&(u, v)| (perm[u].min(perm[v]), perm[u].max(perm[v])))
            .collect();
        let got: HashSet<(usize, usize)> = h.edges().iter().copied().collect();
        prop_assert_eq!(mapped, got);
    }

    #[test]
    fn degree_squares_bound(n in 1usize..30, p in 0.0f64..0.8, seed in any::<u64>()) {
        let g = common::random_graph(n, p, &mut common::rng(seed));
        let s = condition_stats(&g);
        let bound = 4.0 * (s.edge_count as f64).powi(2) / n as f64;
        prop_assert!(s.sum_sq_degrees as f64 >= bound - 1e-9 * bound.max(1.0));
        prop_assert!(s.ratio_edges >= 0.0 && s.ratio_hub >= 0.0 && s.ratio_ab >= 0.0);
    }
}

/// `|A_e|` and `|B_e|` by brute force over edge pairs.
#[test]
fn condition_stats_match_set_definition() {
    let mut r = common::rng(77);
    for _ in 0..30 {
        let g = common::random_graph(12, 0.25, &mut r);
        let edges = g.edges();
        let touches = |a: (usize, usize), b: (usize, usize)| a.0 == b.0 || a.0 == b.1 || a.1 == b.0 || a.1 == b.1;
        let mut expected = 0u64;
        for &e in edges {
            let a: Vec<_> = edges.iter().copied().filter(|&f| touches(e, f)).collect();
            let b = edges.iter().filter(|&&f| a.iter().any(|&x| touches(x, f))).count();
            expected += (a.len() * b) as u64;
        }
        assert_eq!(condition_stats(&g).sum_ab, expected);
    }
}

#[test]
fn five_mst_on_gaussian_data_has_expected_size() {
    let spec = kgraph::ScenarioSpec::balanced(kgraph::Family::S1Location, 3, 50, 50, 0.0);
    let data = kgraph::generate_scenario(&spec, 1, 0).unwrap();
    let g = build_kmst(&pairwise_distances(&data, Metric::Euclidean), 5).unwrap();
    assert_eq!(g.edge_count(), 5 * 149);
    let s = condition_stats(&g);
    assert!((s.ratio_edges - 5.0 * 149.0 / 150.0).abs() < 1e-12);
}

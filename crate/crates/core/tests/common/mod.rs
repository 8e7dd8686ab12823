//! Test-only oracles and fixtures, independent of the library code paths they
//! check.

#![allow(dead_code)]

use kgraph::moments::for_each_assignment;
use kgraph::{count_edges, SimilarityGraph, StatEvaluator, StatKind, NullMoments, RankTolerance};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random labelled tree from a Prüfer sequence.
pub fn random_tree(n: usize, rng: &mut impl Rng) -> SimilarityGraph {
    if n <= 2 {
        return SimilarityGraph::path(n);
    }
    let seq: Vec<usize> = (0..n - 2).map(|_| rng.random_range(0..n)).collect();
    let mut degree = vec![1usize; n];
    for &s in &seq {
        degree[s] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    for &s in &seq {
        let leaf = (0..n).find(|&t| degree[t] == 1).unwrap();
        edges.push((leaf, s));
        degree[leaf] -= 1;
        degree[s] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&t| degree[t] == 1).collect();
    edges.push((rest[0], rest[1]));
    SimilarityGraph::from_edges(n, edges).unwrap()
}

/// Erdős–Rényi style graph with edge probability `p`.
pub fn random_graph(n: usize, p: f64, rng: &mut impl Rng) -> SimilarityGraph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                edges.push((i, j));
            }
        }
    }
    SimilarityGraph::from_edges(n, edges).unwrap()
}

/// Every ordered composition of `n` into `k` positive parts.
pub fn compositions(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 1 {
        return if n >= 1 { vec![vec![n]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in 1..n {
        for mut rest in compositions(n - first, k - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Labels with the given group sizes in a random order.
pub fn shuffled_labels(sizes: &[usize], rng: &mut impl Rng) -> Vec<usize> {
    let mut labels: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(g, &s)| std::iter::repeat_n(g, s))
        .collect();
    labels.shuffle(rng);
    labels
}

/// Exact permutation p-value `P(T >= T_obs)` by enumerating every assignment.
pub fn exact_permutation_p(
    graph: &SimilarityGraph,
    labels: &[usize],
    sizes: &[usize],
    moments: &NullMoments,
    kind: StatKind,
) -> f64 {
    let k = sizes.len();
    let ev = StatEvaluator::new(moments, kind, RankTolerance::default()).unwrap();
    let observed = ev.evaluate(&count_edges(graph, labels, k).unwrap()).value;
    let (mut hits, mut total) = (0u64, 0u64);
    for_each_assignment(sizes, |l| {
        total += 1;
        if ev.evaluate(&count_edges(graph, l, k).unwrap()).value >= observed {
            hits += 1;
        }
    });
    hits as f64 / total as f64
}

/// Solves `A y = b` by Gaussian elimination with partial pivoting.
pub fn solve_dense(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &bi)| {
            let mut r = row.clone();
            r.push(bi);
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, piv);
        let pivot = m[col].clone();
        for row in m.iter_mut().skip(col + 1) {
            let f = row[col] / pivot[col];
            for (v, p) in row.iter_mut().zip(&pivot).skip(col) {
                *v -= f * p;
            }
        }
    }
    let mut y = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| m[row][c] * y[c]).sum();
        y[row] = (m[row][n] - s) / m[row][row];
    }
    y
}

/// `d^T A^{-1} d` through a dense solve.
pub fn mahalanobis_dense(d: &[f64], a: &[Vec<f64>]) -> f64 {
    let y = solve_dense(a, d);
    d.iter().zip(&y).map(|(x, y)| x * y).sum()
}

/// `ln Γ(k / 2)` for positive integer `k` from exact factorial identities.
fn ln_gamma_half_integer(k: usize) -> f64 {
    let ln_fact = |m: usize| (1..=m).map(|i| (i as f64).ln()).sum::<f64>();
    if k.is_multiple_of(2) {
        ln_fact(k / 2 - 1)
    } else {
        // Γ(m + 1/2) = (2m)! sqrt(pi) / (4^m m!)
        let m = (k - 1) / 2;
        ln_fact(2 * m) + 0.5 * std::f64::consts::PI.ln() - (m as f64) * 4f64.ln() - ln_fact(m)
    }
}

#[allow(clippy::too_many_arguments)]
fn simpson_adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_adaptive(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + simpson_adaptive(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
}

/// `P(χ²_k >= x)` for `x > 0` by adaptive Simpson quadrature of the density
/// over `[x, x + span]`, where the remaining tail is far below `1e-15`.
pub fn chi_square_sf_quadrature(x: f64, k: usize) -> f64 {
    let half = k as f64 / 2.0;
    let log_norm = half * 2f64.ln() + ln_gamma_half_integer(k);
    let density = move |t: f64| {
        if t <= 0.0 {
            0.0
        } else {
            ((half - 1.0) * t.ln() - t / 2.0 - log_norm).exp()
        }
    };
    let upper = x.max(k as f64) + 40.0 * (2.0 * k as f64).sqrt() + 200.0;
    let pieces = 400;
    let h = (upper - x) / pieces as f64;
    (0..pieces)
        .map(|i| {
            let a = x + i as f64 * h;
            let b = a + h;
            let (fa, fb, fm) = (density(a), density(b), density(0.5 * (a + b)));
            let whole = h / 6.0 * (fa + 4.0 * fm + fb);
            simpson_adaptive(&density, a, b, fa, fm, fb, whole, 1e-16, 40)
        })
        .sum()
}

/// Pass/fail line printed by the acceptance harness.
pub fn report(id: u32, ok: bool, detail: impl AsRef<str>) -> bool {
    println!(
        "criterion {id:>2} [{}] {}",
        if ok { "PASS" } else { "FAIL" },
        detail.as_ref()
    );
    ok
}

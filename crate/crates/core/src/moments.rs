//! Within/between-sample edge counts and their permutation-null moments.
//!
//! The full count vector is ordered `(R_11, ..., R_KK, R_12, R_13, ..., R_(K-1)K)`:
//! the `K` within-sample counts followed by the between-sample counts in
//! row-major upper-triangle order. Groups are 0-based in code.

use nalgebra::{DMatrix, DVector};
use serde::{Serialize, Serializer};

use crate::data::check_labels;
use crate::error::{Error, Result};
use crate::graph::SimilarityGraph;

/// Position of each `R_ij` inside the full count vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CountLayout {
    k: usize,
}

/// One entry of the full count vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CountEntry {
    Within(usize),
    Between(usize, usize),
}

impl CountLayout {
    pub fn new(k: usize) -> Self {
        Self { k }
    }

    pub fn groups(&self) -> usize {
        self.k
    }

    /// `K (K + 1) / 2`
    pub fn len(&self) -> usize {
        self.k * (self.k + 1) / 2
    }

    pub fn is_empty(&self) -> bool {
        self.k == 0
    }

    /// Index of `R_ij` (either order) in the full vector.
    pub fn index(&self, i: usize, j: usize) -> usize {
        let (i, j) = (i.min(j), i.max(j));
        if i == j {
            i
        } else {
            // Between entries of rows 0..i precede row i.
            self.k + i * (2 * self.k - i - 1) / 2 + (j - i - 1)
        }
    }

    /// Entries in full-vector order.
    pub fn entries(&self) -> Vec<CountEntry> {
        let mut out: Vec<CountEntry> = (0..self.k).map(CountEntry::Within).collect();
        for i in 0..self.k {
            for j in i + 1..self.k {
                out.push(CountEntry::Between(i, j));
            }
        }
        out
    }

    /// Full-vector indices used by a statistic view.
    pub fn view_indices(&self, view: CountView) -> Vec<usize> {
        match view {
            CountView::Within => (0..self.k).collect(),
            CountView::Between => (self.k..self.len()).collect(),
            // Drop R_(K-1)K, the last between entry.
            CountView::All => (0..self.len().saturating_sub(1)).collect(),
        }
    }
}

/// Subsets of the full count vector entering the quadratic-form statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CountView {
    /// `R^W`: the `K` within-sample counts.
    Within,
    /// `R^B`: the `K (K - 1) / 2` between-sample counts.
    Between,
    /// `R^A`: every count except `R_(K-1)K`.
    All,
}

/// Symmetric `K x K` matrix of edge counts by endpoint groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EdgeCounts {
    k: usize,
    counts: Vec<u64>,
}

impl EdgeCounts {
    pub fn groups(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.k + j]
    }

    /// Sum of the within and upper-triangle between counts, i.e. `|G|`.
    pub fn total(&self) -> u64 {
        let mut s = 0;
        for i in 0..self.k {
            for j in i..self.k {
                s += self.get(i, j);
            }
        }
        s
    }

    /// Counts in full-vector order.
    pub fn full_vector(&self) -> Vec<f64> {
        CountLayout::new(self.k)
            .entries()
            .into_iter()
            .map(|e| match e {
                CountEntry::Within(i) => self.get(i, i) as f64,
                CountEntry::Between(i, j) => self.get(i, j) as f64,
            })
            .collect()
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.k).map(<[u64]>::to_vec).collect()
    }
}

/// Classifies every edge of `graph` by the groups of its endpoints.
pub fn count_edges(graph: &SimilarityGraph, labels: &[usize], k: usize) -> Result<EdgeCounts> {
    if labels.len() != graph.node_count() {
        return Err(Error::invalid(format!(
            "{} labels supplied for a graph on {} nodes",
            labels.len(),
            graph.node_count()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::invalid(format!("label {bad} is outside 0..{k}")));
    }
    Ok(count_edges_unchecked(graph, labels, k))
}

/// Hot path for permutation loops; labels already validated.
pub(crate) fn count_edges_unchecked(graph: &SimilarityGraph, labels: &[usize], k: usize) -> EdgeCounts {
    let mut counts = vec![0u64; k * k];
    for &(u, v) in graph.edges() {
        let (a, b) = (labels[u], labels[v]);
        counts[a * k + b] += 1;
        if a != b {
            counts[b * k + a] += 1;
        }
    }
    EdgeCounts { k, counts }
}

/// Permutation-null mean and covariance of the full count vector.
#[derive(Debug, Clone, PartialEq)]
pub struct NullMoments {
    layout: CountLayout,
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl NullMoments {
    pub fn layout(&self) -> CountLayout {
        self.layout
    }

    pub fn groups(&self) -> usize {
        self.layout.k
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// `E(R_ij)`
    pub fn mean_of(&self, i: usize, j: usize) -> f64 {
        self.mean[self.layout.index(i, j)]
    }

    /// `Var(R_ij)`
    pub fn var_of(&self, i: usize, j: usize) -> f64 {
        let p = self.layout.index(i, j);
        self.cov[(p, p)]
    }

    /// Mean and covariance restricted to arbitrary full-vector indices.
    pub fn restrict(&self, indices: &[usize]) -> (DVector<f64>, DMatrix<f64>) {
        let mean = DVector::from_iterator(indices.len(), indices.iter().map(|&p| self.mean[p]));
        let cov = DMatrix::from_fn(indices.len(), indices.len(), |a, b| {
            self.cov[(indices[a], indices[b])]
        });
        (mean, cov)
    }

    /// Mean and covariance of a statistic view (`Σ_W`, `Σ_B` or `Σ_A`).
    pub fn view(&self, view: CountView) -> (DVector<f64>, DMatrix<f64>) {
        self.restrict(&self.layout.view_indices(view))
    }
}

/// Closed-form null moments from the graph summary.
pub fn null_moments(graph: &SimilarityGraph, group_sizes: &[usize]) -> Result<NullMoments> {
    let n = graph.node_count();
    let total: usize = group_sizes.iter().sum();
    if total != n {
        return Err(Error::invalid(format!(
            "group sizes sum to {total} but the graph has {n} nodes"
        )));
    }
    null_moments_from_summary(graph.edge_count() as u64, graph.sum_sq_degrees(), group_sizes)
}

/// Closed-form null moments from `|G|`, `sum_t |G_t|^2` and the group sizes.
///
/// Uses the pair decomposition of `E(R R^T)`: ordered edge pairs are either
/// identical (`|G|` of them), share one node (`sum |G_t|^2 - 2|G|`), or are
/// node-disjoint (`|G|^2 - sum |G_t|^2 + |G|`), with falling-factorial
/// probabilities for the 2, 3 or 4 nodes involved.
pub fn null_moments_from_summary(
    edge_count: u64,
    sum_sq_degrees: u64,
    group_sizes: &[usize],
) -> Result<NullMoments> {
    let k = group_sizes.len();
    if k == 0 {
        return Err(Error::invalid("at least one group is required"));
    }
    if let Some(i) = group_sizes.iter().position(|&s| s == 0) {
        return Err(Error::invalid(format!("group {i} is empty")));
    }
    let n_total: usize = group_sizes.iter().sum();
    if n_total < 4 {
        return Err(Error::UnsupportedSize(n_total));
    }

    let g = edge_count as f64;
    let s2 = sum_sq_degrees as f64;
    let adjacent = s2 - 2.0 * g;
    let disjoint = g * g - s2 + g;

    let n = n_total as f64;
    let n2 = n * (n - 1.0);
    let n3 = n2 * (n - 2.0);
    let n4 = n3 * (n - 3.0);
    let sz: Vec<f64> = group_sizes.iter().map(|&s| s as f64).collect();

    let layout = CountLayout::new(k);
    let entries = layout.entries();
    let dim = layout.len();

    let mean = DVector::from_iterator(
        dim,
        entries.iter().map(|e| match *e {
            CountEntry::Within(i) => g * sz[i] * (sz[i] - 1.0) / n2,
            CountEntry::Between(i, j) => g * 2.0 * sz[i] * sz[j] / n2,
        }),
    );

    // Second moment E(X Y) for two entries; the covariance subtracts E(X)E(Y).
    let second = |x: CountEntry, y: CountEntry| -> f64 {
        use CountEntry::{Between, Within};
        match (x, y) {
            (Within(i), Within(j)) if i == j => {
                let m = sz[i];
                g * m * (m - 1.0) / n2
                    + adjacent * m * (m - 1.0) * (m - 2.0) / n3
                    + disjoint * m * (m - 1.0) * (m - 2.0) * (m - 3.0) / n4
            }
            (Within(i), Within(j)) => {
                disjoint * sz[i] * (sz[i] - 1.0) * sz[j] * (sz[j] - 1.0) / n4
            }
            (Within(i), Between(a, b)) | (Between(a, b), Within(i)) => {
                if i == a || i == b {
                    let j = if i == a { b } else { a };
                    let (ni, nj) = (sz[i], sz[j]);
                    adjacent * ni * nj * (ni - 1.0) / n3
                        + 2.0 * disjoint * ni * nj * (ni - 1.0) * (ni - 2.0) / n4
                } else {
                    disjoint * 2.0 * sz[i] * (sz[i] - 1.0) * sz[a] * sz[b] / n4
                }
            }
            (Between(a, b), Between(c, d)) if (a, b) == (c, d) => {
                let (ni, nj) = (sz[a], sz[b]);
                g * 2.0 * ni * nj / n2
                    + adjacent * ni * nj * (ni + nj - 2.0) / n3
                    + disjoint * 4.0 * ni * nj * (ni - 1.0) * (nj - 1.0) / n4
            }
            (Between(a, b), Between(c, d)) => {
                let shared = [a, b].into_iter().find(|&x| x == c || x == d);
                match shared {
                    Some(i) => {
                        let j = if i == a { b } else { a };
                        let l = if i == c { d } else { c };
                        let (ni, nj, nl) = (sz[i], sz[j], sz[l]);
                        adjacent * ni * nj * nl / n3
                            + disjoint * 4.0 * ni * nj * nl * (ni - 1.0) / n4
                    }
                    None => disjoint * 4.0 * sz[a] * sz[b] * sz[c] * sz[d] / n4,
                }
            }
        }
    };

    let mut cov = DMatrix::zeros(dim, dim);
    for p in 0..dim {
        for q in p..dim {
            let c = second(entries[p], entries[q]) - mean[p] * mean[q];
            cov[(p, q)] = c;
            cov[(q, p)] = c;
        }
    }
    Ok(NullMoments { layout, mean, cov })
}

/// Number of label assignments with the given group sizes, `N! / prod n_i!`.
pub fn multinomial_count(group_sizes: &[usize]) -> u128 {
    let mut acc: u128 = 1;
    let mut placed: u128 = 0;
    for &s in group_sizes {
        for t in 1..=s as u128 {
            placed += 1;
            // acc * placed / t stays integral: acc tracks a product of binomials.
            acc = acc.saturating_mul(placed) / t;
        }
    }
    acc
}

/// Calls `f` once for every assignment of labels with the given group sizes,
/// in lexicographic order of the label vector.
pub fn for_each_assignment(group_sizes: &[usize], mut f: impl FnMut(&[usize])) {
    fn recurse(pos: usize, labels: &mut Vec<usize>, remaining: &mut [usize], f: &mut dyn FnMut(&[usize])) {
        if pos == labels.len() {
            f(labels);
            return;
        }
        for g in 0..remaining.len() {
            if remaining[g] > 0 {
                remaining[g] -= 1;
                labels[pos] = g;
                recurse(pos + 1, labels, remaining, f);
                remaining[g] += 1;
            }
        }
    }
    let n: usize = group_sizes.iter().sum();
    let mut labels = vec![0; n];
    let mut remaining = group_sizes.to_vec();
    recurse(0, &mut labels, &mut remaining, &mut f);
}

/// Largest number of assignments [`exact_moments_bruteforce`] will enumerate.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

/// Exact null moments by enumerating every label assignment.
///
/// Sums are accumulated in integers so the result is exact up to the final
/// division. Works for any `N >= 1`.
pub fn exact_moments_bruteforce(graph: &SimilarityGraph, group_sizes: &[usize]) -> Result<NullMoments> {
    let n: usize = group_sizes.iter().sum();
    if n != graph.node_count() {
        return Err(Error::invalid(format!(
            "group sizes sum to {n} but the graph has {} nodes",
            graph.node_count()
        )));
    }
    if group_sizes.contains(&0) {
        return Err(Error::invalid("every group must be nonempty"));
    }
    let count = multinomial_count(group_sizes);
    if count > ENUMERATION_LIMIT {
        return Err(Error::TooManyAssignments {
            count,
            limit: ENUMERATION_LIMIT,
        });
    }
    let k = group_sizes.len();
    let layout = CountLayout::new(k);
    let dim = layout.len();
    let mut sum = vec![0i128; dim];
    let mut sum_sq = vec![0i128; dim * dim];
    for_each_assignment(group_sizes, |labels| {
        let v = count_edges_unchecked(graph, labels, k).full_vector();
        let v: Vec<i128> = v.into_iter().map(|x| x as i128).collect();
        for p in 0..dim {
            sum[p] += v[p];
            for q in 0..dim {
                sum_sq[p * dim + q] += v[p] * v[q];
            }
        }
    });
    let m = count as i128;
    let mf = count as f64;
    let mean = DVector::from_iterator(dim, sum.iter().map(|&s| s as f64 / mf));
    let cov = DMatrix::from_fn(dim, dim, |p, q| {
        // (M * sum xy - sum x * sum y) / M^2, exact in integers.
        let num = m * sum_sq[p * dim + q] - sum[p] * sum[q];
        num as f64 / (mf * mf)
    });
    Ok(NullMoments { layout, mean, cov })
}

/// A standardized count; `None` where the null variance vanishes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZScore(pub Option<f64>);

impl Serialize for ZScore {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.0 {
            Some(z) => s.serialize_f64(z),
            None => s.serialize_none(),
        }
    }
}

/// Variances at or below this multiple of `max(1, |G|^2)` count as zero.
const ZERO_VARIANCE_REL: f64 = 1e-12;

/// `Z_ij = (R_ij - E R_ij) / sqrt(Var R_ij)` for every pair of groups.
pub fn standardized_counts(counts: &EdgeCounts, moments: &NullMoments) -> Result<Vec<Vec<ZScore>>> {
    let k = counts.groups();
    if k != moments.groups() {
        return Err(Error::invalid(format!(
            "counts have {k} groups but moments have {}",
            moments.groups()
        )));
    }
    let scale = (counts.total() as f64).powi(2).max(1.0);
    let z = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    let var = moments.var_of(i, j);
                    if var <= ZERO_VARIANCE_REL * scale {
                        ZScore(None)
                    } else {
                        ZScore(Some((counts.get(i, j) as f64 - moments.mean_of(i, j)) / var.sqrt()))
                    }
                })
                .collect()
        })
        .collect();
    Ok(z)
}

/// Validates `labels` against `group_sizes` for a graph.
pub(crate) fn validate_grouping(graph: &SimilarityGraph, labels: &[usize], group_sizes: &[usize]) -> Result<()> {
    check_labels(labels, group_sizes, graph.node_count())
}

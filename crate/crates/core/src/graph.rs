//! Similarity graphs on pooled observations.
//!
//! The default graph is the k-MST: the union of `k` edge-disjoint minimum
//! spanning trees, where tree `j` is the MST of the complete graph with the
//! edges of trees `1..j` removed. Candidate edges are ordered by
//! `(weight, smaller index, larger index)` so construction is deterministic
//! even when distances tie.

use std::cmp::Ordering;

use serde::Serialize;

use crate::distance::DistanceMatrix;
use crate::error::{Error, Result};

/// Undirected simple graph on nodes `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimilarityGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    degrees: Vec<usize>,
}

impl SimilarityGraph {
    /// Builds a graph from an edge list. Each edge is stored as `(min, max)`;
    /// self-loops, duplicates and out-of-range endpoints are rejected.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut degrees = vec![0usize; n];
        let mut normalized = Vec::new();
        for (u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::invalid(format!(
                    "edge ({u}, {v}) references a node outside 0..{n}"
                )));
            }
            if u == v {
                return Err(Error::invalid(format!("self-loop at node {u}")));
            }
            normalized.push((u.min(v), u.max(v)));
            degrees[u] += 1;
            degrees[v] += 1;
        }
        let mut sorted = normalized.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::invalid(format!("duplicate edge {:?}", w[0])));
        }
        Ok(Self {
            n,
            edges: normalized,
            degrees,
        })
    }

    /// Path `0 - 1 - ... - (n-1)`.
    pub fn path(n: usize) -> Self {
        Self::from_edges(n, (1..n).map(|t| (t - 1, t))).expect("path edges are valid")
    }

    /// Star with hub `0`.
    pub fn star(n: usize) -> Self {
        Self::from_edges(n, (1..n).map(|t| (0, t))).expect("star edges are valid")
    }

    /// Cycle on `n >= 3` nodes.
    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::invalid("a cycle needs at least 3 nodes"));
        }
        Self::from_edges(n, (0..n).map(|t| (t, (t + 1) % n)))
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// `|G|`.
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// `|G_t|` for every node `t`.
    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    /// `sum_t |G_t|^2`.
    pub fn sum_sq_degrees(&self) -> u64 {
        self.degrees.iter().map(|&d| (d as u64) * (d as u64)).sum()
    }

    /// Ids of edges incident to each node.
    fn incidence(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.n];
        for (id, &(u, v)) in self.edges.iter().enumerate() {
            inc[u].push(id);
            inc[v].push(id);
        }
        inc
    }
}

/// Disjoint-set forest with union by rank and path halving.
#[derive(Debug, Clone)]
pub(crate) struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merges the sets of `a` and `b`; false if they were already joined.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            Ordering::Less => self.parent[ra] = rb,
            Ordering::Greater => self.parent[rb] = ra,
            Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// The `k` successive edge-disjoint spanning trees of a k-MST, in build order.
pub fn build_kmst_trees(dist: &DistanceMatrix, k: usize) -> Result<Vec<Vec<(usize, usize)>>> {
    let n = dist.len();
    if n < 2 {
        return Err(Error::invalid(format!(
            "a spanning tree needs at least 2 nodes, got {n}"
        )));
    }
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }

    let mut candidates: Vec<(f64, usize, usize)> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        let row = dist.row(i);
        for (j, &w) in row.iter().enumerate().skip(i + 1) {
            candidates.push((w, i, j));
        }
    }
    candidates.sort_unstable_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });

    let mut used = vec![false; candidates.len()];
    let mut trees = Vec::with_capacity(k);
    for tree in 1..=k {
        let mut uf = UnionFind::new(n);
        let mut edges = Vec::with_capacity(n - 1);
        for (slot, &(_, u, v)) in candidates.iter().enumerate() {
            if used[slot] || !uf.union(u, v) {
                continue;
            }
            used[slot] = true;
            edges.push((u, v));
            if edges.len() == n - 1 {
                break;
            }
        }
        if edges.len() < n - 1 {
            return Err(Error::Construction { tree, k, nodes: n });
        }
        trees.push(edges);
    }
    Ok(trees)
}

/// Union of `k` edge-disjoint minimum spanning trees built greedily with
/// Kruskal's algorithm. `|G| = k (N - 1)`.
pub fn build_kmst(dist: &DistanceMatrix, k: usize) -> Result<SimilarityGraph> {
    let trees = build_kmst_trees(dist, k)?;
    SimilarityGraph::from_edges(dist.len(), trees.into_iter().flatten())
}

/// Graph quantities that govern the chi-square approximation.
///
/// `A_e` holds `e` and every edge sharing a node with it; `B_e` adds every edge
/// sharing a node with a member of `A_e`. `sum_ab` is `sum_e |A_e| * |B_e|`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphConditionStats {
    pub node_count: usize,
    pub edge_count: usize,
    pub sum_sq_degrees: u64,
    pub sum_ab: u64,
    /// `|G| / N`
    pub ratio_edges: f64,
    /// `(sum_t |G_t|^2 - 4 |G|^2 / N) / N`
    pub ratio_hub: f64,
    /// `sum_ab / N^1.5`
    pub ratio_ab: f64,
}

pub fn condition_stats(graph: &SimilarityGraph) -> GraphConditionStats {
    let n = graph.node_count();
    let inc = graph.incidence();
    let edges = graph.edges();

    // Stamp arrays avoid reallocating sets for every edge.
    let mut node_stamp = vec![usize::MAX; n];
    let mut edge_stamp = vec![usize::MAX; edges.len()];
    let mut frontier = Vec::new();
    let mut sum_ab = 0u64;
    for (id, &(u, v)) in edges.iter().enumerate() {
        let a_size = (graph.degrees[u] + graph.degrees[v] - 1) as u64;

        // Nodes touched by A_e.
        frontier.clear();
        for &x in &[u, v] {
            for &f in &inc[x] {
                let (p, q) = edges[f];
                for y in [p, q] {
                    if node_stamp[y] != id {
                        node_stamp[y] = id;
                        frontier.push(y);
                    }
                }
            }
        }
        // B_e is every edge incident to one of those nodes.
        let mut b_size = 0u64;
        for &y in &frontier {
            for &f in &inc[y] {
                if edge_stamp[f] != id {
                    edge_stamp[f] = id;
                    b_size += 1;
                }
            }
        }
        sum_ab += a_size * b_size;
    }

    let nf = n as f64;
    let g = edges.len() as f64;
    let sum_sq = graph.sum_sq_degrees();
    let (ratio_edges, ratio_hub, ratio_ab) = if n == 0 {
        (0.0, 0.0, 0.0)
    } else {
        (
            g / nf,
            // Cauchy-Schwarz keeps this nonnegative up to rounding.
            ((sum_sq as f64 - 4.0 * g * g / nf) / nf).max(0.0),
            sum_ab as f64 / nf.powf(1.5),
        )
    };
    GraphConditionStats {
        node_count: n,
        edge_count: edges.len(),
        sum_sq_degrees: sum_sq,
        sum_ab,
        ratio_edges,
        ratio_hub,
        ratio_ab,
    }
}

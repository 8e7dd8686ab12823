//! Pairwise dissimilarities over pooled observations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Distance used to compare feature vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Euclidean,
    Manhattan,
}

/// Dense symmetric `N x N` matrix of nonnegative finite dissimilarities with a
/// zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    entries: Vec<f64>,
}

/// Relative tolerance for symmetry of externally supplied matrices.
const SYMMETRY_TOL: f64 = 1e-9;

impl DistanceMatrix {
    /// Validates a precomputed matrix.
    ///
    /// Off-diagonal pairs that agree to a relative `1e-9` are averaged so the
    /// stored matrix is exactly symmetric. Metric axioms beyond symmetry and
    /// nonnegativity are not checked.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if let Some(i) = rows.iter().position(|r| r.len() != n) {
            return Err(Error::invalid(format!(
                "distance matrix is not square: row {i} has {} entries, expected {n}",
                rows[i].len()
            )));
        }
        let mut entries: Vec<f64> = rows.into_iter().flatten().collect();
        for i in 0..n {
            for j in i..n {
                let a = entries[i * n + j];
                let b = entries[j * n + i];
                if !a.is_finite() || a < 0.0 {
                    return Err(Error::invalid(format!(
                        "distance ({i}, {j}) = {a} must be finite and nonnegative"
                    )));
                }
                if (a - b).abs() > SYMMETRY_TOL * a.abs().max(b.abs()).max(1.0) {
                    return Err(Error::invalid(format!(
                        "distance matrix is not symmetric at ({i}, {j}): {a} vs {b}"
                    )));
                }
                if i == j {
                    if a > SYMMETRY_TOL {
                        return Err(Error::invalid(format!(
                            "diagonal entry {i} is {a}, expected 0"
                        )));
                    }
                    entries[i * n + i] = 0.0;
                } else {
                    let mid = 0.5 * (a + b);
                    entries[i * n + j] = mid;
                    entries[j * n + i] = mid;
                }
            }
        }
        Ok(Self { n, entries })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }
}

/// Computes all pairwise distances between observations.
///
/// Rows are filled in parallel, but every entry is produced by the same
/// sequential coordinate loop, so the result is bit-identical to a serial pass
/// and exactly symmetric.
pub fn pairwise_distances(dataset: &Dataset, metric: Metric) -> DistanceMatrix {
    let n = dataset.len();
    let mut entries = vec![0.0; n * n];
    if n > 0 {
        entries.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            let a = dataset.point(i);
            for (j, slot) in row.iter_mut().enumerate() {
                if i != j {
                    *slot = point_distance(a, dataset.point(j), metric);
                }
            }
        });
    }
    DistanceMatrix { n, entries }
}

fn point_distance(a: &[f64], b: &[f64], metric: Metric) -> f64 {
    match metric {
        Metric::Euclidean => a
            .iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt(),
        Metric::Manhattan => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
    }
}

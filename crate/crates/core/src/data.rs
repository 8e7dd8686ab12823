//! Pooled observations with group labels.

use serde::Serialize;

use crate::error::{Error, Result};

/// `N` pooled observations in `d` dimensions, each tagged with a group index
/// in `0..K`.
///
/// Points are stored row-major. Every group must contain at least one
/// observation and every feature must be finite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dataset {
    points: Vec<f64>,
    dim: usize,
    labels: Vec<usize>,
    group_sizes: Vec<usize>,
}

impl Dataset {
    /// Builds a dataset from a flat row-major buffer of `labels.len() * dim` values.
    pub fn from_flat(points: Vec<f64>, dim: usize, labels: Vec<usize>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("feature dimension must be at least 1"));
        }
        if points.len() != labels.len() * dim {
            return Err(Error::invalid(format!(
                "expected {} feature values for {} observations of dimension {dim}, got {}",
                labels.len() * dim,
                labels.len(),
                points.len()
            )));
        }
        if let Some(pos) = points.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite feature value at observation {}, coordinate {}",
                pos / dim,
                pos % dim
            )));
        }
        let group_sizes = group_sizes(&labels)?;
        Ok(Self {
            points,
            dim,
            labels,
            group_sizes,
        })
    }

    /// Builds a dataset from one vector per observation.
    pub fn from_rows(rows: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != dim) {
            return Err(Error::invalid(format!(
                "observation {i} has {} coordinates, expected {dim}",
                rows[i].len()
            )));
        }
        Self::from_flat(rows.into_iter().flatten().collect(), dim, labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_groups(&self) -> usize {
        self.group_sizes.len()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn group_sizes(&self) -> &[usize] {
        &self.group_sizes
    }
}

/// Group sizes implied by 0-based labels; `K` is one past the largest label.
///
/// Fails when a group in `0..K` has no members.
pub fn group_sizes(labels: &[usize]) -> Result<Vec<usize>> {
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut sizes = vec![0usize; k];
    for &l in labels {
        sizes[l] += 1;
    }
    if let Some(empty) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::invalid(format!("group {empty} has no observations")));
    }
    Ok(sizes)
}

/// Checks that `labels` and `group_sizes` describe the same partition of `n` nodes.
pub(crate) fn check_labels(labels: &[usize], group_sizes: &[usize], n: usize) -> Result<()> {
    if labels.len() != n {
        return Err(Error::invalid(format!(
            "{} labels supplied for a graph on {n} nodes",
            labels.len()
        )));
    }
    let k = group_sizes.len();
    let mut seen = vec![0usize; k];
    for (t, &l) in labels.iter().enumerate() {
        if l >= k {
            return Err(Error::invalid(format!(
                "label {l} of node {t} is outside 0..{k}"
            )));
        }
        seen[l] += 1;
    }
    if seen != group_sizes {
        return Err(Error::invalid(format!(
            "labels give group sizes {seen:?} but {group_sizes:?} were supplied"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_follow_labels() {
        let ds = Dataset::from_rows(
            vec![vec![0.0], vec![1.0], vec![2.0]],
            vec![1, 0, 1],
        )
        .unwrap();
        assert_eq!(ds.group_sizes(), &[1, 2]);
        assert_eq!(ds.num_groups(), 2);
        assert_eq!(ds.point(2), &[2.0]);
    }

    #[test]
    fn rejects_empty_group() {
        assert!(group_sizes(&[0, 2, 2]).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        let err = Dataset::from_rows(vec![vec![0.0, f64::NAN]], vec![0]).unwrap_err();
        assert!(err.to_string().contains("non-finite"));
    }

    #[test]
    fn rejects_ragged_rows() {
        assert!(Dataset::from_rows(vec![vec![0.0, 1.0], vec![1.0]], vec![0, 0]).is_err());
    }

    #[test]
    fn label_check_catches_mismatch() {
        assert!(check_labels(&[0, 1, 1], &[1, 2], 3).is_ok());
        assert!(check_labels(&[0, 1, 1], &[2, 1], 3).is_err());
        assert!(check_labels(&[0, 2, 1], &[1, 2], 3).is_err());
        assert!(check_labels(&[0, 1], &[1, 1], 3).is_err());
    }
}

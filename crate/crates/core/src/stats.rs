//! Mahalanobis-type statistics of edge-count vectors.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::{CountView, EdgeCounts, NullMoments};

/// How small an eigenvalue must be to count as zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum RankTolerance {
    /// `dim * f64::EPSILON * max |eigenvalue|`.
    #[default]
    Relative,
    /// Eigenvalues at or below this absolute value are dropped.
    Absolute(f64),
}

impl RankTolerance {
    fn threshold(self, dim: usize, max_abs_eigen: f64) -> f64 {
        match self {
            RankTolerance::Relative => dim as f64 * f64::EPSILON * max_abs_eigen,
            RankTolerance::Absolute(t) => t,
        }
    }
}

/// Relative asymmetry tolerated before a covariance is rejected.
const SYMMETRY_TOL: f64 = 1e-9;

fn check_symmetric(cov: &DMatrix<f64>) -> Result<()> {
    if !cov.is_square() {
        return Err(Error::invalid(format!(
            "covariance must be square, got {}x{}",
            cov.nrows(),
            cov.ncols()
        )));
    }
    let scale = cov.amax().max(f64::MIN_POSITIVE);
    for i in 0..cov.nrows() {
        for j in i + 1..cov.ncols() {
            if (cov[(i, j)] - cov[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(Error::invalid(format!(
                    "covariance is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    Ok(())
}

/// Numerical rank of a symmetric matrix from its eigenvalues.
pub fn matrix_rank(cov: &DMatrix<f64>, tol: RankTolerance) -> usize {
    if cov.is_empty() {
        return 0;
    }
    let eig = SymmetricEigen::new(cov.clone());
    let max_abs = eig.eigenvalues.amax();
    let thr = tol.threshold(cov.nrows(), max_abs);
    eig.eigenvalues.iter().filter(|&&l| l > thr).count()
}

/// Eigenvalue summary of a covariance block.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumSummary {
    pub dim: usize,
    pub rank: usize,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// `max / min` eigenvalue; absent when the matrix is rank deficient.
    pub condition_number: Option<f64>,
}

pub fn spectrum_summary(cov: &DMatrix<f64>, tol: RankTolerance) -> SpectrumSummary {
    let dim = cov.nrows();
    if dim == 0 {
        return SpectrumSummary {
            dim,
            rank: 0,
            min_eigenvalue: 0.0,
            max_eigenvalue: 0.0,
            condition_number: None,
        };
    }
    let eig = SymmetricEigen::new(cov.clone());
    let max_abs = eig.eigenvalues.amax();
    let thr = tol.threshold(dim, max_abs);
    let rank = eig.eigenvalues.iter().filter(|&&l| l > thr).count();
    let min = eig.eigenvalues.min();
    let max = eig.eigenvalues.max();
    SpectrumSummary {
        dim,
        rank,
        min_eigenvalue: min,
        max_eigenvalue: max,
        condition_number: (rank == dim).then(|| max / min),
    }
}

/// A centred quadratic form `(x - m)^T M (x - m)` with `M` the inverse (or
/// Moore-Penrose pseudo-inverse) of a covariance.
///
/// Built once and reused across permutations.
#[derive(Debug, Clone)]
pub struct QuadraticForm {
    center: DVector<f64>,
    operator: DMatrix<f64>,
    rank: usize,
    pseudo: bool,
}

/// Result of evaluating a quadratic form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticValue {
    pub value: f64,
    pub rank: usize,
    pub used_pseudo_inverse: bool,
    /// A slightly negative rounding result was replaced by 0.
    pub clipped: bool,
}

impl QuadraticForm {
    /// Factorizes `cov`.
    ///
    /// Full numerical rank goes through a Cholesky inverse; otherwise the
    /// eigenvalues at or below tolerance are zeroed and the remainder inverted.
    pub fn new(mean: DVector<f64>, cov: &DMatrix<f64>, tol: RankTolerance) -> Result<Self> {
        check_symmetric(cov)?;
        let dim = cov.nrows();
        if mean.len() != dim {
            return Err(Error::invalid(format!(
                "mean has length {} but covariance is {dim}x{dim}",
                mean.len()
            )));
        }
        if dim == 0 {
            return Ok(Self {
                center: mean,
                operator: DMatrix::zeros(0, 0),
                rank: 0,
                pseudo: false,
            });
        }
        let eig = SymmetricEigen::new(cov.clone());
        let thr = tol.threshold(dim, eig.eigenvalues.amax());
        let rank = eig.eigenvalues.iter().filter(|&&l| l > thr).count();

        if rank == dim {
            if let Some(chol) = Cholesky::new(cov.clone()) {
                return Ok(Self {
                    center: mean,
                    operator: chol.inverse(),
                    rank,
                    pseudo: false,
                });
            }
        }
        let mut operator = DMatrix::zeros(dim, dim);
        let mut kept = 0;
        for (l, v) in eig.eigenvalues.iter().zip(eig.eigenvectors.column_iter()) {
            if *l > thr {
                operator += (v * v.transpose()) / *l;
                kept += 1;
            }
        }
        Ok(Self {
            center: mean,
            operator,
            rank: kept,
            pseudo: true,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn uses_pseudo_inverse(&self) -> bool {
        self.pseudo
    }

    pub fn evaluate(&self, x: &[f64]) -> QuadraticValue {
        debug_assert_eq!(x.len(), self.center.len());
        let diff: Vec<f64> = x.iter().zip(self.center.iter()).map(|(a, b)| a - b).collect();
        let raw: f64 = diff
            .iter()
            .enumerate()
            .map(|(i, di)| {
                let row: f64 = diff.iter().enumerate().map(|(j, dj)| self.operator[(i, j)] * dj).sum();
                di * row
            })
            .sum();
        let clipped = raw < 0.0;
        QuadraticValue {
            value: if clipped { 0.0 } else { raw },
            rank: self.rank,
            used_pseudo_inverse: self.pseudo,
            clipped,
        }
    }
}

/// One-shot `(x - mean)^T cov^{-1} (x - mean)`.
pub fn quadratic_form(
    x: &[f64],
    mean: &[f64],
    cov: &DMatrix<f64>,
    tol: RankTolerance,
) -> Result<QuadraticValue> {
    if x.len() != mean.len() {
        return Err(Error::invalid(format!(
            "vector has length {} but mean has length {}",
            x.len(),
            mean.len()
        )));
    }
    let form = QuadraticForm::new(DVector::from_column_slice(mean), cov, tol)?;
    Ok(form.evaluate(x))
}

/// The four edge-count statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StatKind {
    /// `S^W` over within-sample counts.
    #[serde(rename = "SW")]
    Within,
    /// `S^B` over between-sample counts.
    #[serde(rename = "SB")]
    Between,
    /// `S^A` over all counts but `R_(K-1)K`.
    #[serde(rename = "SA")]
    All,
    /// `S = S^W + S^B`.
    #[serde(rename = "S")]
    Sum,
}

impl StatKind {
    pub fn label(self) -> &'static str {
        match self {
            StatKind::Within => "SW",
            StatKind::Between => "SB",
            StatKind::All => "SA",
            StatKind::Sum => "S",
        }
    }
}

/// Degrees of freedom attached to a statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum Dof {
    Single(usize),
    /// `(rank Σ_W, rank Σ_B)` for `S`; reporting only.
    Pair(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StatValue {
    pub kind: StatKind,
    pub value: f64,
    pub dof: Dof,
    pub used_pseudo_inverse: bool,
    pub clipped: bool,
}

/// Precomputed quadratic forms for one statistic; evaluating it on new counts
/// costs `O(K^4)` arithmetic.
#[derive(Debug, Clone)]
pub struct StatEvaluator {
    kind: StatKind,
    parts: Vec<(Vec<usize>, QuadraticForm)>,
}

impl StatEvaluator {
    pub fn new(moments: &NullMoments, kind: StatKind, tol: RankTolerance) -> Result<Self> {
        let views: &[CountView] = match kind {
            StatKind::Within => &[CountView::Within],
            StatKind::Between => &[CountView::Between],
            StatKind::All => &[CountView::All],
            StatKind::Sum => &[CountView::Within, CountView::Between],
        };
        let layout = moments.layout();
        let parts = views
            .iter()
            .map(|&v| {
                let idx = layout.view_indices(v);
                let (mean, cov) = moments.restrict(&idx);
                QuadraticForm::new(mean, &cov, tol).map(|f| (idx, f))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { kind, parts })
    }

    /// Evaluator over an arbitrary subset of the full count vector.
    pub fn for_indices(moments: &NullMoments, indices: &[usize], tol: RankTolerance) -> Result<QuadraticForm> {
        let (mean, cov) = moments.restrict(indices);
        QuadraticForm::new(mean, &cov, tol)
    }

    pub fn kind(&self) -> StatKind {
        self.kind
    }

    /// Rank of each covariance block used (one entry, or two for `S`).
    pub fn ranks(&self) -> Vec<usize> {
        self.parts.iter().map(|(_, f)| f.rank()).collect()
    }

    pub fn evaluate(&self, counts: &EdgeCounts) -> StatValue {
        self.evaluate_full(&counts.full_vector())
    }

    /// Evaluates on a full count vector.
    pub fn evaluate_full(&self, full: &[f64]) -> StatValue {
        let mut value = 0.0;
        let mut pseudo = false;
        let mut clipped = false;
        let mut buf = Vec::new();
        for (idx, form) in &self.parts {
            buf.clear();
            buf.extend(idx.iter().map(|&p| full[p]));
            let q = form.evaluate(&buf);
            value += q.value;
            pseudo |= q.used_pseudo_inverse;
            clipped |= q.clipped;
        }
        let ranks = self.ranks();
        let dof = match ranks.as_slice() {
            [r] => Dof::Single(*r),
            [w, b] => Dof::Pair(*w, *b),
            _ => unreachable!("one or two quadratic forms per statistic"),
        };
        StatValue {
            kind: self.kind,
            value,
            dof,
            used_pseudo_inverse: pseudo,
            clipped,
        }
    }
}

fn stat(counts: &EdgeCounts, moments: &NullMoments, kind: StatKind) -> Result<StatValue> {
    if counts.groups() != moments.groups() {
        return Err(Error::invalid(format!(
            "counts have {} groups but moments have {}",
            counts.groups(),
            moments.groups()
        )));
    }
    Ok(StatEvaluator::new(moments, kind, RankTolerance::default())?.evaluate(counts))
}

/// `S^W`
pub fn stat_within(counts: &EdgeCounts, moments: &NullMoments) -> Result<StatValue> {
    stat(counts, moments, StatKind::Within)
}

/// `S^B`
pub fn stat_between(counts: &EdgeCounts, moments: &NullMoments) -> Result<StatValue> {
    stat(counts, moments, StatKind::Between)
}

/// `S^A`
pub fn stat_all(counts: &EdgeCounts, moments: &NullMoments) -> Result<StatValue> {
    stat(counts, moments, StatKind::All)
}

/// `S = S^W + S^B`
pub fn stat_sum(counts: &EdgeCounts, moments: &NullMoments) -> Result<StatValue> {
    stat(counts, moments, StatKind::Sum)
}

pub fn statistic(counts: &EdgeCounts, moments: &NullMoments, kind: StatKind) -> Result<StatValue> {
    stat(counts, moments, kind)
}

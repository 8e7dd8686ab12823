//! p-values for the edge-count statistics: chi-square asymptotics, the
//! Bonferroni-combined fast test, and Monte Carlo permutation.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{condition_stats, GraphConditionStats, SimilarityGraph};
use crate::moments::{count_edges_unchecked, null_moments, validate_grouping, EdgeCounts, NullMoments};
use crate::rng::substream;
use crate::special::chi_square_sf;
use crate::stats::{Dof, RankTolerance, StatEvaluator, StatKind};

/// How a p-value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "SW_asym")]
    WithinAsymptotic,
    #[serde(rename = "SB_asym")]
    BetweenAsymptotic,
    #[serde(rename = "SA_asym")]
    AllAsymptotic,
    /// Bonferroni combination of the `S^W` and `S^B` chi-square p-values.
    #[serde(rename = "SS_fast")]
    FastCombined,
    #[serde(rename = "perm_S")]
    PermSum,
    #[serde(rename = "perm_SW")]
    PermWithin,
    #[serde(rename = "perm_SB")]
    PermBetween,
    #[serde(rename = "perm_SA")]
    PermAll,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::WithinAsymptotic,
        Method::BetweenAsymptotic,
        Method::AllAsymptotic,
        Method::FastCombined,
        Method::PermSum,
        Method::PermWithin,
        Method::PermBetween,
        Method::PermAll,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Method::WithinAsymptotic => "SW_asym",
            Method::BetweenAsymptotic => "SB_asym",
            Method::AllAsymptotic => "SA_asym",
            Method::FastCombined => "SS_fast",
            Method::PermSum => "perm_S",
            Method::PermWithin => "perm_SW",
            Method::PermBetween => "perm_SB",
            Method::PermAll => "perm_SA",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.label().eq_ignore_ascii_case(s))
    }

    pub fn is_permutation(self) -> bool {
        matches!(
            self,
            Method::PermSum | Method::PermWithin | Method::PermBetween | Method::PermAll
        )
    }

    pub fn permutation(kind: StatKind) -> Self {
        match kind {
            StatKind::Within => Method::PermWithin,
            StatKind::Between => Method::PermBetween,
            StatKind::All => Method::PermAll,
            StatKind::Sum => Method::PermSum,
        }
    }

    /// `None` for `S`, which has no chi-square calibration.
    pub fn asymptotic(kind: StatKind) -> Option<Self> {
        match kind {
            StatKind::Within => Some(Method::WithinAsymptotic),
            StatKind::Between => Some(Method::BetweenAsymptotic),
            StatKind::All => Some(Method::AllAsymptotic),
            StatKind::Sum => None,
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    pub method: Method,
    pub statistic: f64,
    /// Present for chi-square based methods.
    pub dof: Option<Dof>,
    pub p_value: f64,
    pub n_permutations: Option<usize>,
    pub seed: Option<u64>,
    /// `(p_W, p_B)` behind the combined fast test.
    pub component_p_values: Option<[f64; 2]>,
    /// The combined fast test's `2 min(p_W, p_B)` exceeded 1 and was capped.
    pub p_capped: bool,
    pub used_pseudo_inverse: bool,
    /// `sum_e |A_e| |B_e| >= N^1.5`: the graph strains the chi-square conditions.
    pub conditions_strained: bool,
    pub warnings: Vec<String>,
    pub diagnostics: GraphConditionStats,
}

impl TestResult {
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value <= alpha
    }
}

/// Number of permutations drawn from one random stream.
const PERMUTATION_BATCH: usize = 256;

/// Everything the tests share for one graph and labelling: moments, observed
/// counts and graph diagnostics are computed once.
#[derive(Debug, Clone)]
pub struct TestContext<'a> {
    graph: &'a SimilarityGraph,
    labels: &'a [usize],
    group_sizes: &'a [usize],
    moments: NullMoments,
    counts: EdgeCounts,
    diagnostics: GraphConditionStats,
    warnings: Vec<String>,
}

impl<'a> TestContext<'a> {
    pub fn new(graph: &'a SimilarityGraph, labels: &'a [usize], group_sizes: &'a [usize]) -> Result<Self> {
        validate_grouping(graph, labels, group_sizes)?;
        if group_sizes.len() < 2 {
            return Err(Error::invalid("need at least two groups"));
        }
        let moments = null_moments(graph, group_sizes)?;
        let counts = count_edges_unchecked(graph, labels, group_sizes.len());
        let diagnostics = condition_stats(graph);
        let warnings = group_sizes
            .iter()
            .enumerate()
            .filter(|(_, &s)| s < 2)
            .map(|(i, s)| {
                format!(
                    "group {i} has {s} observation; chi-square approximations are unreliable, \
                     prefer the permutation backend"
                )
            })
            .collect();
        Ok(Self {
            graph,
            labels,
            group_sizes,
            moments,
            counts,
            diagnostics,
            warnings,
        })
    }

    pub fn moments(&self) -> &NullMoments {
        &self.moments
    }

    pub fn counts(&self) -> &EdgeCounts {
        &self.counts
    }

    pub fn diagnostics(&self) -> &GraphConditionStats {
        &self.diagnostics
    }

    fn result(&self, method: Method, statistic: f64, p_value: f64) -> TestResult {
        TestResult {
            method,
            statistic,
            dof: None,
            p_value,
            n_permutations: None,
            seed: None,
            component_p_values: None,
            p_capped: false,
            used_pseudo_inverse: false,
            conditions_strained: self.diagnostics.ratio_ab >= 1.0,
            warnings: self.warnings.clone(),
            diagnostics: self.diagnostics.clone(),
        }
    }

    fn check_not_degenerate(&self) -> Result<()> {
        let cov = self.moments.cov();
        if (0..cov.nrows()).all(|p| cov[(p, p)] <= 0.0) {
            return Err(Error::Degenerate(
                "every edge count has zero null variance".into(),
            ));
        }
        Ok(())
    }

    /// Chi-square test of `S^W`, `S^B` or `S^A` with dof equal to the rank of
    /// the covariance block used.
    pub fn asymptotic(&self, kind: StatKind) -> Result<TestResult> {
        let method = Method::asymptotic(kind).ok_or_else(|| {
            Error::invalid("S has no chi-square calibration; use the permutation test")
        })?;
        self.check_not_degenerate()?;
        let ev = StatEvaluator::new(&self.moments, kind, RankTolerance::default())?;
        let value = ev.evaluate(&self.counts);
        let rank = ev.ranks()[0];
        if rank == 0 {
            return Err(Error::Degenerate(format!(
                "the covariance of {} has rank 0",
                kind.label()
            )));
        }
        let p = chi_square_sf(value.value, rank)?;
        let mut r = self.result(method, value.value, p);
        r.dof = Some(Dof::Single(rank));
        r.used_pseudo_inverse = value.used_pseudo_inverse;
        Ok(r)
    }

    /// Fast combined test: `p = min(1, 2 min(p_W, p_B))`; the reported
    /// statistic is `S = S^W + S^B`.
    pub fn fast_combined(&self) -> Result<TestResult> {
        let w = self.asymptotic(StatKind::Within)?;
        let b = self.asymptotic(StatKind::Between)?;
        let raw = 2.0 * w.p_value.min(b.p_value);
        let dof = match (w.dof, b.dof) {
            (Some(Dof::Single(a)), Some(Dof::Single(c))) => Dof::Pair(a, c),
            _ => unreachable!("asymptotic tests report a single dof"),
        };
        let mut r = self.result(Method::FastCombined, w.statistic + b.statistic, raw.min(1.0));
        r.dof = Some(dof);
        r.component_p_values = Some([w.p_value, b.p_value]);
        r.p_capped = raw > 1.0;
        r.used_pseudo_inverse = w.used_pseudo_inverse || b.used_pseudo_inverse;
        Ok(r)
    }

    /// Monte Carlo permutation p-value `(1 + #{T* >= T}) / (n_perm + 1)`.
    ///
    /// Permutations are drawn in fixed batches of 256, batch `b` from stream
    /// `(seed, b)`, so the p-value does not depend on the thread count.
    pub fn permutation(&self, kind: StatKind, n_perm: usize, seed: u64) -> Result<TestResult> {
        if n_perm == 0 {
            return Err(Error::invalid("the permutation count must be at least 1"));
        }
        let ev = StatEvaluator::new(&self.moments, kind, RankTolerance::default())?;
        let observed = ev.evaluate(&self.counts);
        let k = self.group_sizes.len();
        let batches = n_perm.div_ceil(PERMUTATION_BATCH);
        let exceed: usize = (0..batches)
            .into_par_iter()
            .map(|b| {
                let mut rng = substream(seed, b as u64);
                let mut labels = self.labels.to_vec();
                let draws = PERMUTATION_BATCH.min(n_perm - b * PERMUTATION_BATCH);
                let mut hits = 0;
                for _ in 0..draws {
                    labels.shuffle(&mut rng);
                    let c = count_edges_unchecked(self.graph, &labels, k);
                    if ev.evaluate(&c).value >= observed.value {
                        hits += 1;
                    }
                }
                hits
            })
            .sum();
        let p = (1 + exceed) as f64 / (n_perm + 1) as f64;
        let mut r = self.result(Method::permutation(kind), observed.value, p);
        r.n_permutations = Some(n_perm);
        r.seed = Some(seed);
        r.used_pseudo_inverse = observed.used_pseudo_inverse;
        Ok(r)
    }

    /// Runs one method; `n_perm` and `seed` apply to permutation methods.
    pub fn run(&self, method: Method, n_perm: usize, seed: u64) -> Result<TestResult> {
        match method {
            Method::WithinAsymptotic => self.asymptotic(StatKind::Within),
            Method::BetweenAsymptotic => self.asymptotic(StatKind::Between),
            Method::AllAsymptotic => self.asymptotic(StatKind::All),
            Method::FastCombined => self.fast_combined(),
            Method::PermSum => self.permutation(StatKind::Sum, n_perm, seed),
            Method::PermWithin => self.permutation(StatKind::Within, n_perm, seed),
            Method::PermBetween => self.permutation(StatKind::Between, n_perm, seed),
            Method::PermAll => self.permutation(StatKind::All, n_perm, seed),
        }
    }
}

pub fn asymptotic_test(
    graph: &SimilarityGraph,
    labels: &[usize],
    group_sizes: &[usize],
    kind: StatKind,
) -> Result<TestResult> {
    TestContext::new(graph, labels, group_sizes)?.asymptotic(kind)
}

pub fn ss_test(graph: &SimilarityGraph, labels: &[usize], group_sizes: &[usize]) -> Result<TestResult> {
    TestContext::new(graph, labels, group_sizes)?.fast_combined()
}

pub fn permutation_test(
    graph: &SimilarityGraph,
    labels: &[usize],
    group_sizes: &[usize],
    kind: StatKind,
    n_perm: usize,
    seed: u64,
) -> Result<TestResult> {
    TestContext::new(graph, labels, group_sizes)?.permutation(kind, n_perm, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn path9() -> (SimilarityGraph, Vec<usize>, Vec<usize>) {
        (
            SimilarityGraph::path(9),
            vec![0, 0, 0, 1, 1, 1, 2, 2, 2],
            vec![3, 3, 3],
        )
    }

    #[test]
    fn ss_is_twice_the_smaller_component() {
        let (g, l, s) = path9();
        let ctx = TestContext::new(&g, &l, &s).unwrap();
        let w = ctx.asymptotic(StatKind::Within).unwrap();
        let b = ctx.asymptotic(StatKind::Between).unwrap();
        let ss = ctx.fast_combined().unwrap();
        assert_eq!(ss.p_value, (2.0 * w.p_value.min(b.p_value)).min(1.0));
        assert_eq!(ss.component_p_values, Some([w.p_value, b.p_value]));
        assert_abs_diff_eq!(ss.statistic, w.statistic + b.statistic, epsilon = 1e-12);
    }

    #[test]
    fn ss_caps_at_one() {
        // Labels spread so both statistics are small.
        let g = SimilarityGraph::path(12);
        let l = [0, 1, 2, 0, 1, 2, 0, 1, 2, 0, 1, 2];
        let s = [4, 4, 4];
        let ss = ss_test(&g, &l, &s).unwrap();
        assert!(ss.p_value <= 1.0);
        let [pw, pb] = ss.component_p_values.unwrap();
        assert_eq!(ss.p_capped, 2.0 * pw.min(pb) > 1.0);
    }

    #[test]
    fn permutation_extreme_observation() {
        // Contiguous blocks on a path maximize S, but other arrangements tie
        // with it, so only the counting bounds are checked.
        let (g, l, s) = path9();
        let r = permutation_test(&g, &l, &s, StatKind::Sum, 999, 3).unwrap();
        assert!(r.p_value >= 1.0 / 1000.0 && r.p_value < 0.05);
        assert_eq!(r.n_permutations, Some(999));
        assert_eq!(r.seed, Some(3));
        assert!(r.dof.is_none());
    }

    #[test]
    fn permutation_invariant_statistic_gives_one() {
        // Complete graph: every arrangement has identical counts.
        let n = 6;
        let edges = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)));
        let g = SimilarityGraph::from_edges(n, edges).unwrap();
        let l = [0, 0, 1, 1, 2, 2];
        let r = permutation_test(&g, &l, &[2, 2, 2], StatKind::All, 200, 1).unwrap();
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn permutation_is_seed_deterministic() {
        let (g, l, s) = path9();
        let a = permutation_test(&g, &l, &s, StatKind::Within, 1000, 42).unwrap();
        let b = permutation_test(&g, &l, &s, StatKind::Within, 1000, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn input_errors() {
        let (g, l, _) = path9();
        assert!(asymptotic_test(&g, &l, &[3, 3, 2], StatKind::Within).is_err());
        assert!(asymptotic_test(&g, &[0; 9], &[9], StatKind::Within).is_err());
        let ctx = TestContext::new(&g, &l, &[3, 3, 3]).unwrap();
        assert!(ctx.asymptotic(StatKind::Sum).is_err());
        assert!(ctx.permutation(StatKind::Sum, 0, 1).is_err());
    }

    #[test]
    fn singleton_group_warns() {
        let g = SimilarityGraph::path(6);
        let l = [0, 0, 0, 1, 1, 2];
        let r = asymptotic_test(&g, &l, &[3, 2, 1], StatKind::Within).unwrap();
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn method_labels_round_trip() {
        for m in Method::ALL {
            assert_eq!(Method::from_label(m.label()), Some(m));
        }
    }
}

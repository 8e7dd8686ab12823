//! Graph-based K-sample tests of distributional equality.
//!
//! Observations from `K` samples are pooled and joined by a similarity graph
//! (by default the 5-MST). Edges are classified by the samples of their
//! endpoints into counts `R_ij`; under the permutation null the mean and
//! covariance of those counts have closed forms, and Mahalanobis-type
//! quadratic forms of the counts give the test statistics:
//!
//! * `S^W` over the within-sample counts,
//! * `S^B` over the between-sample counts,
//! * `S = S^W + S^B`,
//! * `S^A` over all counts except `R_(K-1)K`.
//!
//! p-values come from chi-square limits (`S^W`, `S^B`, `S^A`), the
//! Bonferroni-combined fast test `SS`, or Monte Carlo permutation (any
//! statistic).
//!
//! ```
//! use kgraph::{build_kmst, pairwise_distances, ss_test, Dataset, Metric};
//!
//! let rows: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64, (i * i % 7) as f64]).collect();
//! let labels = vec![0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2];
//! let data = Dataset::from_rows(rows, labels).unwrap();
//! let graph = build_kmst(&pairwise_distances(&data, Metric::Euclidean), 2).unwrap();
//! let result = ss_test(&graph, data.labels(), data.group_sizes()).unwrap();
//! assert!((0.0..=1.0).contains(&result.p_value));
//! ```

pub mod data;
pub mod distance;
pub mod error;
pub mod graph;
pub mod inference;
pub mod moments;
pub mod rng;
pub mod simulation;
pub mod special;
pub mod stats;

pub use data::{group_sizes, Dataset};
pub use distance::{pairwise_distances, DistanceMatrix, Metric};
pub use error::{Error, Result};
pub use graph::{build_kmst, build_kmst_trees, condition_stats, GraphConditionStats, SimilarityGraph};
pub use inference::{asymptotic_test, permutation_test, ss_test, Method, TestContext, TestResult};
pub use moments::{
    count_edges, exact_moments_bruteforce, null_moments, null_moments_from_summary, standardized_counts,
    CountLayout, CountView, EdgeCounts, NullMoments, ZScore,
};
pub use simulation::{
    estimate_power, generate_scenario, simulate_statistics, Family, PowerReport, ScenarioSpec,
    SimulationOptions, Variant,
};
pub use special::{chi_square_quantile, chi_square_sf};
pub use stats::{
    matrix_rank, quadratic_form, stat_all, stat_between, stat_sum, stat_within, statistic, Dof,
    RankTolerance, StatEvaluator, StatKind, StatValue,
};

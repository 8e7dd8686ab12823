//! Scenario generators and Monte Carlo size/power estimation.
//!
//! Group `i` (0-based) of every family is drawn as follows, with `s` the
//! scenario's separation parameter:
//!
//! | family | group `i` distribution |
//! | --- | --- |
//! | S1 location | `N_d(s i 1_d, I_d)` |
//! | S2 scale | `N_d(0, (1 + s i) I_d)` |
//! | S3 covariance | `N_d(0, Σ_i)`, `Σ_i[u][v] = ρ_i^|u-v|`, `ρ_i = 0.1 + s i` |
//! | S4 kurtosis | iid standardized `t_ν` coordinates, `ν_i = base + s i` |
//! | S5 skewness | iid standardized `χ²_ν` coordinates, `ν_i = base + s i` |
//! | S6 log-normal | `exp(N_d(s i 1_d, Σ))` or `exp(N_d(0, (1 + s i) Σ))` |
//! | S7 Student t | `t_20(s i 1_d, Σ)` or `t_20(0, (1 + s i) Σ)` |
//!
//! S6 and S7 use `Σ[u][v] = 0.4^|u-v|`. The S4 base defaults to `2 + s`, the
//! smallest schedule whose every degree of freedom has finite variance; the S5
//! base defaults to 1. Standardization uses the analytic moments
//! (`ν / (ν - 2)` for `t_ν`; mean `ν` and variance `2ν` for `χ²_ν`).
//!
//! Standard normals come from `rand_distr::StandardNormal` (ziggurat) on a
//! ChaCha8 stream; chi-square variates from `rand_distr::ChiSquared`. A
//! dataset is fully determined by `(spec, seed, replicate)`.

use nalgebra::{Cholesky, DMatrix};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::distance::{pairwise_distances, Metric};
use crate::error::{Error, Result};
use crate::graph::build_kmst;
use crate::inference::{Method, TestContext};
use crate::rng::substream;
use crate::special::chi_square_quantile;
use crate::stats::{RankTolerance, StatEvaluator, StatKind, StatValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    S1Location,
    S2Scale,
    S3Covariance,
    S4Kurtosis,
    S5SkewKurtosis,
    S6Lognormal,
    S7StudentT,
}

impl Family {
    pub fn label(self) -> &'static str {
        match self {
            Family::S1Location => "s1_location",
            Family::S2Scale => "s2_scale",
            Family::S3Covariance => "s3_covariance",
            Family::S4Kurtosis => "s4_kurtosis",
            Family::S5SkewKurtosis => "s5_skew_kurtosis",
            Family::S6Lognormal => "s6_lognormal",
            Family::S7StudentT => "s7_student_t",
        }
    }

    /// Separation of the standard power-study configuration with `k` groups.
    ///
    /// S1 uses `0.14, 0.1, 0.07` and S2 `0.08, 0.05, 0.07` for `K = 3, 4, 5`
    /// (the S2 schedule is deliberately not monotone in `K`). S6 uses `0.04`
    /// (location) or `0.05` (scale) and S7 `0.04` or `0.1`, for any `K`. S3-S5
    /// are studied over a grid of separations, so there is no single value.
    pub fn reference_separation(self, k: usize, variant: Variant) -> Option<f64> {
        match (self, k, variant) {
            (Family::S1Location, 3, _) => Some(0.14),
            (Family::S1Location, 4, _) => Some(0.1),
            (Family::S1Location, 5, _) => Some(0.07),
            (Family::S2Scale, 3, _) => Some(0.08),
            (Family::S2Scale, 4, _) => Some(0.05),
            (Family::S2Scale, 5, _) => Some(0.07),
            (Family::S6Lognormal, _, Variant::Location) => Some(0.04),
            (Family::S6Lognormal, _, Variant::Scale) => Some(0.05),
            (Family::S7StudentT, _, Variant::Location) => Some(0.04),
            (Family::S7StudentT, _, Variant::Scale) => Some(0.1),
            _ => None,
        }
    }
}

/// Location or scale alternative for the S6 and S7 families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    #[default]
    Location,
    Scale,
}

/// Correlation of the fixed AR(1) matrix used by S6 and S7.
pub const AR1_BASE_RHO: f64 = 0.4;
/// Degrees of freedom of the S7 multivariate t.
pub const S7_DOF: f64 = 20.0;
/// Default similarity graph multiplicity.
pub const DEFAULT_K_MST: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub family: Family,
    pub dim: usize,
    /// `n_i` for each group; `K` is the length.
    pub group_sizes: Vec<usize>,
    pub separation: f64,
    #[serde(default)]
    pub variant: Variant,
    /// First-group degrees of freedom for S4/S5.
    #[serde(default)]
    pub base_df: Option<f64>,
}

impl ScenarioSpec {
    /// `k` groups of `n` observations each.
    pub fn balanced(family: Family, k: usize, dim: usize, n: usize, separation: f64) -> Self {
        Self {
            family,
            dim,
            group_sizes: vec![n; k],
            separation,
            variant: Variant::Location,
            base_df: None,
        }
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_separation(mut self, separation: f64) -> Self {
        self.separation = separation;
        self
    }

    pub fn groups(&self) -> usize {
        self.group_sizes.len()
    }

    pub fn total(&self) -> usize {
        self.group_sizes.iter().sum()
    }

    fn base_df(&self) -> f64 {
        match (self.base_df, self.family) {
            (Some(b), _) => b,
            (None, Family::S4Kurtosis) => 2.0 + self.separation,
            (None, _) => 1.0,
        }
    }

    /// Degrees of freedom of group `i` for S4/S5.
    pub fn group_df(&self, i: usize) -> f64 {
        self.base_df() + self.separation * i as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.group_sizes.is_empty() {
            return Err(Error::invalid("a scenario needs at least one group"));
        }
        if let Some(i) = self.group_sizes.iter().position(|&n| n == 0) {
            return Err(Error::invalid(format!("group {i} has size 0")));
        }
        if self.dim == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        if !self.separation.is_finite() {
            return Err(Error::invalid("separation must be finite"));
        }
        let k = self.groups();
        let check_all = |what: &str, ok: &dyn Fn(f64) -> bool, value: &dyn Fn(usize) -> f64| {
            for i in 0..k {
                let v = value(i);
                if !ok(v) {
                    return Err(Error::invalid(format!(
                        "{}: {what} of group {i} is {v}",
                        self.family.label()
                    )));
                }
            }
            Ok(())
        };
        let sep = self.separation;
        match self.family {
            Family::S1Location => Ok(()),
            Family::S2Scale => check_all("variance 1 + s i must be positive; variance", &|v| v > 0.0, &|i| {
                1.0 + sep * i as f64
            }),
            Family::S3Covariance => check_all("AR(1) correlation must lie in (-1, 1); correlation", &|r| r.abs() < 1.0, &|i| {
                0.1 + sep * i as f64
            }),
            Family::S4Kurtosis => check_all(
                "t degrees of freedom must exceed 2 for standardization; df",
                &|v| v > 2.0,
                &|i| self.group_df(i),
            ),
            Family::S5SkewKurtosis => check_all(
                "chi-square degrees of freedom must be positive; df",
                &|v| v > 0.0,
                &|i| self.group_df(i),
            ),
            Family::S6Lognormal | Family::S7StudentT => match self.variant {
                Variant::Location => Ok(()),
                Variant::Scale => check_all("scale factor 1 + s i must be positive; factor", &|v| v > 0.0, &|i| {
                    1.0 + sep * i as f64
                }),
            },
        }
    }
}

/// Lower Cholesky factor of `Σ[u][v] = ρ^|u-v|`.
pub fn ar1_cholesky(rho: f64, dim: usize) -> Result<DMatrix<f64>> {
    if rho.is_nan() || rho.abs() >= 1.0 {
        return Err(Error::invalid(format!("AR(1) correlation {rho} must lie in (-1, 1)")));
    }
    let sigma = ar1_matrix(rho, dim);
    Cholesky::new(sigma)
        .map(|c| c.l())
        .ok_or_else(|| Error::Degenerate(format!("AR(1) matrix with rho = {rho} is not positive definite")))
}

pub fn ar1_matrix(rho: f64, dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(dim, dim, |u, v| rho.powi(u.abs_diff(v) as i32))
}

fn normal_vec<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

/// `L z` for lower-triangular `L`.
fn lower_times(l: &DMatrix<f64>, z: &[f64]) -> Vec<f64> {
    (0..z.len())
        .map(|u| (0..=u).map(|v| l[(u, v)] * z[v]).sum())
        .collect()
}

/// Draws one dataset for replicate `replicate` under `seed`.
pub fn generate_scenario(spec: &ScenarioSpec, seed: u64, replicate: u64) -> Result<Dataset> {
    let mut rng = substream(seed, replicate);
    generate_with_rng(spec, &mut rng)
}

/// Draws one dataset from an explicit generator.
pub fn generate_with_rng<R: Rng>(spec: &ScenarioSpec, rng: &mut R) -> Result<Dataset> {
    spec.validate()?;
    let d = spec.dim;
    let sep = spec.separation;
    let n = spec.total();
    let mut points = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);

    let shared_factor = match spec.family {
        Family::S6Lognormal | Family::S7StudentT => Some(ar1_cholesky(AR1_BASE_RHO, d)?),
        _ => None,
    };

    for (i, &size) in spec.group_sizes.iter().enumerate() {
        let fi = i as f64;
        let group_factor = match spec.family {
            Family::S3Covariance => Some(ar1_cholesky(0.1 + sep * fi, d)?),
            _ => None,
        };
        for _ in 0..size {
            let row: Vec<f64> = match spec.family {
                Family::S1Location => normal_vec(rng, d).into_iter().map(|z| z + sep * fi).collect(),
                Family::S2Scale => {
                    let sd = (1.0 + sep * fi).sqrt();
                    normal_vec(rng, d).into_iter().map(|z| z * sd).collect()
                }
                Family::S3Covariance => {
                    let l = group_factor.as_ref().expect("S3 factor");
                    lower_times(l, &normal_vec(rng, d))
                }
                Family::S4Kurtosis => {
                    let nu = spec.group_df(i);
                    let chi = ChiSquared::new(nu).map_err(|e| Error::invalid(e.to_string()))?;
                    let sd = (nu / (nu - 2.0)).sqrt();
                    (0..d)
                        .map(|_| {
                            let z: f64 = StandardNormal.sample(rng);
                            let w: f64 = chi.sample(rng);
                            z / (w / nu).sqrt() / sd
                        })
                        .collect()
                }
                Family::S5SkewKurtosis => {
                    let nu = spec.group_df(i);
                    let chi = ChiSquared::new(nu).map_err(|e| Error::invalid(e.to_string()))?;
                    let sd = (2.0 * nu).sqrt();
                    (0..d).map(|_| (chi.sample(rng) - nu) / sd).collect()
                }
                Family::S6Lognormal => {
                    let l = shared_factor.as_ref().expect("S6 factor");
                    let base = lower_times(l, &normal_vec(rng, d));
                    match spec.variant {
                        Variant::Location => base.into_iter().map(|x| (x + sep * fi).exp()).collect(),
                        Variant::Scale => {
                            let sd = (1.0 + sep * fi).sqrt();
                            base.into_iter().map(|x| (x * sd).exp()).collect()
                        }
                    }
                }
                Family::S7StudentT => {
                    let l = shared_factor.as_ref().expect("S7 factor");
                    let base = lower_times(l, &normal_vec(rng, d));
                    let chi = ChiSquared::new(S7_DOF).expect("positive dof");
                    let w: f64 = chi.sample(rng);
                    let mix = (S7_DOF / w).sqrt();
                    match spec.variant {
                        Variant::Location => base.into_iter().map(|x| x * mix + sep * fi).collect(),
                        Variant::Scale => {
                            let sd = (1.0 + sep * fi).sqrt();
                            base.into_iter().map(|x| x * mix * sd).collect()
                        }
                    }
                }
            };
            points.extend(row);
            labels.push(i);
        }
    }
    Dataset::from_flat(points, d, labels)
}

/// Graph and resampling settings shared by the simulation drivers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationOptions {
    pub k_mst: usize,
    pub metric: Metric,
    /// Permutations per replicate for permutation methods.
    pub n_perm: usize,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self {
            k_mst: DEFAULT_K_MST,
            metric: Metric::Euclidean,
            n_perm: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodPower {
    pub method: Method,
    pub rejections: usize,
    pub rate: f64,
    /// `sqrt(rate (1 - rate) / replications)`
    pub mc_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerReport {
    pub spec: ScenarioSpec,
    pub alpha: f64,
    pub replications: usize,
    pub seed: u64,
    pub options: SimulationOptions,
    pub results: Vec<MethodPower>,
}

impl PowerReport {
    pub fn get(&self, method: Method) -> Option<&MethodPower> {
        self.results.iter().find(|r| r.method == method)
    }
}

/// Estimates the rejection rate of each method at level `alpha`.
///
/// Replicate `r` draws its data from stream `(seed, r)` and then draws the
/// seed for its permutation tests from the same stream.
pub fn estimate_power(
    spec: &ScenarioSpec,
    methods: &[Method],
    alpha: f64,
    replications: usize,
    seed: u64,
    options: SimulationOptions,
) -> Result<PowerReport> {
    spec.validate()?;
    if replications == 0 {
        return Err(Error::invalid("replications must be at least 1"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if methods.is_empty() {
        return Err(Error::invalid("no tests selected"));
    }
    let decisions: Vec<Vec<bool>> = (0..replications)
        .into_par_iter()
        .map(|r| {
            run_replicate(spec, methods, alpha, seed, r as u64, options).map_err(|e| Error::Replicate {
                index: r,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;

    let results = methods
        .iter()
        .enumerate()
        .map(|(m, &method)| {
            let rejections = decisions.iter().filter(|d| d[m]).count();
            let rate = rejections as f64 / replications as f64;
            MethodPower {
                method,
                rejections,
                rate,
                mc_se: (rate * (1.0 - rate) / replications as f64).sqrt(),
            }
        })
        .collect();
    Ok(PowerReport {
        spec: spec.clone(),
        alpha,
        replications,
        seed,
        options,
        results,
    })
}

fn run_replicate(
    spec: &ScenarioSpec,
    methods: &[Method],
    alpha: f64,
    seed: u64,
    replicate: u64,
    options: SimulationOptions,
) -> Result<Vec<bool>> {
    let mut rng = substream(seed, replicate);
    let data = generate_with_rng(spec, &mut rng)?;
    let perm_seed: u64 = rng.random();
    let graph = build_kmst(&pairwise_distances(&data, options.metric), options.k_mst)?;
    let ctx = TestContext::new(&graph, data.labels(), data.group_sizes())?;
    methods
        .iter()
        .map(|&m| ctx.run(m, options.n_perm, perm_seed).map(|r| r.rejects(alpha)))
        .collect()
}

/// Statistic values over `replications` simulated datasets, indexed
/// `[replicate][kind]`.
pub fn simulate_statistics(
    spec: &ScenarioSpec,
    kinds: &[StatKind],
    replications: usize,
    seed: u64,
    options: SimulationOptions,
) -> Result<Vec<Vec<StatValue>>> {
    spec.validate()?;
    (0..replications)
        .into_par_iter()
        .map(|r| {
            let inner = || -> Result<Vec<StatValue>> {
                let data = generate_scenario(spec, seed, r as u64)?;
                let graph = build_kmst(&pairwise_distances(&data, options.metric), options.k_mst)?;
                let ctx = TestContext::new(&graph, data.labels(), data.group_sizes())?;
                kinds
                    .iter()
                    .map(|&k| {
                        StatEvaluator::new(ctx.moments(), k, RankTolerance::default())
                            .map(|ev| ev.evaluate(ctx.counts()))
                    })
                    .collect()
            };
            inner().map_err(|e| Error::Replicate {
                index: r,
                source: Box::new(e),
            })
        })
        .collect()
}

/// `(empirical, chi-square)` quantile pairs at plotting positions
/// `(i + 0.5) / n`, both columns ascending.
pub fn qq_pairs(values: &[f64], dof: usize) -> Result<Vec<(f64, f64)>> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, v)| chi_square_quantile((i as f64 + 0.5) / n, dof).map(|q| (v, q)))
        .collect()
}

/// Pearson correlation; `NaN` when either column is constant.
pub fn correlation(pairs: &[(f64, f64)]) -> f64 {
    let n = pairs.len() as f64;
    let (mx, my) = pairs
        .iter()
        .fold((0.0, 0.0), |(a, b), &(x, y)| (a + x / n, b + y / n));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_separations() {
        assert_eq!(Family::S2Scale.reference_separation(4, Variant::Location), Some(0.05));
        assert_eq!(Family::S2Scale.reference_separation(5, Variant::Location), Some(0.07));
        assert_eq!(Family::S7StudentT.reference_separation(8, Variant::Scale), Some(0.1));
        assert_eq!(Family::S3Covariance.reference_separation(3, Variant::Location), None);
        assert_eq!(Family::S1Location.reference_separation(6, Variant::Location), None);
    }
    use approx::assert_abs_diff_eq;

    #[test]
    fn s1_shapes_and_determinism() {
        let spec = ScenarioSpec::balanced(Family::S1Location, 3, 4, 5, 0.5);
        let a = generate_scenario(&spec, 9, 2).unwrap();
        let b = generate_scenario(&spec, 9, 2).unwrap();
        let c = generate_scenario(&spec, 9, 3).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 15);
        assert_eq!(a.group_sizes(), &[5, 5, 5]);
    }

    #[test]
    fn ar1_factor_reproduces_matrix() {
        for &(rho, d) in &[(0.4, 300), (0.85, 50), (-0.3, 17)] {
            let l = ar1_cholesky(rho, d).unwrap();
            let back = &l * l.transpose();
            let target = ar1_matrix(rho, d);
            assert!((back - target).amax() < 1e-10);
        }
        assert!(ar1_cholesky(1.0, 3).is_err());
    }

    #[test]
    fn validation_ranges() {
        let ok = ScenarioSpec::balanced(Family::S4Kurtosis, 3, 2, 2, 0.1);
        assert!(ok.validate().is_ok());
        assert_abs_diff_eq!(ok.group_df(0), 2.1, epsilon = 1e-12);
        let mut bad = ok.clone();
        bad.base_df = Some(2.0);
        assert!(bad.validate().is_err());
        assert!(ScenarioSpec::balanced(Family::S3Covariance, 3, 4, 2, 0.5).validate().is_err());
        assert!(ScenarioSpec::balanced(Family::S2Scale, 3, 4, 2, -0.6).validate().is_err());
        assert!(ScenarioSpec::balanced(Family::S1Location, 3, 0, 2, 0.0).validate().is_err());
        assert!(ScenarioSpec::balanced(Family::S1Location, 3, 2, 0, 0.0).validate().is_err());
        assert!(ScenarioSpec::balanced(Family::S5SkewKurtosis, 3, 2, 2, 1.0).validate().is_ok());
        let scale7 = ScenarioSpec::balanced(Family::S7StudentT, 4, 3, 2, -0.5).with_variant(Variant::Scale);
        assert!(scale7.validate().is_err());
    }

    #[test]
    fn every_family_generates() {
        for fam in [
            Family::S1Location,
            Family::S2Scale,
            Family::S3Covariance,
            Family::S4Kurtosis,
            Family::S5SkewKurtosis,
            Family::S6Lognormal,
            Family::S7StudentT,
        ] {
            for variant in [Variant::Location, Variant::Scale] {
                let spec = ScenarioSpec::balanced(fam, 3, 6, 4, 0.2).with_variant(variant);
                let ds = generate_scenario(&spec, 1, 0).unwrap();
                assert_eq!(ds.len(), 12);
                assert!(ds.points().iter().all(|v| v.is_finite()));
            }
        }
    }

    #[test]
    fn qq_pairs_sorted() {
        let pairs = qq_pairs(&[3.0, 0.5, 1.2, 7.0], 2).unwrap();
        assert!(pairs.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1));
        assert!(qq_pairs(&[], 2).unwrap().is_empty());
    }

    #[test]
    fn correlation_of_line() {
        let pairs: Vec<_> = (0..10).map(|i| (i as f64, 2.0 * i as f64 + 1.0)).collect();
        assert_abs_diff_eq!(correlation(&pairs), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn power_rejects_bad_arguments() {
        let spec = ScenarioSpec::balanced(Family::S1Location, 3, 2, 5, 0.0);
        let opts = SimulationOptions::default();
        assert!(estimate_power(&spec, &[Method::FastCombined], 0.05, 0, 1, opts).is_err());
        assert!(estimate_power(&spec, &[Method::FastCombined], 1.5, 5, 1, opts).is_err());
        assert!(estimate_power(&spec, &[], 0.05, 5, 1, opts).is_err());
    }

    #[test]
    fn replicate_errors_name_the_index() {
        // 3 observations cannot host a 5-MST.
        let spec = ScenarioSpec::balanced(Family::S1Location, 3, 2, 1, 0.0);
        let err = estimate_power(&spec, &[Method::FastCombined], 0.05, 2, 1, SimulationOptions::default())
            .unwrap_err();
        assert!(matches!(err, Error::Replicate { .. }));
    }
}

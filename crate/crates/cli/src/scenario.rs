//! Simulation subcommands: `power`, `qq` and `generate`.
//!
//! A scenario can be given by flags, by a TOML file (`--config`), or both;
//! flags override the file. Every key is optional in the file:
//!
//! ```toml
//! family = "s1_location"            # s1..s7 or the full name
//! variant = "location"              # or "scale" (S6/S7)
//! dim = 50
//! groups = 3                        # with `n`, or give `sizes = [50, 50, 50]`
//! n = 50
//! separations = [0.0, 0.07, 0.14]  # power defaults to the family's standard
//!                                   # value for K; qq and generate to 0
//! base_df = 3.0                     # S4/S5 first-group degrees of freedom
//! replications = 200
//! seed = 1
//! k = 5
//! metric = "euclidean"              # or "manhattan"
//! alpha = 0.05                      # power
//! perms = 1000                      # power, permutation tests
//! tests = ["SS_fast", "SA_asym", "perm_S"]   # power
//! stats = ["SW", "SB", "SA"]        # qq
//! ```

use std::path::{Path, PathBuf};

use clap::Args;
use kgraph::simulation::{correlation, qq_pairs, SimulationOptions};
use kgraph::stats::Dof;
use kgraph::{
    estimate_power, generate_scenario, simulate_statistics, Family, Method, Metric, PowerReport, ScenarioSpec,
    StatKind, Variant,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::output::{self, Format};
use crate::test_cmd::check_alpha;

pub const POWER_SCHEMA: &str = "kgraph.power/1";

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub family: Option<String>,
    pub variant: Option<String>,
    pub dim: Option<usize>,
    pub groups: Option<usize>,
    pub n: Option<usize>,
    pub sizes: Option<Vec<usize>>,
    pub separations: Option<Vec<f64>>,
    pub base_df: Option<f64>,
    pub replications: Option<usize>,
    pub seed: Option<u64>,
    pub k: Option<usize>,
    pub metric: Option<String>,
    pub alpha: Option<f64>,
    pub perms: Option<usize>,
    pub tests: Option<Vec<String>>,
    pub stats: Option<Vec<String>>,
}

impl ScenarioConfig {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
        toml::from_str(&text).map_err(|source| CliError::Config { path: path.to_path_buf(), source })
    }
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    /// TOML scenario file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,

    /// s1_location, s2_scale, s3_covariance, s4_kurtosis, s5_skew_kurtosis,
    /// s6_lognormal, s7_student_t (or just s1..s7).
    #[arg(long)]
    pub family: Option<String>,

    /// location or scale (S6 and S7 only).
    #[arg(long)]
    pub variant: Option<String>,

    #[arg(long)]
    pub dim: Option<usize>,

    /// Number of groups, each of size `--n`.
    #[arg(long)]
    pub groups: Option<usize>,

    #[arg(long)]
    pub n: Option<usize>,

    /// Explicit group sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,

    /// Separation parameter(s), comma separated or repeated. `power` defaults
    /// to the standard value for the family and K, `qq`/`generate` to 0.
    #[arg(long = "separation", value_delimiter = ',')]
    pub separations: Option<Vec<f64>>,

    #[arg(long)]
    pub base_df: Option<f64>,

    #[arg(long)]
    pub reps: Option<usize>,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Spanning trees per similarity graph.
    #[arg(long)]
    pub k: Option<usize>,

    /// euclidean or manhattan.
    #[arg(long)]
    pub metric: Option<String>,
}

/// Fully resolved scenario settings.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub family: Family,
    pub variant: Variant,
    pub dim: usize,
    pub sizes: Vec<usize>,
    pub separations: Vec<f64>,
    pub base_df: Option<f64>,
    pub replications: usize,
    pub seed: u64,
    pub k: usize,
    pub metric: Metric,
    pub config: ScenarioConfig,
}

impl Scenario {
    pub fn spec(&self, separation: f64) -> ScenarioSpec {
        ScenarioSpec {
            family: self.family,
            dim: self.dim,
            group_sizes: self.sizes.clone(),
            separation,
            variant: self.variant,
            base_df: self.base_df,
        }
    }

    /// The single separation used by `qq` and `generate`.
    fn single_separation(&self) -> Result<f64> {
        match self.separations.as_slice() {
            [s] => Ok(*s),
            _ => Err(CliError::input("exactly one --separation value is expected")),
        }
    }
}

pub fn parse_family(s: &str) -> Result<Family> {
    let lower = s.to_ascii_lowercase();
    let prefix = lower.split('_').next().unwrap_or("");
    let family = match prefix {
        "s1" => Family::S1Location,
        "s2" => Family::S2Scale,
        "s3" => Family::S3Covariance,
        "s4" => Family::S4Kurtosis,
        "s5" => Family::S5SkewKurtosis,
        "s6" => Family::S6Lognormal,
        "s7" => Family::S7StudentT,
        _ => return Err(CliError::input(format!("unknown scenario family '{s}'"))),
    };
    if lower != prefix && lower != family.label() {
        return Err(CliError::input(format!(
            "unknown scenario family '{s}' (did you mean {}?)",
            family.label()
        )));
    }
    Ok(family)
}

fn parse_variant(s: &str) -> Result<Variant> {
    match s.to_ascii_lowercase().as_str() {
        "location" => Ok(Variant::Location),
        "scale" => Ok(Variant::Scale),
        _ => Err(CliError::input(format!("unknown variant '{s}', expected location or scale"))),
    }
}

fn parse_metric(s: &str) -> Result<Metric> {
    match s.to_ascii_lowercase().as_str() {
        "euclidean" => Ok(Metric::Euclidean),
        "manhattan" => Ok(Metric::Manhattan),
        _ => Err(CliError::input(format!("unknown metric '{s}', expected euclidean or manhattan"))),
    }
}

/// What to use when no separation is given.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeparationDefault {
    /// `0`: the null scenario.
    Null,
    /// The family's standard power-study value for this `K`.
    Reference,
}

pub fn resolve(args: &ScenarioArgs, default_reps: usize, default_sep: SeparationDefault) -> Result<Scenario> {
    let config = match &args.config {
        Some(p) => ScenarioConfig::read(p)?,
        None => ScenarioConfig::default(),
    };
    let family = args
        .family
        .as_deref()
        .or(config.family.as_deref())
        .ok_or_else(|| CliError::input("a scenario family is required (--family or config)"))
        .and_then(parse_family)?;
    let variant = args
        .variant
        .as_deref()
        .or(config.variant.as_deref())
        .map(parse_variant)
        .transpose()?
        .unwrap_or_default();
    let dim = args
        .dim
        .or(config.dim)
        .ok_or_else(|| CliError::input("a dimension is required (--dim or config)"))?;
    let sizes = match (args.sizes.clone(), args.groups, args.n) {
        (Some(s), None, None) => s,
        (Some(_), _, _) => return Err(CliError::input("give either --sizes or --groups with --n, not both")),
        (None, g, n) => match (g.or(config.groups), n.or(config.n), config.sizes.clone()) {
            (Some(g), Some(n), _) => vec![n; g],
            (None, None, Some(s)) => s,
            _ => {
                return Err(CliError::input(
                    "group sizes are required: --groups with --n, or --sizes",
                ))
            }
        },
    };
    let separations = match (args.separations.clone().or_else(|| config.separations.clone()), default_sep) {
        (Some(s), _) => s,
        (None, SeparationDefault::Null) => vec![0.0],
        (None, SeparationDefault::Reference) => vec![family
            .reference_separation(sizes.len(), variant)
            .ok_or_else(|| {
                CliError::input(format!(
                    "{} with {} groups has no standard separation; give --separation",
                    family.label(),
                    sizes.len()
                ))
            })?],
    };
    if separations.is_empty() {
        return Err(CliError::input("at least one separation is required"));
    }
    let metric = args
        .metric
        .as_deref()
        .or(config.metric.as_deref())
        .map(parse_metric)
        .transpose()?
        .unwrap_or(Metric::Euclidean);
    let k = args.k.or(config.k).unwrap_or(kgraph::simulation::DEFAULT_K_MST);
    if k == 0 {
        return Err(CliError::input("k must be at least 1"));
    }
    let scenario = Scenario {
        family,
        variant,
        dim,
        sizes,
        separations,
        base_df: args.base_df.or(config.base_df),
        replications: args.reps.or(config.replications).unwrap_or(default_reps),
        seed: args.seed.or(config.seed).unwrap_or(0),
        k,
        metric,
        config,
    };
    for &s in &scenario.separations {
        scenario.spec(s).validate()?;
    }
    Ok(scenario)
}

#[derive(Debug, Clone, Args)]
pub struct PowerArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,

    /// Test methods, comma separated: SW_asym, SB_asym, SA_asym, SS_fast,
    /// perm_S, perm_SW, perm_SB, perm_SA.
    #[arg(long, value_delimiter = ',')]
    pub tests: Option<Vec<String>>,

    #[arg(long)]
    pub alpha: Option<f64>,

    /// Permutations per replicate for permutation tests.
    #[arg(long)]
    pub perms: Option<usize>,

    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

pub const DEFAULT_POWER_TESTS: [Method; 3] = [Method::FastCombined, Method::AllAsymptotic, Method::PermSum];

#[derive(Debug, Serialize)]
pub struct PowerDocument {
    pub schema: &'static str,
    pub rows: Vec<PowerReport>,
}

pub fn run_power(args: &PowerArgs) -> Result<(Scenario, Vec<Method>, Vec<PowerReport>)> {
    let scenario = resolve(&args.scenario, 1000, SeparationDefault::Reference)?;
    let cfg = &scenario.config;
    let alpha = args.alpha.or(cfg.alpha).unwrap_or(0.05);
    check_alpha(alpha)?;
    let methods: Vec<Method> = match args.tests.as_ref().or(cfg.tests.as_ref()) {
        None => DEFAULT_POWER_TESTS.to_vec(),
        Some(labels) => labels
            .iter()
            .map(|l| Method::from_label(l).ok_or_else(|| CliError::input(format!("unknown test '{l}'"))))
            .collect::<Result<_>>()?,
    };
    let options = SimulationOptions {
        k_mst: scenario.k,
        metric: scenario.metric,
        n_perm: args.perms.or(cfg.perms).unwrap_or(1000),
    };
    let mut reports = Vec::with_capacity(scenario.separations.len());
    for &sep in &scenario.separations {
        eprintln!(
            "{} separation {sep}: {} replicates",
            scenario.family.label(),
            scenario.replications
        );
        reports.push(estimate_power(
            &scenario.spec(sep),
            &methods,
            alpha,
            scenario.replications,
            scenario.seed,
            options,
        )?);
    }
    Ok((scenario, methods, reports))
}

/// Change in rate from the previous grid point: `up`/`down` when it exceeds
/// two combined Monte Carlo standard errors, else `flat`.
pub fn trend(prev: Option<(f64, f64)>, rate: f64, se: f64) -> &'static str {
    match prev {
        None => "-",
        Some((r0, se0)) => {
            let band = 2.0 * (se0 * se0 + se * se).sqrt();
            if rate - r0 > band {
                "up"
            } else if r0 - rate > band {
                "down"
            } else {
                "flat"
            }
        }
    }
}

pub fn power_table(methods: &[Method], reports: &[PowerReport]) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header: Vec<String> = [
        "family",
        "variant",
        "separation",
        "dim",
        "groups",
        "sizes",
        "alpha",
        "replications",
        "seed",
        "k",
        "n_perm",
    ]
    .map(String::from)
    .to_vec();
    for m in methods {
        for suffix in ["rate", "se", "rejections", "trend"] {
            header.push(format!("{m}_{suffix}"));
        }
    }
    let mut rows = Vec::new();
    for (i, r) in reports.iter().enumerate() {
        let spec = &r.spec;
        let mut row = vec![
            spec.family.label().to_string(),
            match spec.variant {
                Variant::Location => "location",
                Variant::Scale => "scale",
            }
            .to_string(),
            spec.separation.to_string(),
            spec.dim.to_string(),
            spec.groups().to_string(),
            spec.group_sizes.iter().map(usize::to_string).collect::<Vec<_>>().join(";"),
            r.alpha.to_string(),
            r.replications.to_string(),
            r.seed.to_string(),
            r.options.k_mst.to_string(),
            r.options.n_perm.to_string(),
        ];
        for &m in methods {
            let p = r.get(m).expect("every method is reported");
            let prev = i.checked_sub(1).and_then(|j| reports[j].get(m)).map(|q| (q.rate, q.mc_se));
            row.extend([
                p.rate.to_string(),
                p.mc_se.to_string(),
                p.rejections.to_string(),
                trend(prev, p.rate, p.mc_se).to_string(),
            ]);
        }
        rows.push(row);
    }
    (header, rows)
}

pub fn cmd_power(args: &PowerArgs) -> Result<()> {
    let (_, methods, reports) = run_power(args)?;
    for &m in &methods {
        let rates: Vec<f64> = reports.iter().map(|r| r.get(m).expect("reported").rate).collect();
        let monotone = rates.windows(2).all(|w| w[1] >= w[0]);
        eprintln!("{m}: rates {rates:?}; nondecreasing: {monotone}");
    }
    match args.format {
        Format::Csv => {
            let (header, rows) = power_table(&methods, &reports);
            output::write_csv(args.out.as_deref(), &header, &rows)
        }
        Format::Json => output::write_json(
            args.out.as_deref(),
            &PowerDocument {
                schema: POWER_SCHEMA,
                rows: reports,
            },
        ),
    }
}

#[derive(Debug, Clone, Args)]
pub struct QqArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,

    /// Statistic(s): SW, SB, SA. Defaults to all three.
    #[arg(long = "stat", value_delimiter = ',')]
    pub stats: Option<Vec<String>>,

    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_qq_stat(s: &str) -> Result<StatKind> {
    match s.to_ascii_uppercase().as_str() {
        "SW" => Ok(StatKind::Within),
        "SB" => Ok(StatKind::Between),
        "SA" => Ok(StatKind::All),
        _ => Err(CliError::input(format!(
            "qq supports SW, SB and SA (single chi-square references), got '{s}'"
        ))),
    }
}

/// Most frequent degrees of freedom among the replicates.
fn modal_dof(values: &[Dof]) -> Option<usize> {
    let mut counts = std::collections::BTreeMap::new();
    for d in values {
        if let Dof::Single(r) = d {
            *counts.entry(*r).or_insert(0usize) += 1;
        }
    }
    counts.into_iter().max_by_key(|&(r, c)| (c, r)).map(|(r, _)| r)
}

pub fn run_qq(args: &QqArgs) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let scenario = resolve(&args.scenario, 1000, SeparationDefault::Null)?;
    let kinds: Vec<StatKind> = match args.stats.as_ref().or(scenario.config.stats.as_ref()) {
        None => vec![StatKind::Within, StatKind::Between, StatKind::All],
        Some(v) => v.iter().map(|s| parse_qq_stat(s)).collect::<Result<_>>()?,
    };
    let spec = scenario.spec(scenario.single_separation()?);
    let options = SimulationOptions {
        k_mst: scenario.k,
        metric: scenario.metric,
        ..Default::default()
    };
    let values = simulate_statistics(&spec, &kinds, scenario.replications, scenario.seed, options)?;
    let header = ["statistic", "dof", "index", "empirical", "chi_square"].map(String::from).to_vec();
    let mut rows = Vec::new();
    for (s, kind) in kinds.iter().enumerate() {
        let column: Vec<f64> = values.iter().map(|rep| rep[s].value).collect();
        let dofs: Vec<Dof> = values.iter().map(|rep| rep[s].dof).collect();
        let Some(dof) = modal_dof(&dofs) else { continue };
        let pairs = qq_pairs(&column, dof)?;
        eprintln!("{}: chi-square({dof}) QQ correlation {:.4}", kind.label(), correlation(&pairs));
        for (i, (e, q)) in pairs.into_iter().enumerate() {
            rows.push(vec![kind.label().to_string(), dof.to_string(), i.to_string(), e.to_string(), q.to_string()]);
        }
    }
    Ok((header, rows))
}

pub fn cmd_qq(args: &QqArgs) -> Result<()> {
    let (header, rows) = run_qq(args)?;
    output::write_csv(args.out.as_deref(), &header, &rows)
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,

    /// Replicate index within the seed's streams.
    #[arg(long, default_value_t = 0)]
    pub replicate: u64,

    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Writes one simulated dataset as a feature CSV (`x1..xd,label`, labels `g1..gK`).
pub fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let scenario = resolve(&args.scenario, 1, SeparationDefault::Null)?;
    let spec = scenario.spec(scenario.single_separation()?);
    let data = generate_scenario(&spec, scenario.seed, args.replicate)?;
    let mut header: Vec<String> = (1..=data.dim()).map(|j| format!("x{j}")).collect();
    header.push("label".into());
    let rows: Vec<Vec<String>> = (0..data.len())
        .map(|i| {
            let mut row: Vec<String> = data.point(i).iter().map(f64::to_string).collect();
            row.push(format!("g{}", data.labels()[i] + 1));
            row
        })
        .collect();
    output::write_csv(args.out.as_deref(), &header, &rows)
}

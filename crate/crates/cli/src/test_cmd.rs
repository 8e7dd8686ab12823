use std::path::PathBuf;

use clap::{Args, ValueEnum};
use kgraph::stats::Dof;
use kgraph::{build_kmst, GraphConditionStats, Method, StatKind, TestContext, TestResult};
use serde::Serialize;

use crate::error::{CliError, Result};
use crate::input::{self, Group, InputArgs, InputSummary};
use crate::output::{self, opt, Format};

pub const TEST_SCHEMA: &str = "kgraph.test/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StatArg {
    #[value(name = "SW")]
    Sw,
    #[value(name = "SB")]
    Sb,
    #[value(name = "SA")]
    Sa,
    #[value(name = "S")]
    S,
    #[value(name = "SS")]
    Ss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Asym,
    Perm,
    Both,
}

#[derive(Debug, Clone, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub input: InputArgs,

    /// Statistic(s) to test; defaults to SS and SA, plus S under permutation.
    #[arg(long = "stat", value_enum, ignore_case = true)]
    pub stats: Vec<StatArg>,

    #[arg(long, value_enum, default_value_t = Mode::Asym)]
    pub mode: Mode,

    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,

    /// Permutations per permutation test.
    #[arg(long, default_value_t = 1000)]
    pub perms: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long)]
    pub out: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Serialize)]
pub struct ResultEntry {
    #[serde(flatten)]
    pub result: TestResult,
    pub reject: bool,
    pub decision: &'static str,
}

#[derive(Debug, Serialize)]
pub struct TestDocument {
    pub schema: &'static str,
    pub input: InputSummary,
    pub k: u64,
    pub mode: Mode,
    pub alpha: f64,
    pub n_perm: usize,
    pub seed: u64,
    pub groups: Vec<Group>,
    pub graph: GraphConditionStats,
    pub counts: Vec<Vec<u64>>,
    pub results: Vec<ResultEntry>,
    /// Requested statistic/mode combinations that have no implementation.
    pub skipped: Vec<String>,
}

fn stat_kind(s: StatArg) -> Option<StatKind> {
    match s {
        StatArg::Sw => Some(StatKind::Within),
        StatArg::Sb => Some(StatKind::Between),
        StatArg::Sa => Some(StatKind::All),
        StatArg::S => Some(StatKind::Sum),
        StatArg::Ss => None,
    }
}

/// Expands the requested statistics over the mode. Combinations without an
/// implementation (asymptotic `S`, permutation `SS`) are returned as skipped.
pub fn select_methods(stats: &[StatArg], mode: Mode) -> (Vec<Method>, Vec<String>) {
    if stats.is_empty() {
        let defaults = match mode {
            Mode::Asym => vec![Method::FastCombined, Method::AllAsymptotic],
            Mode::Perm => vec![Method::PermSum],
            Mode::Both => vec![Method::FastCombined, Method::AllAsymptotic, Method::PermSum],
        };
        return (defaults, Vec::new());
    }
    let mut methods = Vec::new();
    let mut skipped = Vec::new();
    for &s in stats {
        let asym = match stat_kind(s) {
            None => Some(Method::FastCombined),
            Some(kind) => Method::asymptotic(kind),
        };
        let perm = stat_kind(s).map(Method::permutation);
        let mut push = |m: Option<Method>, what: &str| match m {
            Some(m) if !methods.contains(&m) => methods.push(m),
            Some(_) => {}
            None => skipped.push(format!("{} has no {what} test", name(s))),
        };
        if mode != Mode::Perm {
            push(asym, "asymptotic");
        }
        if mode != Mode::Asym {
            push(perm, "permutation");
        }
    }
    (methods, skipped)
}

fn name(s: StatArg) -> &'static str {
    match s {
        StatArg::Sw => "SW",
        StatArg::Sb => "SB",
        StatArg::Sa => "SA",
        StatArg::S => "S",
        StatArg::Ss => "SS",
    }
}

pub fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(CliError::input(format!("--alpha must lie in (0, 1), got {alpha}")))
    }
}

pub fn run_test(args: &TestArgs) -> Result<TestDocument> {
    check_alpha(args.alpha)?;
    let (methods, skipped) = select_methods(&args.stats, args.mode);
    if methods.is_empty() {
        return Err(CliError::input(format!(
            "no runnable tests: {}",
            skipped.join("; ")
        )));
    }
    if methods.iter().any(|m| m.is_permutation()) && args.perms == 0 {
        return Err(CliError::input("--perms must be at least 1"));
    }
    let input = input::load(&args.input)?;
    if input.groups.len() < 2 {
        return Err(CliError::input(format!(
            "need at least two groups, found {}",
            input.groups.len()
        )));
    }
    let graph = build_kmst(&input.distances, args.input.k as usize)?;
    let ctx = TestContext::new(&graph, &input.labels, &input.group_sizes)?;
    let results = methods
        .iter()
        .map(|&m| {
            ctx.run(m, args.perms, args.seed).map(|result| {
                let reject = result.rejects(args.alpha);
                ResultEntry {
                    result,
                    reject,
                    decision: if reject { "reject" } else { "fail_to_reject" },
                }
            })
        })
        .collect::<kgraph::Result<Vec<_>>>()?;
    Ok(TestDocument {
        schema: TEST_SCHEMA,
        input: input.summary,
        k: args.input.k,
        mode: args.mode,
        alpha: args.alpha,
        n_perm: args.perms,
        seed: args.seed,
        groups: input.groups,
        graph: ctx.diagnostics().clone(),
        counts: ctx.counts().rows(),
        results,
        skipped,
    })
}


pub fn dof_string(d: &Dof) -> String {
    match d {
        Dof::Single(k) => k.to_string(),
        Dof::Pair(a, b) => format!("{a}+{b}"),
    }
}

pub fn cmd_test(args: &TestArgs) -> Result<()> {
    let doc = run_test(args)?;
    for r in &doc.results {
        for w in &r.result.warnings {
            eprintln!("warning: {}: {w}", r.result.method);
        }
    }
    for s in &doc.skipped {
        eprintln!("warning: skipped: {s}");
    }
    match args.format {
        Format::Json => output::write_json(args.out.as_deref(), &doc),
        Format::Csv => {
            let header: Vec<String> = [
                "method",
                "statistic",
                "dof",
                "p_value",
                "alpha",
                "decision",
                "n_permutations",
                "seed",
                "p_within",
                "p_between",
                "p_capped",
                "used_pseudo_inverse",
                "conditions_strained",
            ]
            .map(String::from)
            .to_vec();
            let rows: Vec<Vec<String>> = doc
                .results
                .iter()
                .map(|e| {
                    let r = &e.result;
                    vec![
                        r.method.to_string(),
                        r.statistic.to_string(),
                        r.dof.as_ref().map(dof_string).unwrap_or_default(),
                        r.p_value.to_string(),
                        doc.alpha.to_string(),
                        e.decision.to_string(),
                        opt(r.n_permutations),
                        opt(r.seed),
                        opt(r.component_p_values.map(|p| p[0])),
                        opt(r.component_p_values.map(|p| p[1])),
                        r.p_capped.to_string(),
                        r.used_pseudo_inverse.to_string(),
                        r.conditions_strained.to_string(),
                    ]
                })
                .collect();
            output::write_csv(args.out.as_deref(), &header, &rows)
        }
    }
}

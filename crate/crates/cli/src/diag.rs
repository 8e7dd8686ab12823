use std::path::PathBuf;

use clap::Args;
use kgraph::stats::{spectrum_summary, RankTolerance, SpectrumSummary};
use kgraph::{build_kmst, condition_stats, count_edges, null_moments, standardized_counts, CountView, GraphConditionStats, ZScore};
use serde::Serialize;

use crate::error::Result;
use crate::input::{self, Group, InputArgs, InputSummary};
use crate::output;

pub const DIAG_SCHEMA: &str = "kgraph.diag/1";

#[derive(Debug, Clone, Args)]
pub struct DiagArgs {
    #[command(flatten)]
    pub input: InputArgs,

    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct CovarianceDiagnostics {
    pub within: SpectrumSummary,
    pub between: SpectrumSummary,
    pub all: SpectrumSummary,
}

#[derive(Debug, Serialize)]
pub struct DiagDocument {
    pub schema: &'static str,
    pub input: InputSummary,
    pub k: u64,
    pub groups: Vec<Group>,
    pub graph: GraphConditionStats,
    pub counts: Vec<Vec<u64>>,
    pub expected_counts: Vec<Vec<f64>>,
    pub covariance: CovarianceDiagnostics,
    /// Standardized counts; `null` where the null variance vanishes.
    pub z: Vec<Vec<ZScore>>,
}

/// Diagnostics work for any number of groups, including one.
pub fn run_diag(args: &DiagArgs) -> Result<DiagDocument> {
    let input = input::load(&args.input)?;
    let k = input.groups.len();
    let graph = build_kmst(&input.distances, args.input.k as usize)?;
    let moments = null_moments(&graph, &input.group_sizes)?;
    let counts = count_edges(&graph, &input.labels, k)?;
    let spectrum = |view| spectrum_summary(&moments.view(view).1, RankTolerance::default());
    Ok(DiagDocument {
        schema: DIAG_SCHEMA,
        input: input.summary,
        k: args.input.k,
        groups: input.groups,
        graph: condition_stats(&graph),
        expected_counts: (0..k).map(|i| (0..k).map(|j| moments.mean_of(i, j)).collect()).collect(),
        covariance: CovarianceDiagnostics {
            within: spectrum(CountView::Within),
            between: spectrum(CountView::Between),
            all: spectrum(CountView::All),
        },
        z: standardized_counts(&counts, &moments)?,
        counts: counts.rows(),
    })
}

pub fn cmd_diag(args: &DiagArgs) -> Result<()> {
    output::write_json(args.out.as_deref(), &run_diag(args)?)
}

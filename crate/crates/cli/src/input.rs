//! Input files.
//!
//! * **Feature CSV**: a header row; one column (named by `--label-col`) holds
//!   the group labels, every other column must be numeric and is used as a
//!   coordinate.
//! * **Distance CSV**: an `N x N` numeric matrix without header, read with
//!   `--metric precomputed`, plus a labels file with one label per line
//!   (`--labels`). Blank lines in the labels file are ignored.
//!
//! Labels are arbitrary strings. Groups are numbered in order of first
//! appearance and that mapping is echoed in every output document.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use kgraph::{pairwise_distances, Dataset, DistanceMatrix, Metric};
use serde::Serialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricArg {
    Euclidean,
    Manhattan,
    Precomputed,
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Feature CSV, or a distance matrix CSV with `--metric precomputed`.
    #[arg(long)]
    pub input: PathBuf,

    /// Label column of a feature CSV.
    #[arg(long, default_value = "label")]
    pub label_col: String,

    /// One label per line; required with `--metric precomputed`.
    #[arg(long)]
    pub labels: Option<PathBuf>,

    #[arg(long, value_enum, default_value_t = MetricArg::Euclidean)]
    pub metric: MetricArg,

    /// Number of edge-disjoint spanning trees in the similarity graph.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub k: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Group {
    pub index: usize,
    pub label: String,
    pub size: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct InputSummary {
    pub path: String,
    pub kind: &'static str,
    pub metric: MetricArg,
    pub observations: usize,
    /// Feature dimension; absent for distance input.
    pub dim: Option<usize>,
}

#[derive(Debug)]
pub struct LoadedInput {
    pub distances: DistanceMatrix,
    pub labels: Vec<usize>,
    pub group_sizes: Vec<usize>,
    pub groups: Vec<Group>,
    pub summary: InputSummary,
}

/// Maps labels to group indices in first-appearance order.
pub fn encode_labels(raw: &[String]) -> (Vec<usize>, Vec<Group>) {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut groups: Vec<Group> = Vec::new();
    let labels = raw
        .iter()
        .map(|l| {
            let next = groups.len();
            let g = *index.entry(l.as_str()).or_insert(next);
            if g == next {
                groups.push(Group { index: g, label: l.clone(), size: 0 });
            }
            groups[g].size += 1;
            g
        })
        .collect();
    (labels, groups)
}

pub fn load(args: &InputArgs) -> Result<LoadedInput> {
    let (distances, raw_labels, kind, dim) = match (args.metric, &args.labels) {
        (MetricArg::Precomputed, Some(labels_path)) => {
            let d = read_distance_matrix(&args.input)?;
            let labels = read_labels(labels_path)?;
            if labels.len() != d.len() {
                return Err(CliError::input(format!(
                    "{} has {} labels but the distance matrix has {} rows",
                    labels_path.display(),
                    labels.len(),
                    d.len()
                )));
            }
            (d, labels, "distances", None)
        }
        (MetricArg::Precomputed, None) => {
            return Err(CliError::input("--metric precomputed requires --labels"));
        }
        (_, Some(_)) => {
            return Err(CliError::input(
                "--labels is only used with --metric precomputed; feature CSVs carry a label column",
            ));
        }
        (metric, None) => {
            let (rows, labels) = read_features(&args.input, &args.label_col)?;
            let dim = rows.first().map_or(0, Vec::len);
            let (encoded, _) = encode_labels(&labels);
            let data = Dataset::from_rows(rows, encoded)?;
            let metric = if metric == MetricArg::Manhattan { Metric::Manhattan } else { Metric::Euclidean };
            (pairwise_distances(&data, metric), labels, "features", Some(dim))
        }
    };
    let (labels, groups) = encode_labels(&raw_labels);
    Ok(LoadedInput {
        group_sizes: groups.iter().map(|g| g.size).collect(),
        summary: InputSummary {
            path: args.input.display().to_string(),
            kind,
            metric: args.metric,
            observations: labels.len(),
            dim,
        },
        distances,
        labels,
        groups,
    })
}

fn csv_error(path: &Path) -> impl Fn(csv::Error) -> CliError + '_ {
    move |source| CliError::Csv { path: path.to_path_buf(), source }
}

fn parse_number(path: &Path, field: &str, row: usize, column: &str) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|_| {
        CliError::input(format!(
            "{}: row {row}, column {column}: '{field}' is not a number",
            path.display()
        ))
    })?;
    if !v.is_finite() {
        return Err(CliError::input(format!(
            "{}: row {row}, column {column}: value {v} is not finite",
            path.display()
        )));
    }
    Ok(v)
}

/// Reads a feature CSV; returns coordinates and raw labels.
pub fn read_features(path: &Path, label_col: &str) -> Result<(Vec<Vec<f64>>, Vec<String>)> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(csv_error(path))?;
    let headers = reader.headers().map_err(csv_error(path))?.clone();
    let label_idx = headers.iter().position(|h| h == label_col).ok_or_else(|| {
        CliError::input(format!("{}: label column '{label_col}' not found", path.display()))
    })?;
    if headers.len() < 2 {
        return Err(CliError::input(format!("{}: no coordinate columns", path.display())));
    }
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(csv_error(path))?;
        let mut row = Vec::with_capacity(headers.len() - 1);
        for (c, field) in record.iter().enumerate() {
            if c == label_idx {
                labels.push(field.to_string());
            } else {
                row.push(parse_number(path, field, r + 1, &headers[c])?);
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::input(format!("{}: no observations", path.display())));
    }
    Ok((rows, labels))
}

pub fn read_distance_matrix(path: &Path) -> Result<DistanceMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(csv_error(path))?;
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(csv_error(path))?;
        let row = record
            .iter()
            .enumerate()
            .map(|(c, f)| parse_number(path, f, r + 1, &(c + 1).to_string()))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if let Some((r, row)) = rows.iter().enumerate().find(|(_, row)| row.len() != rows.len()) {
        return Err(CliError::input(format!(
            "{}: distance matrix must be square: {} rows but row {} has {} entries",
            path.display(),
            rows.len(),
            r + 1,
            row.len()
        )));
    }
    DistanceMatrix::from_rows(rows).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

pub fn read_labels(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    Ok(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect())
}

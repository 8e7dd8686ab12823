use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use clap::ValueEnum;
use serde::Serialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// `--out` file, or stdout when absent.
pub fn open(out: Option<&Path>) -> Result<Box<dyn Write>> {
    match out {
        Some(p) => {
            let f = File::create(p).map_err(|source| CliError::Io { path: p.to_path_buf(), source })?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(BufWriter::new(io::stdout()))),
    }
}

fn write_failed(e: impl std::fmt::Display) -> CliError {
    CliError::Output(e.to_string())
}

pub fn write_json(out: Option<&Path>, doc: &impl Serialize) -> Result<()> {
    let mut w = open(out)?;
    serde_json::to_writer_pretty(&mut w, doc).map_err(write_failed)?;
    writeln!(w).map_err(write_failed)?;
    w.flush().map_err(write_failed)
}

pub fn write_csv(out: Option<&Path>, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(open(out)?);
    w.write_record(header).map_err(write_failed)?;
    for row in rows {
        w.write_record(row).map_err(write_failed)?;
    }
    w.flush().map_err(write_failed)
}

pub fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

//! Command-line front end for the `kgraph` K-sample tests.
//!
//! Subcommands:
//!
//! * `test`: run graph-based K-sample tests on a feature or distance CSV;
//! * `diag`: graph condition statistics, covariance ranks and standardized
//!   edge counts;
//! * `power`: Monte Carlo rejection rates over a separation sweep;
//! * `qq`: null statistic quantiles against chi-square quantiles;
//! * `generate`: write one simulated dataset as a feature CSV.
//!
//! Exit codes: 0 on success (whatever the test decision), 2 for input
//! errors, 3 for numerical or degeneracy failures.

pub mod diag;
pub mod error;
pub mod input;
pub mod output;
pub mod scenario;
pub mod test_cmd;

use clap::{Parser, Subcommand};

pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "kgraph", version, about = "Graph-based K-sample tests of distributional equality")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test whether all groups share one distribution.
    Test(test_cmd::TestArgs),
    /// Report graph and covariance diagnostics for an input.
    Diag(diag::DiagArgs),
    /// Estimate rejection rates on simulated scenarios.
    Power(scenario::PowerArgs),
    /// Emit null quantile pairs for QQ plots.
    Qq(scenario::QqArgs),
    /// Write a simulated dataset as a feature CSV.
    Generate(scenario::GenerateArgs),
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Test(a) => test_cmd::cmd_test(a),
        Command::Diag(a) => diag::cmd_diag(a),
        Command::Power(a) => scenario::cmd_power(a),
        Command::Qq(a) => scenario::cmd_qq(a),
        Command::Generate(a) => scenario::cmd_generate(a),
    }
}

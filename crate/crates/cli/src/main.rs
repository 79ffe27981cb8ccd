//! Command-line front end for the geographically weighted modelling library.
//!
//! Every subcommand reads a CSV with a header row, runs one model, and writes
//! a deterministic CSV or GeoJSON result. Exit codes: 0 on success, 1 on a
//! validation problem (bad flags, malformed input, unknown columns), 2 on a
//! numerical failure inside a model (singular fits, degenerate windows).

mod commands;
mod config;
mod input;
mod table;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use gw_core::GwError;

use config::Flags;

#[derive(Parser)]
#[command(
    name = "gw",
    version,
    about = "Geographically weighted modelling: local summary statistics, PCA, and regression"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Export the pairwise distance matrix of the input locations
    Dist(Flags),
    /// Local (geographically weighted) summary statistics
    Gwss(Flags),
    /// Locally weighted principal component analysis
    Gwpca(Flags),
    /// Local regression, with optional robust refitting
    Gwr(Flags),
    /// Forward stepwise variable selection for local regression
    GwrSelect(Flags),
    /// Locally compensated ridge regression
    GwrLcr(Flags),
    /// Local collinearity diagnostics
    GwrCollin(Flags),
    /// Out-of-sample prediction from a calibrated local regression
    GwrPredict(Flags),
}

/// Error carrying the process exit code alongside the message.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        CliError {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<GwError> for CliError {
    fn from(e: GwError) -> Self {
        CliError {
            code: exit_code_for(&e),
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::validation(format!("i/o failure: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::validation(format!("csv failure: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Maps model errors to exit codes: conditions arising from the numbers
/// themselves are 2, everything reachable by mis-specifying the run is 1.
fn exit_code_for(e: &GwError) -> u8 {
    use GwError::*;
    match e {
        AllScoresNonFinite
        | ZeroWeightSum
        | ZeroMean
        | DegenerateSubset
        | AiccUndefined { .. }
        | DegenerateLocalDistribution(_)
        | SingularLocalCovariance { .. }
        | SingularLocalFit { .. }
        | TooFewAfterFilter { .. }
        | ZeroNormColumn { .. }
        | SingularCorrelationMatrix { .. }
        | InsufficientLocalData { .. } => 2,
        AtLocation { source, .. } => exit_code_for(source),
        _ => 1,
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let (flags, runner): (Flags, fn(&config::Resolved) -> CliResult<()>) = match cli.command {
        Command::Dist(f) => (f, commands::dist),
        Command::Gwss(f) => (f, commands::gwss),
        Command::Gwpca(f) => (f, commands::gwpca),
        Command::Gwr(f) => (f, commands::gwr),
        Command::GwrSelect(f) => (f, commands::gwr_select),
        Command::GwrLcr(f) => (f, commands::gwr_lcr),
        Command::GwrCollin(f) => (f, commands::gwr_collin),
        Command::GwrPredict(f) => (f, commands::gwr_predict),
    };
    let resolved = config::resolve(flags)?;
    if let Some(t) = resolved.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::validation(format!("cannot configure thread pool: {e}")))?;
    }
    runner(&resolved)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

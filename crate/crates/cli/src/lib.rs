//! Command-line front end for the ordinal bounds library.
//!
//! Exit codes: 0 on success, 1 for usage problems, 2 for unreadable or
//! invalid input data, 3 for numerical failures (including an oracle check
//! that finds a disagreement). Results go to stdout as a single JSON
//! document; errors go to stderr as `{"error":{"kind","message"}}`.

pub mod commands;
pub mod io;
pub mod report;

use clap::{Args, Parser, Subcommand};
use commands::DesignArg;
use std::ffi::OsString;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(
    name = "ordibound",
    version,
    about = "Sharp bounds on the relative treatment effect for ordinal outcomes"
)]
pub struct Cli {
    /// Pretty-print the JSON output.
    #[arg(long, global = true)]
    pub pretty: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the sharp bounds and the independence value from two marginals.
    Bounds(MarginalArgs),
    /// Construct and validate couplings that attain both bounds.
    Attain(MarginalArgs),
    /// Estimate bounds from unit-level data under a chosen design.
    Estimate(EstimateArgs),
    /// Bootstrap confidence interval covering the identified set.
    Ci(CiArgs),
    /// Cross-check the closed-form bounds against the transportation oracle
    /// on random marginal pairs.
    OracleCheck(OracleCheckArgs),
}

/// One marginal pair, provided as probabilities, counts, or a count file.
#[derive(Debug, Args)]
pub struct MarginalArgs {
    /// Treated-arm probabilities, comma separated (with --control-probs).
    #[arg(long, value_name = "P,P,...")]
    pub treated_probs: Option<String>,
    /// Control-arm probabilities, comma separated.
    #[arg(long, value_name = "P,P,...")]
    pub control_probs: Option<String>,
    /// Treated-arm counts, comma separated (with --control-counts).
    #[arg(long, value_name = "N,N,...")]
    pub treated_counts: Option<String>,
    /// Control-arm counts, comma separated.
    #[arg(long, value_name = "N,N,...")]
    pub control_counts: Option<String>,
    /// File with one `treated:` and one `control:` line of counts.
    #[arg(long, value_name = "PATH")]
    pub counts_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Unit-level CSV with columns `z`, `y`, and numeric covariates.
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    /// Estimation design.
    #[arg(long, value_enum)]
    pub design: DesignArg,
    /// Number of outcome categories; inferred from the data when omitted.
    #[arg(long, value_name = "J")]
    pub categories: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CiArgs {
    /// Unit-level CSV with columns `z`, `y`, and numeric covariates.
    #[arg(long, value_name = "PATH")]
    pub data: Option<PathBuf>,
    /// File with one `treated:` and one `control:` line of counts.
    #[arg(long, value_name = "PATH")]
    pub counts_file: Option<PathBuf>,
    /// Estimation design.
    #[arg(long, value_enum, default_value = "cre")]
    pub design: DesignArg,
    /// Two-sided miscoverage level.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Number of bootstrap replicates.
    #[arg(long, default_value_t = 2000, value_name = "B")]
    pub boot: usize,
    /// Seed for the bootstrap resampling streams.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of outcome categories; inferred from the data when omitted.
    #[arg(long, value_name = "J")]
    pub categories: Option<usize>,
}

#[derive(Debug, Args)]
pub struct OracleCheckArgs {
    /// Number of random marginal pairs to test.
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Categories are drawn uniformly from 2 up to this many.
    #[arg(long, default_value_t = 8, value_name = "J")]
    pub max_categories: usize,
    /// Seed for the trial generator.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Caps the rayon pool when ORDIBOUND_THREADS is a positive integer. A pool
/// that is already built (tests share one process) is left alone.
fn init_thread_pool() {
    if let Ok(value) = std::env::var("ORDIBOUND_THREADS") {
        if let Ok(threads) = value.trim().parse::<usize>() {
            if threads > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
            }
        }
    }
}

/// Parses the arguments, runs the subcommand, prints, and returns the exit
/// code. `args` must include the program name.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return code;
        }
    };
    init_thread_pool();
    match commands::dispatch(&cli) {
        Ok(out) => {
            println!("{}", out.stdout);
            if let Some(message) = out.stderr {
                eprintln!("{message}");
            }
            out.exit_code
        }
        Err(err) => {
            eprintln!("{}", err.to_stderr_json());
            err.exit_code()
        }
    }
}

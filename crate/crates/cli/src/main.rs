//! `shopform`: build datasets, solve instances, evaluate candidate
//! formulations and render reports.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | internal error |
//! | 2 | usage error or invalid configuration |
//! | 3 | file system error |
//! | 4 | input file does not parse |
//! | 5 | limit reached before any schedule was found |
//! | 6 | instance is infeasible |
//! | 7 | dataset directory has no manifest |
//! | 8 | generator adapter failed |

mod commands;
mod store;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Code {
    Internal = 1,
    Usage = 2,
    Io = 3,
    Parse = 4,
    NoIncumbent = 5,
    Infeasible = 6,
    MissingManifest = 7,
    Adapter = 8,
}

/// An error with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: Code,
    pub error: anyhow::Error,
}

pub type CmdResult = Result<(), Failure>;

pub trait WithCode<T> {
    fn code(self, code: Code) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> WithCode<T> for Result<T, E> {
    fn code(self, code: Code) -> Result<T, Failure> {
        self.map_err(|e| Failure { code, error: e.into() })
    }
}

#[derive(Parser)]
#[command(name = "shopform", version, about = "Job-shop formulation dataset, solver and evaluation harness")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate instances, descriptions, reference bundles and modular pairs.
    Dataset(DatasetArgs),
    /// Solve an instance file and print the schedule.
    Solve(SolveArgs),
    /// Evaluate candidate formulations against a dataset.
    Evaluate(EvaluateArgs),
    /// Render a metrics table from an outcomes file.
    Report(ReportArgs),
    /// Write fault-injected copies of a dataset's reference bundles.
    Mutate(MutateArgs),
}

#[derive(Args, Clone)]
pub struct LimitArgs {
    /// Per-instance solver time limit in seconds.
    #[arg(long, default_value_t = 5.0)]
    pub time_limit: f64,
    /// Per-instance node limit; makes cut-off runs reproducible.
    #[arg(long)]
    pub node_limit: Option<u64>,
}

#[derive(Args)]
pub struct DatasetArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub count: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// JSON array of scenario specs; defaults to the built-in mix.
    #[arg(long)]
    pub mix: Option<PathBuf>,
    #[arg(long, default_value = "dataset")]
    pub out: PathBuf,
    #[command(flatten)]
    pub limits: LimitArgs,
}

#[derive(Args)]
pub struct SolveArgs {
    pub instance: PathBuf,
    #[command(flatten)]
    pub limits: LimitArgs,
    /// Write a Gantt chart of the schedule as SVG.
    #[arg(long)]
    pub gantt: Option<PathBuf>,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Directory of `<id>.json`, `<id>.txt` or `<id>.script` candidates.
    #[arg(long, conflicts_with = "adapter", required_unless_present = "adapter")]
    pub candidates: Option<PathBuf>,
    /// JSON adapter config; candidates are requested from the generator.
    #[arg(long)]
    pub adapter: Option<PathBuf>,
    /// Command that runs `.script` candidates; the script path is appended.
    #[arg(long)]
    pub runner: Option<String>,
    #[arg(long, default_value_t = 60.0)]
    pub runner_timeout: f64,
    #[arg(long, default_value = "evaluation")]
    pub out: PathBuf,
    #[arg(long, default_value = "candidate")]
    pub label: String,
    /// Override the solver limits recorded in the dataset manifest.
    #[arg(long)]
    pub time_limit: Option<f64>,
    #[arg(long)]
    pub node_limit: Option<u64>,
}

#[derive(Args)]
pub struct ReportArgs {
    /// An evaluation directory or an outcomes file.
    pub input: PathBuf,
    /// JSON map of module tag to token batch, for the per-module loss.
    #[arg(long)]
    pub losses: Option<PathBuf>,
    #[arg(long, default_value = "candidate")]
    pub label: String,
    /// Also write report.txt and report.json here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum MutationKind {
    ObjectiveSwap,
    DropSolve,
    CorruptBytes,
}

#[derive(Args)]
pub struct MutateArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum)]
    pub kind: MutationKind,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Dataset(a) => commands::dataset(a),
        Cmd::Solve(a) => commands::solve(a),
        Cmd::Evaluate(a) => commands::evaluate(a),
        Cmd::Report(a) => commands::report(a),
        Cmd::Mutate(a) => commands::mutate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code as u8)
        }
    }
}

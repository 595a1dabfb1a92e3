mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dse_core::learn::EngineMode;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config, or input files (exit 1).
    Usage(String),
    /// A broken internal invariant (exit 2).
    Internal(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "dse", version, about = "Dynamic symbolic execution workbench for MiniC")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run one heuristic for a number of trials and write the reports.
    Run(RunArgs),
    /// Learn parametric heuristic weights for a program.
    Learn(LearnArgs),
    /// Compare heuristics over repeated trials.
    Compare(CompareArgs),
    /// List the most positive and negative weights of a learned parameter file.
    ReportFeatures(ReportArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Concolic,
    Egt,
}

impl From<ModeArg> for EngineMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Concolic => EngineMode::Concolic,
            ModeArg::Egt => EngineMode::Egt,
        }
    }
}

#[derive(Args, Debug, Default)]
pub struct Common {
    /// JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Executions (concolic) or selection iterations (egt) per run.
    #[arg(long)]
    pub budget: Option<u64>,
    /// Wall-clock seconds per EGT run instead of an iteration budget.
    #[arg(long)]
    pub seconds: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// builtin or external (command taken from DSE_SOLVER_CMD).
    #[arg(long)]
    pub solver: Option<String>,
    #[arg(long)]
    pub domain_bits: Option<u8>,
    /// Instructions per execution (concolic) or per state (egt).
    #[arg(long)]
    pub step_limit: Option<u64>,
    #[arg(long)]
    pub parallelism: Option<usize>,
    /// Start concolic runs from seeded random inputs (default) or all zeros.
    #[arg(long)]
    pub random_initial: Option<bool>,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    pub program: PathBuf,
    #[arg(long)]
    pub heuristic: Option<String>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Also write coverage curves as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct LearnArgs {
    pub program: PathBuf,
    /// Samples per Find phase.
    #[arg(long)]
    pub n: Option<usize>,
    /// Shortlist size.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub check_trials: Option<usize>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Iteration log (JSON lines); defaults next to the output.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[arg(required = true)]
    pub programs: Vec<PathBuf>,
    /// Heuristic to include; repeat for each.
    #[arg(long = "heuristic", short = 'H')]
    pub heuristics: Vec<String>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    pub theta: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub top_k: usize,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = std::panic::catch_unwind(|| commands::dispatch(cli));
    match outcome {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("dse: {e}");
            ExitCode::from(match e {
                CliError::Usage(_) => 1,
                CliError::Internal(_) => 2,
            })
        }
        Err(_) => {
            eprintln!("dse: internal error: invariant violated");
            ExitCode::from(2)
        }
    }
}

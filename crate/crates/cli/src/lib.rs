//! Command-line front end: configuration, dispatch and reproducible artifacts.
//!
//! Exit codes are 0 on pass, 1 when a run completes but one of its checks
//! fails, and 2 on configuration or usage errors.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use qbsde_core::Error;

pub use config::ExperimentConfig;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Core(Error),
    /// The run finished but a check did not pass.
    Assertion(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Assertion(m) => write!(f, "check failed: {m}"),
        }
    }
}

fn is_configuration(e: &Error) -> bool {
    match e {
        Error::InvalidParameter(_) | Error::Dimension(_) | Error::UnknownName { .. } => true,
        Error::Stage { source, .. } => is_configuration(source),
        _ => false,
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Core(e) if is_configuration(e) => 2,
            CliError::Core(_) | CliError::Assertion(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "qbsde", version, about = "Solve and verify one-dimensional quadratic BSDEs")]
pub struct Cli {
    /// Worker threads (0 uses every core). Results do not depend on this.
    #[arg(long, global = true, env = "QBSDE_THREADS", default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the growth and regularity bounds of a registry driver.
    CheckDriver(CheckDriverArgs),
    /// Solve the semilinear PDE for the configured driver and terminal condition.
    Solve(SolveArgs),
    /// Run the truncation schedule and report one record per level.
    Kobylanski(RunArgs),
    /// Build or check f-subharmonic test functions.
    #[command(subcommand)]
    Subharmonic(SubharmonicCommand),
    /// Run the f-martingale test against a candidate process.
    Check(CheckArgs),
    /// Sweep coupling rules and write the coupling table.
    Couple(CoupleArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// JSONL destination; overrides `outputs.jsonl`, default stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckDriverArgs {
    #[arg(long)]
    pub driver: String,
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 2000)]
    pub budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 3.0)]
    pub y_bound: f64,
    #[arg(long, default_value_t = 5.0)]
    pub z_bound: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Write `t,x,u,u_x` for the whole grid.
    #[arg(long)]
    pub dump_grid: Option<PathBuf>,
    /// Truncate the driver at this radius before solving.
    #[arg(long)]
    pub k: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Per-time drift table; overrides `outputs.csv`.
    #[arg(long)]
    pub drift_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CoupleArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Coupling table; overrides `outputs.csv`, default stdout.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum SubharmonicCommand {
    /// Construct a test function at a base point and certify its domain.
    Construct(ConstructArgs),
    /// Check a stored test function.
    Check(PhiCheckArgs),
}

#[derive(Debug, Args)]
pub struct DriverArgs {
    #[arg(long, default_value = "quadratic:gamma=1")]
    pub driver: String,
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
}

#[derive(Debug, Args)]
pub struct ConstructArgs {
    #[command(flatten)]
    pub driver: DriverArgs,
    #[arg(long, default_value_t = 0.5)]
    pub t: f64,
    /// Comma-separated, length `d`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x: Vec<f64>,
    /// Comma-separated, length `n`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub y: Vec<f64>,
    /// Comma-separated row-major `n x d`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub z: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub i0: usize,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub sign: f64,
    #[arg(long, default_value_t = 0.5)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.25)]
    pub r_y: f64,
    /// Build the `x`-independent variant (`n = 1`).
    #[arg(long)]
    pub x_free: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PhiCheckArgs {
    #[command(flatten)]
    pub driver: DriverArgs,
    /// A JSON record written by `subharmonic construct`.
    #[arg(long, conflicts_with = "exp_ybound")]
    pub record: Option<PathBuf>,
    /// Check the exponential test function on `|y| <= bound`.
    #[arg(long)]
    pub exp_ybound: Option<f64>,
    #[arg(long, default_value_t = 64)]
    pub budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `argv` (including the program name), runs the command and returns
/// the exit code.
pub fn run_command<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("cannot start {} worker threads: {e}", cli.threads);
            return 2;
        }
    };
    match pool.install(|| commands::dispatch(&cli.command)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("qbsde: {e}");
            e.exit_code()
        }
    }
}

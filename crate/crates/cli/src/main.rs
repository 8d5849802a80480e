//! `ris`: run viscous solves, vanishing-viscosity sweeps, verification
//! experiments and load optimization from a TOML scenario file.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 1,
        }
    }
}

impl From<ris_core::Error> for CliError {
    fn from(e: ris_core::Error) -> Self {
        match e {
            ris_core::Error::NumericalFailure { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "ris",
    version,
    about = "Vanishing-viscosity solver for history-dependent rate-independent systems"
)]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Viscosity; overrides `viscosity.epsilon`.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// One viscous solve at `viscosity.epsilon`.
    Solve(Common),
    /// Solves along the viscosity schedule and certifies the finest level.
    Sweep(Common),
    /// Runs one verification experiment.
    Verify {
        experiment: Experiment,
        #[command(flatten)]
        common: Common,
    },
    /// Fits load coefficients to the control target.
    Optimize(Common),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Experiment {
    Compat,
    Bounds,
    Lipschitz,
    Unique,
    Dual,
    History,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(CliError::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Solve(c) => commands::solve(&commands::Run::load(&c)?),
        Command::Sweep(c) => commands::sweep(&commands::Run::load(&c)?),
        Command::Verify { experiment, common } => commands::verify(&commands::Run::load(&common)?, experiment),
        Command::Optimize(c) => commands::optimize(&commands::Run::load(&c)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

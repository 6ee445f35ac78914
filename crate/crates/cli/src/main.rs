//! `geohydro`: batch front end for the integrable-geodesic-flow laboratory.
//!
//! Exit codes: 0 success, 2 input error, 3 numerical halt.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use geohydro_core::Error;

use crate::config::{RunConfig, Verbosity};
use crate::output::Output;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numerical(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Core(e) => match e {
                Error::Config(_)
                | Error::Parse(_)
                | Error::Io(_)
                | Error::Csv(_)
                | Error::Json(_)
                | Error::InvalidMask(_)
                | Error::MissingField(_)
                | Error::EmptySystem
                | Error::Dimension(_)
                | Error::InvalidGrid(_)
                | Error::GridMismatch(_) => 2,
                _ => 3,
            },
        }
    }
}

#[derive(Parser)]
#[command(name = "geohydro", version, about = "Integrable geodesic flows via hydrodynamic-type systems")]
struct Cli {
    /// Directory for reports and data files.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Seed for randomized controls.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Only errors on stderr, nothing on stdout.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the quasi-linear system for degree N (text and JSON).
    Derive {
        #[arg(long)]
        degree: usize,
        /// Comma-separated indices k with a_k ≡ 0.
        #[arg(long)]
        zero: Option<String>,
    },
    /// Residuals of the system for fields g12.csv, a_k.csv in a directory.
    Verify {
        #[arg(long)]
        fields: PathBuf,
        #[arg(long)]
        degree: usize,
        #[arg(long)]
        zero: Option<String>,
    },
    /// Evolve (a, b) and report conservation drifts.
    Evolve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Riemann invariants and characteristic velocities of the initial data.
    Invariants {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evolve, reconstruct the metric and write it in the Chebyshev-type chart.
    Reconstruct {
        #[arg(long)]
        config: PathBuf,
    },
    /// Integrate geodesics of a metric directory written by `reconstruct`.
    Geodesic {
        #[arg(long)]
        metric: PathBuf,
        /// CSV with header x1,x2,p1,p2.
        #[arg(long)]
        initial: PathBuf,
        #[arg(long)]
        t_end: f64,
        #[arg(long, default_value_t = config::default_dt())]
        dt: f64,
        /// Write every n-th sample.
        #[arg(long, default_value_t = 1)]
        every: usize,
    },
    /// Evolve → invariants → reconstruct → integral → geodesics, one report.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
    },
}

fn init_logging(quiet: bool, verbosity: Option<Verbosity>) {
    let level = match (quiet, verbosity) {
        (true, _) | (false, Some(Verbosity::Quiet)) => log::LevelFilter::Error,
        (false, Some(Verbosity::Debug)) => log::LevelFilter::Debug,
        _ => log::LevelFilter::Info,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .try_init();
}

fn run(cli: Cli) -> Result<(), CliError> {
    let default_dir = || PathBuf::from("geohydro-out");
    let loaded = match &cli.command {
        Command::Evolve { config }
        | Command::Invariants { config }
        | Command::Reconstruct { config }
        | Command::Pipeline { config } => Some(RunConfig::load(config)),
        _ => None,
    };
    let loaded = match loaded {
        Some(Err(e)) => {
            init_logging(cli.quiet, None);
            return Err(e);
        }
        Some(Ok(c)) => Some(c),
        None => None,
    };
    let cfg_ref = loaded.as_ref().map(|c| &c.0);
    init_logging(cli.quiet, cfg_ref.and_then(|c| c.verbosity));
    let quiet = cli.quiet || cfg_ref.and_then(|c| c.verbosity) == Some(Verbosity::Quiet);
    let dir = cli
        .output_dir
        .clone()
        .or_else(|| cfg_ref.and_then(|c| c.output_dir.clone()))
        .unwrap_or_else(default_dir);
    let out = Output::new(dir, quiet)?;
    let seed = cli.seed.or_else(|| cfg_ref.and_then(|c| c.seed)).unwrap_or(0);

    match (cli.command, loaded) {
        (Command::Derive { degree, zero }, _) => commands::derive(&out, degree, zero.as_deref()),
        (Command::Verify { fields, degree, zero }, _) => commands::verify(&out, &fields, degree, zero.as_deref()),
        (Command::Evolve { .. }, Some((cfg, base))) => commands::evolve(&out, &cfg, &base),
        (Command::Invariants { .. }, Some((cfg, base))) => commands::invariants(&out, &cfg, &base),
        (Command::Reconstruct { .. }, Some((cfg, base))) => commands::reconstruct(&out, &cfg, &base),
        (Command::Geodesic { metric, initial, t_end, dt, every }, _) => {
            commands::geodesic(&out, &metric, &initial, t_end, dt, every)
        }
        (Command::Pipeline { .. }, Some((cfg, base))) => commands::pipeline(&out, &cfg, &base, seed),
        _ => unreachable!("config-driven commands always load a config"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            if !log::log_enabled!(log::Level::Error) {
                eprintln!("error: {e}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}

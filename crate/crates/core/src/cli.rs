//! Command-line front end.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands;
use crate::config::{parse_config, LoadedConfig};
use crate::error::Error;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_RUNTIME: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "ballistic",
    version,
    about = "Stochastic rigid-body simulations"
)]
pub struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate trajectories of the configured model.
    Simulate,
    /// Ensemble mean and mean squared displacement.
    Ensemble,
    /// Statistics report: exponent, correlations, histogram, flights.
    Stats,
    /// Potential landscape and critical points of a dipole ring.
    ScanPotential,
    /// Regenerate the data behind a named figure.
    ReproduceFigure { name: String },
    /// Parse and validate a config, printing its canonical form.
    Validate { path: PathBuf },
}

enum Failure {
    Config(Error),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse(_) | Error::Validation(_) | Error::UnknownFigure(_) => Failure::Config(e),
            e => Failure::Runtime(e),
        }
    }
}

fn load(path: Option<&PathBuf>) -> Result<LoadedConfig, Failure> {
    let path =
        path.ok_or_else(|| Failure::Config(Error::Validation("--config is required".into())))?;
    parse_config(path).map_err(Failure::Config)
}

fn dispatch(cli: Cli) -> Result<Vec<String>, Failure> {
    let out = cli.out.as_deref();
    let seed = cli.seed;
    let run = |f: Box<dyn FnOnce() -> crate::Result<Vec<String>> + Send>| {
        commands::with_workers(cli.workers, f)
    };
    Ok(match &cli.command {
        Command::Simulate => {
            let l = load(cli.config.as_ref())?;
            run(Box::new(move || commands::simulate(l, seed, out)))?
        }
        Command::Ensemble => {
            let l = load(cli.config.as_ref())?;
            run(Box::new(move || commands::ensemble(l, seed, out)))?
        }
        Command::Stats => {
            let l = load(cli.config.as_ref())?;
            run(Box::new(move || commands::stats(l, seed, out)))?
        }
        Command::ScanPotential => {
            let l = cli.config.as_ref().map(|p| load(Some(p))).transpose()?;
            run(Box::new(move || commands::scan_potential(l, out)))?
        }
        Command::ReproduceFigure { name } => {
            if !commands::FIGURES.contains(&name.as_str()) {
                return Err(Failure::Config(Error::UnknownFigure(name.clone())));
            }
            let dir = out
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("out"));
            let name = name.clone();
            run(Box::new(move || {
                commands::reproduce_figure(&name, seed.unwrap_or(0), &dir)
            }))?
        }
        Command::Validate { path } => {
            let l = parse_config(path).map_err(Failure::Config)?;
            println!("{}", commands::validate(&l)?);
            Vec::new()
        }
    })
}

/// Entry point used by the binary.
pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("BALLISTIC_LOG", "warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(files) => {
            for f in files {
                log::info!("wrote {f}");
            }
            ExitCode::SUCCESS
        }
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

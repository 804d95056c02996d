//! Command-line driver: configuration, subcommands and experiment presets.

pub mod commands;
pub mod config;
pub mod experiments;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use geotomo::GeoError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Geo(GeoError::Usage(_) | GeoError::Format(_)) => 2,
            CliError::Geo(GeoError::Trapped(_)) => 3,
            _ => 1,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Geo(e) => match e {
                GeoError::Domain(_) => "domain",
                GeoError::Usage(_) => "usage",
                GeoError::Trapped(_) => "trapped",
                GeoError::GeometryInconsistency { .. } => "geometry",
                GeoError::NotApplicable(_) => "not-applicable",
                GeoError::UndefinedNorm => "undefined-norm",
                GeoError::Format(_) => "format",
                GeoError::Io(_) => "io",
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "geotomo", version, about = "Geodesic X-ray transforms and their inversion on surfaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Transform {
    I0,
    I1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormulaArg {
    Frc,
    Hrc,
}

impl From<FormulaArg> for geotomo::Formula {
    fn from(f: FormulaArg) -> Self {
        match f {
            FormulaArg::Frc => geotomo::Formula::Frc,
            FormulaArg::Hrc => geotomo::Formula::Hrc,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Experiment {
    Cpc,
    Cnc,
    NonsimpleEquator,
    Exp1,
    Exp2,
    Exp3,
    TerminatorSweep,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Common {
    /// Run configuration file.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `io.out_dir`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render the configured phantom to a grid file.
    Phantom(Common),
    /// Dump geodesics launched from a coarse influx grid.
    Geodesics(Common),
    /// Compute fan-beam data of the phantom.
    Forward {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        transform: Transform,
    },
    /// Reconstruct from data (`io.data`) or from synthetic phantom data.
    Invert {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        formula: FormulaArg,
        /// Overrides `solver.iterations`.
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Terminator value over a sweep of lens strengths.
    Terminator {
        /// Domain, lens width and center; the unit disk with sigma 0.25 otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        k_min: f64,
        #[arg(long)]
        k_max: f64,
        #[arg(long)]
        k_steps: usize,
    },
    /// Check whether the manifold is free of beta-conjugate points.
    Simplicity {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        beta: f64,
    },
    /// Run a preset experiment and write a manifest.
    Reproduce {
        #[arg(long, value_enum)]
        experiment: Experiment,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        /// Grid size; each experiment has its own default.
        #[arg(long)]
        n: Option<usize>,
        /// Worker threads, 0 for all available.
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Errors go to stderr as `geotomo: error[tag]: msg`.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                eprintln!("geotomo: error[usage]: invalid command line");
                return 2;
            }
            return 0;
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("geotomo: error[{}]: {msg}", e.tag());
            e.exit_code()
        }
    }
}

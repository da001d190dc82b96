//! `moyal` command-line driver.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success (converged fit) |
//! | 1 | runtime or I/O failure |
//! | 2 | configuration or expression error |
//! | 3 | divergent trace |
//! | 4 | spectrum unbounded below |
//! | 5 | continuous spectrum suspected |
//! | 6 | unresolved spectral peaks (outputs still written) |

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod expr;
pub mod output;

pub use config::{Format, RouteName, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) | CliError::Io(_) => 1,
        }
    }
}

impl From<moyal_core::Error> for CliError {
    fn from(e: moyal_core::Error) -> Self {
        use moyal_core::Error as E;
        match e {
            E::InvalidGrid(_) | E::InvalidParameter(_) | E::Unsupported(_) | E::StencilTooWide { .. } => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "moyal", version, about = "Star products, star exponentials and ground-state energies on phase space")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Star product of two expressions in x and p.
    StarProd {
        #[command(flatten)]
        common: Common,
        /// Left factor (overrides star_prod.f).
        #[arg(long)]
        f: Option<String>,
        /// Right factor (overrides star_prod.g).
        #[arg(long)]
        g: Option<String>,
    },
    /// Star exponential Exp⋆(−τH/ħ) at star_exp.tau.
    StarExp {
        #[command(flatten)]
        common: Common,
        /// Also write the Hamiltonian's operator kernel.
        #[arg(long)]
        dump_kernel: bool,
    },
    /// Partition trace and ground-state energy fit.
    GroundEnergy {
        #[command(flatten)]
        common: Common,
    },
    /// Peaks of the Fourier-transformed real-time trace.
    Spectrum {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    #[arg(long, value_enum)]
    pub route: Option<RouteName>,
    /// Compare against the position-space oracle (or the other product route).
    #[arg(long)]
    pub verify: bool,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

impl Common {
    /// Loads the config file and applies command-line overrides.
    pub fn load(&self) -> Result<RunConfig, CliError> {
        let mut c = RunConfig::load(&self.config)?;
        if self.route.is_some() {
            c.route = self.route;
        }
        c.verify |= self.verify;
        if let Some(o) = &self.out {
            c.output.dir = o.clone();
        }
        if let Some(f) = self.format {
            c.output.format = f;
        }
        Ok(c)
    }
}

/// Result of a successful command: exit code and lines for stdout.
#[derive(Debug)]
pub struct Report {
    pub code: u8,
    pub lines: Vec<String>,
}

pub fn run(cli: &Cli) -> Result<Report, CliError> {
    match &cli.command {
        Command::StarProd { common, f, g } => commands::star_prod(&common.load()?, f.as_deref(), g.as_deref()),
        Command::StarExp { common, dump_kernel } => commands::star_exp(&common.load()?, *dump_kernel),
        Command::GroundEnergy { common } => commands::ground_energy(&common.load()?),
        Command::Spectrum { common } => commands::spectrum(&common.load()?),
    }
}

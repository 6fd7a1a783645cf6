//! `gluing`: command-line driver for the Delaunay gluing numerics.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gluing::GluingError;
use thiserror::Error;

use config::{Overrides, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Param(String),
    #[error("{0}")]
    Solver(String),
    #[error("{0}")]
    Io(String),
}

impl From<GluingError> for CliError {
    fn from(e: GluingError) -> Self {
        if e.is_parameter_error() {
            CliError::Param(e.to_string())
        } else {
            CliError::Solver(e.to_string())
        }
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Param(_) => 2,
            CliError::Solver(_) | CliError::Io(_) => 1,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "gluing", version, about = "Delaunay-end gluing numerics")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Dimension n (3..=6 for most commands).
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Neck parameter(s), comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// Exponent s in r_eps = eps^s.
    #[arg(long, global = true)]
    s: Option<f64>,
    /// Override for delta_1 (delta_4 follows it).
    #[arg(long, global = true)]
    delta1: Option<f64>,
    /// Largest radial step in log rho.
    #[arg(long, global = true)]
    step: Option<f64>,
    /// Output directory.
    #[arg(long, global = true, env = "GLUING_OUT")]
    out: Option<PathBuf>,
    /// Command tolerance (orbit Hamiltonian, kernel, match residual, Picard increment).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Seed for randomized sampling.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Flat JSON file with any of the keys above; flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate the Fowler orbit and write the radial profiles.
    Delaunay {
        /// Report the leading-term error ratios on [eps^2, 1].
        #[arg(long)]
        verify_prop22: bool,
        #[arg(long)]
        svg: bool,
    },
    /// Spectrum of Delta + n on a product of spheres.
    Spectrum {
        #[arg(long, default_value = "s2xs2")]
        family: String,
        /// Curvature of the first factor.
        #[arg(long)]
        k1: Option<f64>,
        /// Curvature of the second factor (instead of --k1).
        #[arg(long, conflicts_with = "k1")]
        k2: Option<f64>,
        #[arg(long, default_value_t = 24)]
        count: usize,
        /// Also list the degenerate curvatures up to this degree.
        #[arg(long)]
        degenerate_set: Option<u32>,
    },
    /// Solve the matching equations for a preset of data functionals.
    Match {
        /// zero, constant, synthetic or delaunay.
        #[arg(long, default_value = "synthetic")]
        preset: String,
        /// Multiply every functional.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        /// Multiply H_0 only.
        #[arg(long, default_value_t = 1.0)]
        h0_scale: f64,
    },
    /// Picard iteration for the flat interior problem.
    Interior {
        /// Boundary coefficient as a multiple of r_eps^(2+d-n/2-delta1).
        #[arg(long, default_value_t = 0.02)]
        coef: f64,
        #[arg(long, default_value_t = 2)]
        degree: u32,
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// Translation a, comma separated.
        #[arg(long, value_delimiter = ',')]
        a: Option<Vec<f64>>,
        #[arg(long)]
        periods: Option<f64>,
        #[arg(long)]
        svg: bool,
    },
    /// Weighted norm of |x|^mu across radii.
    Norms {
        #[arg(long, default_value_t = 1.1)]
        mu: f64,
        #[arg(long, default_value_t = 0)]
        k: usize,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, value_delimiter = ',', default_value = "0.2,0.1,0.05")]
        radii: Vec<f64>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Delaunay { .. } => "delaunay",
            Command::Spectrum { .. } => "spectrum",
            Command::Match { .. } => "match",
            Command::Interior { .. } => "interior",
            Command::Norms { .. } => "norms",
        }
    }
}

fn run(cli: Cli) -> Result<i32, CliError> {
    let c = cli.common;
    let flags = Overrides {
        n: c.n,
        eps: c.eps,
        s: c.s,
        delta1: c.delta1,
        step: c.step,
        out: c.out,
        tol: c.tol,
        seed: c.seed,
    };
    let cfg = RunConfig::load(
        cli.command.name(),
        c.config.as_deref(),
        flags,
        PathBuf::from("."),
    )?;
    match cli.command {
        Command::Delaunay { verify_prop22, svg } => commands::delaunay(&cfg, verify_prop22, svg),
        Command::Spectrum {
            family,
            k1,
            k2,
            count,
            degenerate_set,
        } => {
            let (factor, k) = match (k1, k2) {
                (Some(k), _) => (0, k),
                (None, Some(k)) => (1, k),
                (None, None) => {
                    return Err(CliError::Param("one of --k1, --k2 is required".into()))
                }
            };
            commands::spectrum(
                &cfg,
                &commands::SpectrumArgs {
                    family,
                    k,
                    factor,
                    count,
                    i_max: degenerate_set,
                },
            )
        }
        Command::Match {
            preset,
            scale,
            h0_scale,
        } => commands::matching(&cfg, &preset, scale, h0_scale),
        Command::Interior {
            coef,
            degree,
            index,
            a,
            periods,
            svg,
        } => commands::interior(
            &cfg,
            &commands::InteriorArgs {
                coef,
                degree,
                index,
                a: a.unwrap_or_default(),
                periods,
            },
            svg,
        ),
        Command::Norms {
            mu,
            k,
            alpha,
            radii,
        } => commands::norms(
            &cfg,
            &commands::NormArgs {
                mu,
                k,
                alpha,
                radii,
            },
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

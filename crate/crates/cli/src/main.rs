//! `polyshoot`: shooting experiments for Δᵐu = -u^p in R³ from the command line.
//!
//! Exit codes: 0 success, 2 usage, 3 numerical failure, 4 target out of range.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use polyshoot_core::{Error, Precision};

use crate::commands::{JetArgs, PrescribeArgs, SweepArgs};
use crate::config::{Overrides, RunConfig};

/// Invalid invocation detected after argument parsing.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

#[derive(Parser)]
#[command(
    name = "polyshoot",
    version,
    about = "Radial shooting for Δᵐu = -u^p in R³ (m = 2, 3)"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Order of the equation (2 or 3).
    #[arg(long, global = true)]
    m: Option<u32>,
    /// Relative tolerance of the integrator.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Integration horizon.
    #[arg(long, global = true)]
    r_max: Option<f64>,
    /// Arithmetic precision: double or extended.
    #[arg(long, global = true)]
    precision: Option<Precision>,
    /// JSON run configuration (schema 1); flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Directory of the critical-volume cache.
    #[arg(long, global = true, env = "POLYSHOOT_CACHE")]
    cache_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the closed-form oracle checks and emit a JSON report.
    Verify,
    /// Integrate one trajectory and write it as CSV.
    Shoot {
        /// m = 2 family parameter: u(0) = U₀(0) + ρ, Δu(0) = ΔU₀(0).
        #[arg(long, allow_hyphen_values = true)]
        rho: Option<f64>,
        /// m = 3 family: u(0) = k.
        #[arg(long)]
        k: Option<f64>,
        /// m = 3 family: Δu(0) = -ε, Δ²u(0) = 1.
        #[arg(long, allow_hyphen_values = true)]
        eps: Option<f64>,
        /// Explicit data u(0), Δu(0)[, Δ²u(0)].
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        jet: Option<Vec<f64>>,
    },
    /// Volumes over a parameter grid, as CSV.
    Sweep {
        /// m = 2 grid `a:b:step` for ρ.
        #[arg(long, allow_hyphen_values = true)]
        rho: Option<String>,
        /// m = 3 list of k values.
        #[arg(long, value_delimiter = ',')]
        k: Option<Vec<f64>>,
        /// m = 3: use ε at the entire end of each ε_k* bracket.
        #[arg(long)]
        at_critical: bool,
        /// m = 3: fixed ε for every k.
        #[arg(long, allow_hyphen_values = true)]
        eps: Option<f64>,
        #[arg(long, default_value_t = 1e-6)]
        bracket_tol: f64,
    },
    /// Locate the critical ε_k* for m = 3.
    CriticalEps {
        #[arg(long)]
        k: f64,
        #[arg(long, default_value_t = 1e-6)]
        bracket_tol: f64,
    },
    /// Find initial data whose solution has the given volume.
    PrescribeVolume {
        #[arg(long)]
        lambda: f64,
        /// Relative accuracy of the achieved volume.
        #[arg(long, default_value_t = 1e-5)]
        volume_tol: f64,
        #[arg(long, default_value_t = 1e-6)]
        bracket_tol: f64,
        /// m = 3 table of k values.
        #[arg(long, value_delimiter = ',')]
        k_table: Option<Vec<f64>>,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return 2;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::TargetOutOfRange { .. } | Error::TableExhausted { .. }) => 4,
        Some(
            Error::InvalidConfig(_)
            | Error::InvalidJet(_)
            | Error::UnsupportedOrder(_)
            | Error::InvalidScale(_)
            | Error::InvalidWindow { .. },
        ) => 2,
        _ => 3,
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let g = cli.global;
    let cfg = RunConfig::load(
        g.config.as_deref(),
        Overrides {
            m: g.m,
            rel_tol: g.tol,
            r_max: g.r_max,
            precision: g.precision,
            out: g.out,
            cache_dir: g.cache_dir,
        },
    )?;
    match cli.command {
        Command::Verify => {
            if !commands::verify(&cfg)? {
                eprintln!("polyshoot: verification failed");
                return Ok(ExitCode::from(3));
            }
        }
        Command::Shoot { rho, k, eps, jet } => {
            commands::shoot(&cfg, &JetArgs { rho, k, eps, jet })?
        }
        Command::Sweep {
            rho,
            k,
            at_critical,
            eps,
            bracket_tol,
        } => commands::sweep(
            &cfg,
            &SweepArgs {
                rho,
                k,
                eps,
                at_critical,
                bracket_tol,
            },
        )?,
        Command::CriticalEps { k, bracket_tol } => commands::critical(&cfg, k, bracket_tol)?,
        Command::PrescribeVolume {
            lambda,
            volume_tol,
            bracket_tol,
            k_table,
        } => commands::prescribe(
            &cfg,
            &PrescribeArgs {
                lambda,
                volume_tol,
                bracket_tol,
                k_table,
            },
        )?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("polyshoot: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

//! `tcch`: three-component Cahn–Hilliard simulations from the command line.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "tcch", version, about = "Three-component Cahn–Hilliard simulations with linear energy-stable schemes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Report the spreading coefficients, admissibility and Young angles for
    /// a set of surface tensions.
    CheckParams {
        /// `σ12,σ13,σ23`.
        #[arg(long, value_delimiter = ',', num_args = 1, required = true)]
        sigma: Vec<f64>,
    },
    /// Run a simulation described by a TOML config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Liquid lens between two stratified fluids.
    Lens {
        /// a: (1,1,1), b: (1,0.6,0.6), c: (1,0.8,1.4), d: (3,1,1), e: (1,1,3).
        #[arg(long, value_parser = ["a", "b", "c", "d", "e"])]
        case: String,
        #[command(flatten)]
        preset: Preset,
    },
    /// Spinodal decomposition from a randomly perturbed uniform mixture.
    Spinodal {
        #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(2..=3))]
        dim: u64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[command(flatten)]
        preset: Preset,
    },
    /// Temporal convergence study by step halving.
    Convergence {
        #[arg(long)]
        config: PathBuf,
        /// Number of step sizes, at least 3.
        #[arg(long, default_value_t = 5)]
        levels: usize,
        /// Write the table here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Debug, Args)]
struct Overrides {
    /// Override a config value, e.g. `--set time.dt=0.05`.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Args)]
struct Preset {
    /// Cells per axis.
    #[arg(long, default_value_t = 128)]
    n: usize,
    #[arg(long, default_value_t = 0.001)]
    dt: f64,
    #[arg(long, default_value_t = 1.0)]
    t_final: f64,
    /// Stop early once |ΔE|/δt falls below this value.
    #[arg(long)]
    stop_slope: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}

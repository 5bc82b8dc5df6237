//! `cocontact`: run the constraint algorithm, integrate, verify and sweep
//! contact Lagrangian systems from the command line.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Parser, Subcommand};
use cocontact::verify::VerifyOptions;

use commands::{OutputDir, Space, EXIT_ERROR, EXIT_OK};
use config::{Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "cocontact", version, about = "Unified Lagrangian-Hamiltonian dynamics of contact systems")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Preset name, instead of a configuration file.
    #[arg(long, global = true, value_name = "NAME", conflicts_with = "config")]
    system: Option<String>,
    /// Seed for the random probe points of `verify`.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Integrator step, overriding the configuration.
    #[arg(long, global = true)]
    step: Option<f64>,
    /// Final time, overriding the configuration.
    #[arg(long = "t-end", global = true)]
    t_end: Option<f64>,
    /// Directory for output files.
    #[arg(long, global = true, value_name = "DIR", env = "COCONTACT_OUT_DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the constraint algorithm at the initial point and print the ladder.
    Constraints {
        #[arg(long, default_value_t = 8)]
        max_generations: usize,
    },
    /// Integrate a trajectory and write it as CSV (and JSON on request).
    Simulate {
        #[arg(long, value_enum, default_value = "unified")]
        space: Space,
    },
    /// Run the numerical checks; exits 0 only if all pass.
    Verify {
        /// Replaces every check tolerance.
        #[arg(long)]
        tolerance: Option<f64>,
        /// Number of random probe points.
        #[arg(long, default_value_t = 100)]
        points: usize,
        /// Print the reports as JSON.
        #[arg(long)]
        json: bool,
    },
    /// One run per value of a parameter or initial coordinate, in parallel.
    Sweep {
        /// Parameter name, or one of t0, s, q<i>, v<i>.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        values: Vec<f64>,
        /// Worker threads (defaults to the available parallelism).
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn run(cli: Cli) -> Result<i32> {
    let cfg = match (&cli.config, &cli.system) {
        (Some(path), _) => Some(RunConfig::load(path)?),
        (None, Some(name)) => Some(RunConfig::for_preset(name)),
        (None, None) => None,
    };
    let over = Overrides {
        step: cli.step,
        t_end: cli.t_end,
    };
    let out = OutputDir(cli.out.clone());
    let need = |cfg: Option<RunConfig>| -> Result<RunConfig> {
        match cfg {
            Some(c) => Ok(c),
            None => bail!("give --config <PATH> or --system <NAME>"),
        }
    };
    match cli.command {
        Command::Constraints { max_generations } => commands::constraints(&need(cfg)?, over, &out, max_generations),
        Command::Simulate { space } => commands::simulate(&need(cfg)?, over, &out, space),
        Command::Verify {
            tolerance,
            points,
            json,
        } => {
            if let Some(t) = tolerance {
                if !(t > 0.0) {
                    bail!("--tolerance must be positive");
                }
            }
            let opts = VerifyOptions {
                seed: cli.seed,
                points,
                tolerance,
                ..VerifyOptions::default()
            };
            commands::verify(cfg.as_ref(), over, &opts, json)
        }
        Command::Sweep { param, values, workers } => {
            let workers = workers
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
                .max(1);
            commands::sweep(&need(cfg)?, over, &out, &param, &values, workers)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}

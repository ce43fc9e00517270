use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use polling_cli::commands::{self, RunContext, EXIT_ERROR};
use polling_cli::config::{Command, Overrides, RunConfig};

/// Stability analysis and simulation of a two-queue adaptive polling system.
#[derive(Debug, Parser)]
#[command(name = "polling", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,

    /// JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed (overrides the config).
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Output directory [default: current directory; analyze writes nothing unless given].
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Worker threads for independent sweep points.
    #[arg(long, global = true, value_name = "N", default_value_t = 1)]
    jobs: usize,

    /// Station-1 arrival rate (overrides the config).
    #[arg(long, global = true, value_name = "RATE")]
    lambda1: Option<f64>,

    /// Simulation horizon of the chosen subcommand (overrides the config).
    #[arg(long, global = true, value_name = "TIME")]
    horizon: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Closed-form quantities and stability verdict. Exit 0 stable, 1 unstable.
    Analyze,
    /// Full-system run writing embedded.csv, cycles.csv and simulate.json.
    Simulate,
    /// Saturated-system estimates against the closed forms (saturate.json).
    Saturate,
    /// Drift over a lambda1 grid or bisection for the boundary (sweep.csv, sweep.json).
    Sweep,
    /// Two moment-matched service laws with different stability (demo.json).
    DemoMoments,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        Sub::Analyze => Command::Analyze,
        Sub::Simulate => Command::Simulate,
        Sub::Saturate => Command::Saturate,
        Sub::Sweep => Command::Sweep,
        Sub::DemoMoments => Command::DemoMoments,
    };
    let result = (|| {
        let path = cli.config.as_ref().ok_or_else(|| anyhow::anyhow!("--config is required"))?;
        let mut config = RunConfig::load(path)?;
        let overrides = Overrides {
            seed: cli.seed,
            lambda1: cli.lambda1,
            horizon: cli.horizon,
        };
        config.apply(command, &overrides)?;
        let ctx = RunContext {
            out: cli.out.clone(),
            jobs: cli.jobs,
        };
        commands::run(command, &config, &ctx, &mut io::stdout().lock())
    })();
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(commands::exit_code(&err).max(EXIT_ERROR))
        }
    }
}

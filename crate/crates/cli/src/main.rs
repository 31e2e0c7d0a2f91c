mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{parse_grid, Grid, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "xgraph", version, about = "Extremal graphical models from the command line")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Empirical extremal variogram and extremal correlation
    Estimate(Flags),
    /// Structure learning: emst, eglearn, emtp2 or shift
    Learn(Flags),
    /// Graph-constrained fit by variogram completion
    Fit(Flags),
    /// Test-sample scores of fitted models
    Evaluate(Flags),
    /// Samples from an HR, max-linear or recursive max-linear model
    Simulate(Flags),
}

#[derive(clap::Args)]
struct Flags {
    /// Run configuration (JSON)
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Threshold probability, overrides the config
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    method: Option<String>,
    /// Comma-separated penalties, e.g. 0.01,0.05,0.1
    #[arg(long, value_parser = parse_grid)]
    grid: Option<Grid>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (flags, run): (&Flags, fn(&RunConfig) -> Result<(), error::CliError>) = match &cli.command {
        Command::Estimate(f) => (f, commands::estimate),
        Command::Learn(f) => (f, commands::learn),
        Command::Fit(f) => (f, commands::fit),
        Command::Evaluate(f) => (f, commands::evaluate),
        Command::Simulate(f) => (f, commands::simulate),
    };
    let overrides = Overrides {
        p: flags.p,
        seed: flags.seed,
        method: flags.method.clone(),
        grid: flags.grid.clone().map(|g| g.0),
    };
    let result = RunConfig::load(&flags.config, &overrides).and_then(|cfg| run(&cfg));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("xgraph: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}

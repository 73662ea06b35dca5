use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use sma_hybrid::scenario::Variant;

mod commands;
mod config;

use commands::Failure;
use config::Config;

#[derive(Parser, Debug)]
#[command(name = "smasim", version, about = "Simulate SMA wire actuators and the SMA-driven soft robot")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seed for random inputs and synthetic calibration guesses.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Wire model; for `benchmark` this selects the candidate.
    #[arg(long, global = true)]
    variant: Option<WireArg>,
    /// Timed repetitions per benchmark run.
    #[arg(long, global = true)]
    repetitions: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Run one scenario and write its trajectory.
    Simulate,
    /// Compare two coupled variants over seeded random-step inputs.
    Benchmark,
    /// Fit material parameters to isothermal stress-strain curves.
    Calibrate,
    /// Write quasi-static isothermal stress-strain sweeps.
    Isotherm,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum WireArg {
    Hybrid,
    Mas,
}

impl From<WireArg> for Variant {
    fn from(w: WireArg) -> Self {
        match w {
            WireArg::Hybrid => Variant::Hybrid,
            WireArg::Mas => Variant::Mas,
        }
    }
}

fn load(cli: &Cli) -> Result<Config, Failure> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path).map_err(Failure::Config)?,
        None => Config::default(),
    };
    if config.material.is_none() {
        config.material = Some(config.material());
    }
    if let Some(seed) = cli.seed {
        config.simulate.seed = seed;
        config.benchmark.seed = seed;
        if let Some(s) = &mut config.calibrate.synthetic {
            s.seed = seed;
        }
    }
    if let Some(v) = cli.variant {
        let v = Variant::from(v);
        config.simulate.variant = config.simulate.variant.with_wire(v);
        config.benchmark.candidate = v;
        config.isotherm.variant = v;
    }
    if let Some(n) = cli.repetitions {
        config.benchmark.repetitions = n;
    }
    config.validate().map_err(Failure::Config)?;
    Ok(config)
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let config = load(cli)?;
    match cli.command {
        Command::Simulate => commands::simulate(&config, &cli.out),
        Command::Benchmark => commands::benchmark(&config, &cli.out),
        Command::Calibrate => commands::calibrate(&config, &cli.out),
        Command::Isotherm => commands::isotherm(&config, &cli.out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.exit_code())
        }
    }
}

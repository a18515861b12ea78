//! `fibertherm` command-line front end.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use commands::{PartialFailure, Run};
use config::{is_config_error, Config, DEFAULT_CONFIG};

#[derive(Parser)]
#[command(name = "fibertherm", version, about = "Thermal radiation and thermalization of tapered silica nanofibers")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set heating.eta=0.003`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = "out", global = true)]
    out: PathBuf,
    /// Worker threads (1 gives bit-reproducible output).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Recompute emission spectra instead of using the cache.
    #[arg(long, global = true)]
    no_cache: bool,
    /// Print a commented reference configuration and exit.
    #[arg(long)]
    emit_default_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Spectral emissivity band of one cylinder radius.
    Emissivity,
    /// Radiated power per length against temperature, cylinder vs interface.
    PowerCurve,
    /// One heating/cooling cycle of the taper.
    Simulate,
    /// Grid of runs over heating power or pressure.
    Sweep,
    /// Fit the absorbed fraction to (P_heat, ΔL_opt^max) data.
    FitEta {
        /// Data file with `P_heat_W,dLopt_max_m` rows (default: fit.data).
        data: Option<PathBuf>,
    },
    /// Viscous time scales of a hot filament.
    Stability,
    /// Export the taper radius profile.
    Profile,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Emissivity => "emissivity",
            Command::PowerCurve => "power-curve",
            Command::Simulate => "simulate",
            Command::Sweep => "sweep",
            Command::FitEta { .. } => "fit-eta",
            Command::Stability => "stability",
            Command::Profile => "profile",
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if cli.emit_default_config {
        print!("{DEFAULT_CONFIG}");
        return Ok(());
    }
    let Some(cmd) = cli.command else {
        return Err(config::ConfigError("no subcommand given (see --help)".into()).into());
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(config::ConfigError("--threads must be ≥ 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let cfg = Config::load(cli.config.as_deref(), &cli.set)?;
    let mut run = Run::new(cfg, &cli.out, cmd.name(), cli.no_cache)?;
    let result = match &cmd {
        Command::Emissivity => commands::emissivity(&mut run),
        Command::PowerCurve => commands::power_curve(&mut run),
        Command::Simulate => commands::simulate(&mut run),
        Command::Sweep => commands::sweep(&mut run),
        Command::FitEta { data } => commands::fit_eta_cmd(&mut run, data.as_deref()),
        Command::Stability => commands::stability(&mut run),
        Command::Profile => commands::profile(&mut run),
    };
    // partial results still get a manifest
    run.finish()?;
    result
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<PartialFailure>().is_some() {
                ExitCode::from(4)
            } else if is_config_error(&e) {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}

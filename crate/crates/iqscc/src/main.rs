//! Batch-simulation CLI: detection-theory sweeps, sum-rate optimization
//! campaigns, beampattern extraction, and the self-validation suite.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use iqscc::commands::{
    cmd_beampattern, cmd_optimize, cmd_required_sinr, cmd_roc, cmd_thermal, cmd_validate, CliError,
};
use iqscc::config::{parse_config, RunConfig};
use iqscc::sca::OptimizationMode;

#[derive(Parser)]
#[command(
    name = "iqscc",
    about = "Integrated quantum-sensing / classical-communication simulator",
    version
)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for generated files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override the configuration seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Optimization mode: which covariance the radar constraint sees.
    #[arg(long, global = true, value_parser = parse_mode, default_value = "iqscc")]
    mode: OptimizationMode,
}

fn parse_mode(s: &str) -> Result<OptimizationMode, String> {
    match s {
        "conventional" => Ok(OptimizationMode::Conventional),
        "iqscc" => Ok(OptimizationMode::Iqscc),
        other => Err(format!("unknown mode \"{other}\" (expected conventional or iqscc)")),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Thermal photon occupation over a frequency grid per temperature.
    Thermal {
        #[arg(long, default_value_t = 1e9)]
        f_min_hz: f64,
        #[arg(long, default_value_t = 1e15)]
        f_max_hz: f64,
        #[arg(long, default_value_t = 200)]
        points: usize,
        /// Comma-separated temperatures in kelvin.
        #[arg(long, default_value = "3,77,293", value_delimiter = ',')]
        temperatures_k: Vec<f64>,
    },
    /// Detection probability versus SINR for the selected protocols.
    Roc {
        /// Comma-separated protocols: cw, cs, qi.
        #[arg(long, default_value = "cw,cs,qi")]
        protocols: String,
        #[arg(long, default_value_t = -10.0, allow_negative_numbers = true)]
        gamma_min_db: f64,
        #[arg(long, default_value_t = 13.0, allow_negative_numbers = true)]
        gamma_max_db: f64,
        #[arg(long, default_value_t = 93)]
        points: usize,
        /// Comma-separated false-alarm probabilities.
        #[arg(long, default_value = "1e-2,1e-4,1e-6", value_delimiter = ',')]
        pf: Vec<f64>,
        /// Measurements averaged per decision.
        #[arg(long, default_value_t = 1)]
        k: u32,
        /// Thermal photon number.
        #[arg(long, default_value_t = 253.88071939059026)]
        thermal_photons: f64,
        /// Channel transmissivity (QI protocol).
        #[arg(long, default_value_t = 0.01)]
        transmissivity: f64,
    },
    /// Required SINR versus detection probability at fixed false alarm.
    RequiredSinr {
        #[arg(long, default_value = "cw,cs,qi")]
        protocols: String,
        #[arg(long, default_value_t = 1e-3)]
        pd_min: f64,
        #[arg(long, default_value_t = 0.999)]
        pd_max: f64,
        #[arg(long, default_value_t = 100)]
        points: usize,
        #[arg(long, default_value_t = 1e-6)]
        pf: f64,
        #[arg(long, default_value_t = 1)]
        k: u32,
        #[arg(long, default_value_t = 253.88071939059026)]
        thermal_photons: f64,
        #[arg(long, default_value_t = 0.01)]
        transmissivity: f64,
    },
    /// Sum-rate maximization campaign: convergence trace plus design report.
    Optimize {
        /// Fan this many consecutive seeds across the worker pool.
        #[arg(long, default_value_t = 1)]
        sweep: usize,
    },
    /// Transmit beampatterns of a completed optimize run.
    Beampattern,
    /// Property and oracle self-checks; nonzero exit on any failure.
    Validate,
}

fn load_config(global: &GlobalArgs) -> Result<RunConfig, CliError> {
    let path = global.config.as_ref().ok_or_else(|| {
        CliError::BadArgument("this subcommand requires --config PATH".into())
    })?;
    let text = std::fs::read_to_string(path)
        .map_err(|source| CliError::Io { path: path.clone(), source })?;
    Ok(parse_config(&text)?)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Thermal { f_min_hz, f_max_hz, points, temperatures_k } => {
            let path = cmd_thermal(f_min_hz, f_max_hz, points, &temperatures_k, &cli.global.out)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Roc {
            protocols,
            gamma_min_db,
            gamma_max_db,
            points,
            pf,
            k,
            thermal_photons,
            transmissivity,
        } => {
            let path = cmd_roc(
                &protocols,
                gamma_min_db,
                gamma_max_db,
                points,
                &pf,
                k,
                thermal_photons,
                transmissivity,
                &cli.global.out,
            )?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::RequiredSinr {
            protocols,
            pd_min,
            pd_max,
            points,
            pf,
            k,
            thermal_photons,
            transmissivity,
        } => {
            let path = cmd_required_sinr(
                &protocols,
                pd_min,
                pd_max,
                points,
                pf,
                k,
                thermal_photons,
                transmissivity,
                &cli.global.out,
            )?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Optimize { sweep } => {
            let cfg = load_config(&cli.global)?;
            let paths = cmd_optimize(&cfg, cli.global.mode, &cli.global.out, cli.global.seed, sweep)?;
            for p in paths {
                println!("wrote {}", p.display());
            }
            Ok(())
        }
        Command::Beampattern => {
            let cfg = load_config(&cli.global)?;
            let path = cmd_beampattern(&cfg, cli.global.mode, &cli.global.out)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Validate => {
            let cfg = load_config(&cli.global)?;
            cmd_validate(&cfg, cli.global.seed)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! Command-line front end: loads a TOML experiment configuration, runs
//! sweeps, optimizations, and simulations, and emits CSV datasets with
//! provenance headers.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use commands::SimScenarioArg;
use config::Loaded;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration: {m}"),
            CliError::Numerical(m) => write!(f, "numerical: {m}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<pass_noma::Error> for CliError {
    fn from(e: pass_noma::Error) -> CliError {
        use pass_noma::Error::*;
        match e {
            InvalidGeometry(_) | InvalidConfig(_) | InvalidModulation(_) | BitCount { .. }
            | InvalidUser(_) => CliError::Config(e.to_string()),
            NonFinite(_) | OutsideWaveguide { .. } | ZeroChannel | ScenarioMismatch(_)
            | NonFiniteCost(_) => CliError::Numerical(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "pass-noma",
    version,
    about = "BER analysis and placement optimization for a two-user pinching-antenna NOMA link"
)]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output CSV path; overrides `[output].path`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// RNG seed; overrides `[sim].seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScenarioName {
    Ul,
    Dl,
}

#[derive(Subcommand)]
enum Command {
    /// Analytic and simulated BER vs transmit power at three placements
    /// (optimized, inter-UE midpoint, at UE 1).
    UlBerCurve,
    /// Uplink cost and its lower envelope over the whole waveguide.
    UlPositionSweep,
    /// Analytic and simulated DL BER vs power for the optimized, fixed, and
    /// equal-power configurations.
    DlBerCurve,
    /// DL cost over the (position, power-allocation) grid.
    DlSurface,
    /// Minimize the uplink cost over the PA position.
    OptimizeUl,
    /// Jointly minimize the DL cost over position and power allocation.
    OptimizeDl,
    /// Monte Carlo only, at a fixed placement.
    Simulate {
        #[arg(long, value_enum)]
        scenario: ScenarioName,
        /// PA position override (default: UL midpoint / DL `fixed_x`).
        #[arg(long)]
        x: Option<f64>,
        /// Power-allocation override for DL (default: `[dl].alpha`).
        #[arg(long)]
        alpha: Option<f64>,
    },
    /// Built-in numerical sanity checks; needs no configuration.
    SelfTest,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        // Ignore failure: the global pool may already exist in tests.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Command::SelfTest = cli.command {
        return commands::self_test();
    }
    let config_path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required for this command".into()))?;
    let loaded = Loaded::from_path(config_path)?;
    let seed = cli.seed.unwrap_or(loaded.config.sim.seed);
    let out = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&loaded.config.output.path));

    match cli.command {
        Command::UlBerCurve => commands::ul_ber_curve(&loaded, &out, seed),
        Command::UlPositionSweep => commands::ul_position_sweep(&loaded, &out, seed),
        Command::DlBerCurve => commands::dl_ber_curve(&loaded, &out, seed),
        Command::DlSurface => commands::dl_surface(&loaded, &out, seed),
        Command::OptimizeUl => commands::optimize_ul_cmd(&loaded, &out, seed),
        Command::OptimizeDl => commands::optimize_dl_cmd(&loaded, &out, seed),
        Command::Simulate { scenario, x, alpha } => {
            let scenario = match scenario {
                ScenarioName::Ul => SimScenarioArg::Ul,
                ScenarioName::Dl => SimScenarioArg::Dl,
            };
            commands::simulate_cmd(&loaded, &out, seed, scenario, x, alpha)
        }
        Command::SelfTest => unreachable!("handled above"),
    }
}

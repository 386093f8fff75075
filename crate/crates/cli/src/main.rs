//! `pareto-region`: generate scenarios, sweep the explicit parameterization,
//! trace the boundary, verify it against a sampled oracle and emit gnuplot
//! scripts.
//!
//! Exit codes: 0 success, 2 validation or input error, 3 solver failure,
//! 4 verification failure.

mod commands;
mod config;
mod error;
mod output;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::ProfileSpec;

#[derive(Parser, Debug)]
#[command(name = "pareto-region", version, about = "Pareto boundaries of multicell downlink performance regions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a Rayleigh fading scenario and write scenario.json.
    Scenario(ScenarioArgs),
    /// Sweep the explicit parameterization; writes sweep.csv and front.csv.
    Explicit(ExplicitArgs),
    /// Trace boundary points along fairness profiles; writes boundary.csv.
    Trace(TraceArgs),
    /// Check a boundary against the sampled oracle and the duality round trip.
    Verify(VerifyArgs),
    /// Write a gnuplot script and data files for one or more region CSVs.
    Plot(PlotArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// TOML file with defaults for any of the long options.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory [default: out].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads [default: available cores].
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

fn parse_profiles(s: &str) -> Result<ProfileSpec, String> {
    ProfileSpec::parse(s)
}

#[derive(Args, Debug)]
pub struct ScenarioArgs {
    #[command(flatten)]
    pub common: Common,
    /// miso-ic or network-mimo.
    #[arg(long)]
    pub kind: Option<String>,
    /// Transmitters [default: 2 for miso-ic, 1 for network-mimo].
    #[arg(long)]
    pub kt: Option<usize>,
    /// Antennas per transmitter [default: 2].
    #[arg(long)]
    pub n: Option<usize>,
    /// Users, network-mimo only [default: 2].
    #[arg(long)]
    pub users: Option<usize>,
    /// Average single-user SNR in dB [default: 10].
    #[arg(long)]
    pub snr: Option<f64>,
    /// Error vector magnitude of every antenna [default: 0].
    #[arg(long)]
    pub evm: Option<f64>,
    /// rate, mse or ser4qam [default: rate].
    #[arg(long)]
    pub metric: Option<String>,
}

#[derive(Args, Debug)]
pub struct ExplicitArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Override the EVM of every antenna.
    #[arg(long)]
    pub evm: Option<f64>,
    /// Simplex grid step [default: 0.02].
    #[arg(long)]
    pub step: Option<f64>,
    /// Largest allowed number of parameter points.
    #[arg(long)]
    pub grid_cap: Option<usize>,
    /// Keep only Pareto-optimal points in front.csv, dropping flat segments.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub strict_pareto: Option<bool>,
}

#[derive(Args, Debug)]
pub struct TraceArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long)]
    pub evm: Option<f64>,
    /// Bisection tolerance [default: 1e-5].
    #[arg(long)]
    pub tol: Option<f64>,
    /// Points per axis of the profile grid, or weight vectors like `0.2,0.8;0.5,0.5`
    /// [default: 101 for two users, 11 otherwise].
    #[arg(long, value_parser = parse_profiles)]
    pub profiles: Option<ProfileSpec>,
    /// Drop traced points that lie on flat segments.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub strict_pareto: Option<bool>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Boundary CSV to check; traced afresh when absent.
    #[arg(long)]
    pub boundary: Option<PathBuf>,
    #[arg(long)]
    pub evm: Option<f64>,
    /// Bisection tolerance [default: 1e-5].
    #[arg(long)]
    pub tol: Option<f64>,
    /// Profiles traced when no boundary is given [default: 21].
    #[arg(long, value_parser = parse_profiles)]
    pub profiles: Option<ProfileSpec>,
    /// Oracle direction sets [default: 20000].
    #[arg(long)]
    pub samples: Option<usize>,
    /// Oracle power levels per user [default: 32].
    #[arg(long)]
    pub power_grid: Option<usize>,
    /// random or grid [default: random].
    #[arg(long)]
    pub oracle_mode: Option<String>,
    /// Largest allowed excess of a cloud point over the boundary [default: 1e-3].
    #[arg(long)]
    pub dominance_tol: Option<f64>,
    /// Largest allowed relative gap between cloud front and boundary; unchecked when absent.
    #[arg(long)]
    pub front_tol: Option<f64>,
    /// Random rays for the duality round trip [default: 5].
    #[arg(long)]
    pub round_trips: Option<usize>,
}

#[derive(Args, Debug)]
pub struct PlotArgs {
    #[command(flatten)]
    pub common: Common,
    /// Region CSVs, overlaid in order.
    pub inputs: Vec<PathBuf>,
    /// Legend entry per input [default: file stem].
    #[arg(long = "label")]
    pub labels: Vec<String>,
    /// Image written by the script [default: region.png].
    #[arg(long)]
    pub image: Option<String>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Scenario(a) => commands::scenario(a),
        Command::Explicit(a) => commands::explicit(a),
        Command::Trace(a) => commands::trace(a),
        Command::Verify(a) => commands::verify(a),
        Command::Plot(a) => commands::plot(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

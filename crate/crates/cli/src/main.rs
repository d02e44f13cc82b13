//! `wwtp-marl`: command-line entry point for the plant surrogate, the
//! life-cycle reward and multi-agent set-point training.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "wwtp-marl", version, about = "Life-cycle-driven DO and PAC set-point control of a wastewater plant")]
pub struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Log progress to standard error.
    #[arg(short, long, global = true)]
    pub verbose: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Diurnal influent series.
    #[command(subcommand)]
    Influent(InfluentCommand),
    /// Plant surrogate runs.
    #[command(subcommand)]
    Plant(PlantCommand),
    /// Life-cycle indicators of recorded fluxes.
    #[command(subcommand)]
    Impacts(ImpactsCommand),
    /// Normalization extremes.
    #[command(subcommand)]
    Bounds(BoundsCommand),
    /// Train the two set-point agents for one scenario and seed.
    Train(TrainArgs),
    /// Run trained agents greedily over the evaluation horizon.
    Evaluate(EvaluateArgs),
    /// Scenario experiments.
    #[command(subcommand)]
    Scenarios(ScenariosCommand),
    /// Rebuild the summary tables from stored evaluation logs.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Output directory; created if missing. Nothing is written elsewhere.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum InfluentCommand {
    /// Write `influent.csv` (t_days,Q_m3d,COD,TN,NH3N,TP).
    Export(InfluentExportArgs),
}

#[derive(Debug, Args)]
pub struct InfluentExportArgs {
    #[command(flatten)]
    pub out: OutArgs,
    /// Horizon [d].
    #[arg(long, default_value_t = 10.0, value_name = "DAYS")]
    pub days: f64,
    /// Sampling interval [h].
    #[arg(long, default_value_t = 1.0, value_name = "HOURS")]
    pub interval: f64,
}

#[derive(Debug, Subcommand)]
pub enum PlantCommand {
    /// Constant-action run after a 20 d warm-up at the same action; writes
    /// `plant.csv` and `fluxes.json`.
    Simulate(PlantSimulateArgs),
}

#[derive(Debug, Args)]
pub struct PlantSimulateArgs {
    #[command(flatten)]
    pub out: OutArgs,
    /// Aerobic dissolved-oxygen set-point [g O₂/m³], 0 to 5.
    #[arg(long = "do", default_value_t = 1.5, value_name = "G_M3")]
    pub do_setpoint: f64,
    /// PAC solution dose [kg/m³ wastewater], 0 to 0.5.
    #[arg(long, default_value_t = 0.125, value_name = "KG_M3")]
    pub dose: f64,
    /// Logged horizon after the warm-up [d].
    #[arg(long, default_value_t = 10.0, value_name = "DAYS")]
    pub days: f64,
}

#[derive(Debug, Subcommand)]
pub enum ImpactsCommand {
    /// Per-m³ indicators of every flux record; writes `impacts.csv` and
    /// `impacts.json`.
    Assess(ImpactsAssessArgs),
}

#[derive(Debug, Args)]
pub struct ImpactsAssessArgs {
    #[command(flatten)]
    pub out: OutArgs,
    /// JSON flux records (one object or an array), as written by
    /// `plant simulate`; loads in kg, energy in kWh, volume in m³.
    #[arg(long, value_name = "FILE")]
    pub fluxes: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum BoundsCommand {
    /// Random-action sampling of indicator extremes; writes `bounds.json`.
    Sample(BoundsSampleArgs),
}

#[derive(Debug, Args)]
pub struct BoundsSampleArgs {
    #[command(flatten)]
    pub out: OutArgs,
    /// Sampled control intervals [count]; config `bounds_samples` when omitted.
    #[arg(long, value_name = "N")]
    pub samples: Option<usize>,
    /// RNG seed [integer]; config `seed` when omitted.
    #[arg(long, value_name = "SEED")]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub out: OutArgs,
    /// Scenario: lca-ia, lca-ib, lca-sw or cost.
    #[arg(long, default_value = "lca-ia", value_name = "NAME")]
    pub scenario: String,
    /// RNG seed [integer]; config `seed` when omitted.
    #[arg(long, value_name = "SEED")]
    pub seed: Option<u64>,
    /// Environment steps [control intervals of 1 h]; config value when omitted.
    #[arg(long, value_name = "N")]
    pub steps: Option<usize>,
    /// Reward penalty per violating interval [reward units]; config value when omitted.
    #[arg(long, value_name = "P")]
    pub violation_penalty: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub out: OutArgs,
    /// Trained agents (`agents.json` from `train`).
    #[arg(long, value_name = "FILE")]
    pub agents: PathBuf,
    /// Scenario whose standard scores the run [lca-ia, lca-ib, lca-sw, cost].
    #[arg(long, default_value = "lca-ia", value_name = "NAME")]
    pub scenario: String,
}

#[derive(Debug, Subcommand)]
pub enum ScenariosCommand {
    /// Train and evaluate scenarios for every seed, then write the summary.
    Run(ScenariosRunArgs),
}

#[derive(Debug, Args)]
pub struct ScenariosRunArgs {
    #[command(flatten)]
    pub out: OutArgs,
    /// Every scenario in the configuration.
    #[arg(long, conflicts_with = "scenario")]
    pub all: bool,
    /// Scenario to run [baseline, lca-ia, lca-ib, lca-sw, cost]; repeatable.
    #[arg(long, value_name = "NAME")]
    pub scenario: Vec<String>,
    /// Seeds [comma-separated integers]; config `seeds` when omitted.
    #[arg(long, value_delimiter = ',', value_name = "SEEDS")]
    pub seeds: Option<Vec<u64>>,
    /// Environment steps per training run [control intervals of 1 h].
    #[arg(long, value_name = "N")]
    pub steps: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub out: OutArgs,
    /// Evaluation logs (`logs.json` from `scenarios run`).
    #[arg(long, value_name = "FILE")]
    pub logs: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(e.exit_code())
        }
    }
}

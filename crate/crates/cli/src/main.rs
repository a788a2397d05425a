//! `yule-ou`: simulate correlated OU pairs, compute the Yule correlation and
//! its components, run the independence tests, evaluate theoretical
//! constants and drive Monte Carlo validation runs.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use yule_core::mc::StatisticKind;
use yule_core::{TestVariant, ThetaHatSource};

#[derive(Debug, Parser)]
#[command(
    name = "yule-ou",
    version,
    about = "Yule's nonsense correlation for Ornstein-Uhlenbeck paths"
)]
struct Cli {
    /// Worker threads for replicated runs (0 = one per core)
    #[arg(long, global = true, env = "YULE_OU_JOBS", default_value_t = 0)]
    jobs: usize,
    /// JSON file with option values for the subcommand; flags take precedence
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one correlated pair and write it as CSV (t,x1,x2)
    Simulate(SimulateArgs),
    /// Compute Y11, Y22, Y12, rho and theta_hat from a path CSV
    Stat(StatArgs),
    /// Run an independence test on a path CSV
    Test(TestArgs),
    /// Monte Carlo study over a (theta, r, T) grid
    Mc(McArgs),
    /// Multi-mode test for the stochastic heat equation
    Spde(SpdeArgs),
    /// Evaluate a closed-form constant
    Theory(TheoryArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum VariantArg {
    /// sqrt(T) rho against q/sqrt(theta)
    #[value(name = "rho", alias = "rho_known_theta")]
    #[serde(rename = "rho", alias = "rho_known_theta")]
    Rho,
    /// sqrt(T theta_hat) rho against q
    #[value(name = "rho-est", alias = "rho_estimated_theta")]
    #[serde(rename = "rho-est", alias = "rho_estimated_theta")]
    RhoEst,
    /// Y12/sqrt(T) against q/(2 theta^{3/2})
    #[value(name = "numerator", alias = "numerator_known_theta")]
    #[serde(rename = "numerator", alias = "numerator_known_theta")]
    Numerator,
}

impl From<VariantArg> for TestVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Rho => TestVariant::RhoKnownTheta,
            VariantArg::RhoEst => TestVariant::RhoEstimatedTheta,
            VariantArg::Numerator => TestVariant::NumeratorKnownTheta,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum StatisticArg {
    RhoCentered,
    NumeratorCentered,
    ThetaHatCentered,
    YbarCentered,
}

impl From<StatisticArg> for StatisticKind {
    fn from(s: StatisticArg) -> Self {
        match s {
            StatisticArg::RhoCentered => StatisticKind::RhoCentered,
            StatisticArg::NumeratorCentered => StatisticKind::NumeratorCentered,
            StatisticArg::ThetaHatCentered => StatisticKind::ThetaHatCentered,
            StatisticArg::YbarCentered => StatisticKind::YbarCentered,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaSourceArg {
    First,
    Pooled,
}

impl From<ThetaSourceArg> for ThetaHatSource {
    fn from(s: ThetaSourceArg) -> Self {
        match s {
            ThetaSourceArg::First => ThetaHatSource::First,
            ThetaSourceArg::Pooled => ThetaHatSource::Pooled,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateArgs {
    /// Mean-reversion rate
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    /// Correlation of the driving noises, in [-1, 1]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    /// Time horizon
    #[arg(long = "T")]
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// Time step [default: 0.05/theta]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Experiment seed [default: 0]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Replication index within the seed's stream family [default: 0]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rep: Option<u64>,
    /// Output file [default: standard output]
    #[arg(long, short)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatArgs {
    /// Path CSV with header t,x1,x2
    #[arg(long, short)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Path(s) used for theta_hat [default: first]
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta_source: Option<ThetaSourceArg>,
    /// Output file [default: standard output]
    #[arg(long, short)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestArgs {
    /// Test variant
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<VariantArg>,
    /// Significance level [default: 0.05]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Known mean-reversion rate (not used by rho-est)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    /// Path CSV with header t,x1,x2
    #[arg(long, short)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Also report the confidence interval for r
    #[arg(long)]
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub ci: bool,
    /// Output format [default: json]
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<FormatArg>,
    /// Output file [default: standard output]
    #[arg(long, short)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McArgs {
    /// Standardized statistic to aggregate
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub statistic: Option<StatisticArg>,
    /// Comma-separated theta values
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    /// Comma-separated r values
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<Vec<f64>>,
    /// Comma-separated horizons
    #[arg(long = "T", value_delimiter = ',')]
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub horizon: Option<Vec<f64>>,
    /// Replications per cell
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    /// Base seed [default: 0]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Step cap: dt = step_cap/theta [default: 0.05]
    #[arg(long, conflicts_with = "dt")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_cap: Option<f64>,
    /// Fixed time step for every cell
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Test whose rejection rate is reported [default: rho]
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<VariantArg>,
    /// Significance level [default: 0.05]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Output format; json writes one object per line [default: csv]
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<FormatArg>,
    /// Output file [default: standard output]
    #[arg(long, short)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Additional JSON-lines copy of the reports
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jsonl: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpdeArgs {
    /// Number of Fourier modes
    #[arg(long = "N")]
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub modes: Option<usize>,
    /// Significance level [default: 0.05]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Correlation of the driving noises
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    /// Time horizon
    #[arg(long = "T")]
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// Replications [default: 1]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reps: Option<usize>,
    /// Experiment seed [default: 0]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Per-mode test [default: rho]
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<VariantArg>,
    /// Use the Sidak per-mode level 1-(1-alpha)^(1/N)
    #[arg(long)]
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub sidak: bool,
    /// Step cap: mode k uses dt = step_cap/k^2 [default: 0.05]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_cap: Option<f64>,
    /// Output file [default: standard output]
    #[arg(long, short)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryArgs {
    /// Quantity to evaluate (see `--quantity list`)
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quantity: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[arg(long = "T")]
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    /// Cumulant order or L^p exponent
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// Evaluation point of the Edgeworth correction
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
    /// Scale for the Wasserstein bound
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Chaos order for the tail bound
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    /// Kernel norm for the tail bound
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub norm: Option<f64>,
    /// Tail level for the tail bound
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x: Option<f64>,
    /// Prefactor C of the tail bound [default: 1]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prefactor: Option<f64>,
    /// Significance level for the type-II bounds [default: 0.05]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Berry-Esseen constant for the type-II bounds [default: 0]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub berry: Option<f64>,
    /// First time argument of ou_covariance
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    /// Second time argument of ou_covariance
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(a, cli.config.as_deref()),
        Command::Stat(a) => commands::stat(a, cli.config.as_deref()),
        Command::Test(a) => commands::test(a, cli.config.as_deref()),
        Command::Mc(a) => commands::mc(a, cli.config.as_deref(), cli.jobs),
        Command::Spde(a) => commands::spde(a, cli.config.as_deref(), cli.jobs),
        Command::Theory(a) => commands::theory(a, cli.config.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("yule-ou: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

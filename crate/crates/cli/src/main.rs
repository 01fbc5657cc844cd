//! `recurrent-causal` command line.

mod commands;
mod provenance;
mod schema;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use recurrent_causal::Error;

#[derive(Parser, Debug)]
#[command(
    name = "recurrent-causal",
    version,
    about = "Counterfactual estimands for recurrent events with competing events and censoring"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Print the input and output schemas as JSON.
    Schema,
    /// Simulate a cohort from a DGP config.
    Simulate(SimulateArgs),
    /// Compute true curves under a DGP config.
    Oracle(OracleArgs),
    /// Estimate a curve from data.
    Estimate(EstimateArgs),
    /// Estimate a curve with bootstrap percentile bands.
    Bootstrap(BootstrapArgs),
    /// Compare an estimate with a truth curve.
    Report(ReportArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Wide,
    Long,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// DGP config in TOML.
    #[arg(long)]
    pub config: String,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_per_arm: Option<usize>,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long, value_enum, default_value = "wide")]
    pub format: Format,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum EstimandName {
    Total,
    TotalSurvival,
    Cde,
    Separable,
    SeparableSurvival,
    WhileAlive,
    AverageRate,
    CompositeSum,
    ReverseCount,
}

#[derive(Args, Debug, Clone)]
pub struct EstimandArgs {
    #[arg(long, value_enum)]
    pub estimand: EstimandName,
    /// Treatment arm for single-arm estimands.
    #[arg(long)]
    pub a: Option<u8>,
    #[arg(long)]
    pub ay: Option<u8>,
    #[arg(long)]
    pub ad: Option<u8>,
    /// Last grid index; defaults to k_max.
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub weight_d: f64,
    #[arg(long, default_value_t = 1.0)]
    pub weight_y: f64,
    #[arg(long, default_value_t = 1)]
    pub m: u32,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum OracleMethod {
    Exact,
    Mc,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[arg(long)]
    pub config: String,
    #[command(flatten)]
    pub estimand: EstimandArgs,
    #[arg(long, value_enum, default_value = "exact")]
    pub method: OracleMethod,
    /// Monte Carlo draws.
    #[arg(long, default_value_t = 1_000_000)]
    pub draws: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub csv: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum DiscreteMethod {
    Gformula,
    Ipw,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum EngineName {
    RiskSet,
    Hajek,
    Ht,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum SchemeName {
    ProductLimit,
    Euler,
}

#[derive(Args, Debug, Clone)]
pub struct EstimateArgs {
    /// Input CSV.
    #[arg(long = "in")]
    pub input: String,
    #[arg(long, value_enum, default_value = "wide")]
    pub format: Format,
    /// Number of intervals; inferred from wide headers.
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub dt: f64,
    #[arg(long, default_value_t = 0.0)]
    pub origin: f64,
    #[command(flatten)]
    pub estimand: EstimandArgs,
    /// Use a discrete estimator instead of a continuous engine.
    #[arg(long, value_enum)]
    pub discrete: Option<DiscreteMethod>,
    #[arg(long, value_enum, default_value = "risk-set")]
    pub engine: EngineName,
    /// Discrete history conditioning: `full` or `markov:<m>`.
    #[arg(long, default_value = "full")]
    pub history: String,
    /// Comma-separated L_D covariates; an empty string declares L_D empty.
    #[arg(long)]
    pub ld: Option<String>,
    /// Smoothing window for hazard ratios; defaults to five grid intervals.
    #[arg(long)]
    pub bandwidth: Option<f64>,
    #[arg(long, value_enum, default_value = "product-limit")]
    pub scheme: SchemeName,
    /// Error instead of carrying the last ratio when a hazard window is empty.
    #[arg(long)]
    pub strict_theta: bool,
    /// Leave theta^D out of risk-set separable-survival death increments.
    #[arg(long)]
    pub no_theta_risk_set: bool,
    #[arg(long)]
    pub csv: bool,
}

#[derive(Args, Debug)]
pub struct BootstrapArgs {
    #[command(flatten)]
    pub estimate: EstimateArgs,
    #[arg(long, default_value_t = 400)]
    pub reps: usize,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads; all cores when absent.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[arg(long)]
    pub estimate: String,
    #[arg(long)]
    pub oracle: String,
    #[arg(long)]
    pub csv: bool,
}

fn emit_error(kind: &str, class: &str, code: i32, message: &str) -> ExitCode {
    let body = serde_json::json!({ "error": kind, "class": class, "exit_code": code, "message": message });
    eprintln!("{body}");
    ExitCode::from(code as u8)
}

fn report_error(e: &Error) -> ExitCode {
    let class = format!("{:?}", e.class()).to_lowercase();
    emit_error(e.kind(), &class, e.class().exit_code(), &e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            return emit_error("UsageError", "usage", 2, e.render().to_string().trim());
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report_error(&e),
    }
}

use crate::output::Format;
use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use drawdown_core::inversion::InversionConfig;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Clone, Parser, Serialize, Deserialize)]
#[command(name = "ddfreq", version, about = "Drawdown frequencies of drifted Brownian motion")]
pub struct Cli {
    /// Decimals printed in table and CSV output.
    #[arg(long, global = true, default_value_t = 6)]
    pub digits: usize,

    /// Force JSON output.
    #[arg(long, global = true)]
    pub json: bool,

    /// Output format; defaults to an aligned table on a terminal and CSV otherwise.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    /// Write the main output to this file instead of standard output.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    /// Run-manifest path. Defaults to `<output>.manifest.json` with --output,
    /// otherwise the manifest is printed to standard error.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    /// Evaluate one closed-form quantity.
    Eval(EvalArgs),
    /// Recompute a published table (4.1, 4.2 or 5.1).
    Tables(TablesArgs),
    /// Monte Carlo CDF and rate estimates.
    Simulate(SimulateArgs),
    /// Drawdown episodes of an observed price series.
    Empirical(EmpiricalArgs),
    /// Price a drawdown insurance contract.
    Price(PriceArgs),
    /// Re-run a recorded command and compare output checksums.
    Replay(ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Eval(_) => "eval",
            Command::Tables(_) => "tables",
            Command::Simulate(_) => "simulate",
            Command::Empirical(_) => "empirical",
            Command::Price(_) => "price",
            Command::Replay(_) => "replay",
        }
    }
}

#[derive(Debug, Clone, Copy, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub mu: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub sigma: f64,
    /// Drawdown size.
    #[arg(long, allow_negative_numbers = true)]
    pub a: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub x0: f64,
}

#[derive(Debug, Clone, Copy, Args, Serialize, Deserialize)]
pub struct InversionArgs {
    #[arg(long, default_value_t = 15)]
    pub euler_terms: usize,
    #[arg(long, default_value_t = 15)]
    pub series_terms: usize,
    /// Target decimal precision of the inversion contour.
    #[arg(long, default_value_t = 8)]
    pub precision: u32,
}

impl InversionArgs {
    pub fn config(&self) -> drawdown_core::Result<InversionConfig> {
        InversionConfig::new(self.euler_terms, self.series_terms, self.precision)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormulaId {
    /// beta_plus and beta_minus at lambda.
    BetaRoots,
    /// The coefficients b and c at lambda.
    Coeffs,
    /// Adjustment coefficient gamma = 2 mu / sigma^2.
    Gamma,
    Kappa,
    ExpectedTau,
    LtTau,
    LtTauN,
    LtTauTildeN,
    ProbTildeFinite,
    LtTauNMaxTail,
    LtTauTildeNMaxTail,
    LtTauNValueTail,
    LtTauTildeNValueTail,
    ConstrainedPassageLt,
    JointDensityMaxValue,
    ProbMaxTail,
    ProbMaxTailMixedErlang,
    ProbTildeMaxTail,
    ProbValueTail,
    MixedErlangWeights,
    GenPoissonLink,
    LtMagnitudeCdf,
    FreqRate,
    /// CDF of the n-th drawdown time at t by numerical inversion.
    Cdf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EvalArgs {
    #[arg(value_enum)]
    pub formula: FormulaId,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    /// Episode index.
    #[arg(long)]
    pub n: Option<u32>,
    #[arg(long, allow_negative_numbers = true)]
    pub x: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub y: Option<f64>,
    /// Recovery-episode index of the generalized-Poisson link.
    #[arg(long)]
    pub k: Option<u32>,
    /// Non-recovered episodes in the generalized-Poisson link.
    #[arg(long)]
    pub m: Option<u64>,
    #[arg(long)]
    pub t: Option<f64>,
    /// Use the episodes with recovery.
    #[arg(long, action = ArgAction::Set, default_value_t = false)]
    pub recovery: bool,
    #[command(flatten)]
    pub inversion: InversionArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TablesArgs {
    /// 4.1, 4.2 or 5.1.
    pub which: String,
    /// Exit with status 3 if any cell misses its published value by more than 5e-4.
    #[arg(long)]
    pub check: bool,
    #[command(flatten)]
    pub inversion: InversionArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, default_value_t = 1e-4)]
    pub dt: f64,
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 10_000)]
    pub paths: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Evaluation time of the CDF estimates; defaults to the horizon.
    #[arg(long)]
    pub t: Option<f64>,
    /// Estimate P{n-th episode by t} for n = 1..=n-max.
    #[arg(long, default_value_t = 3)]
    pub n_max: u32,
    /// Comma-separated monitoring strides; stride s observes every s-th grid point.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub strides: Vec<usize>,
    /// Also estimate long-run episode rates over the horizon.
    #[arg(long)]
    pub rates: bool,
    /// Append analytic values and z-scores.
    #[arg(long)]
    pub compare_analytic: bool,
    /// Add rows extrapolated to dt -> 0 from the first stride (which must be 1)
    /// and the last, cancelling the leading sqrt(dt) monitoring bias.
    #[arg(long)]
    pub extrapolate: bool,
    /// Write every detected episode to this file (JSON if it ends in .json, CSV otherwise).
    #[arg(long)]
    pub episodes: Option<PathBuf>,
    #[command(flatten)]
    pub inversion: InversionArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct EmpiricalArgs {
    /// CSV file with header `time,price`.
    #[arg(long)]
    pub input: PathBuf,
    /// Relative drawdown size; requires --log.
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    /// Absolute drawdown size of the monitored level.
    #[arg(long, conflicts_with = "alpha", allow_negative_numbers = true)]
    pub a: Option<f64>,
    /// Monitor the log-price.
    #[arg(long)]
    pub log: bool,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PriceArgs {
    /// JSON contract document with the fields alpha, r, maturity, payoff_type, recovery.
    /// Contract flags given on the command line override it.
    #[arg(long)]
    pub contract: Option<PathBuf>,
    /// 1 (count paid at maturity) or 2 (paid at each episode).
    #[arg(long = "type")]
    pub payoff: Option<String>,
    #[arg(long, action = ArgAction::Set)]
    pub recovery: Option<bool>,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub r: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub sigma: f64,
    #[arg(long = "T", allow_negative_numbers = true)]
    pub maturity: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub s0: f64,
    /// Sum per-episode terms instead of inverting the closed form.
    #[arg(long)]
    pub series: bool,
    /// Truncation tolerance of the per-episode series.
    #[arg(long, default_value_t = 1e-6)]
    pub series_tolerance: f64,
    #[command(flatten)]
    pub inversion: InversionArgs,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ReplayArgs {
    pub manifest_path: PathBuf,
}

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod error;
mod settings;

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "foukit", version, about = "Fractional iterated Ornstein-Uhlenbeck toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug)]
pub struct Common {
    /// Master seed for random draws.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "FOUKIT_THREADS")]
    pub threads: Option<usize>,
    /// JSON settings for the command; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Primary output file (stdout when absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate a sample path and write it as `t,x` CSV.
    Simulate(SimulateArgs),
    /// Estimate H, sigma and the rates from a series.
    Fit(FitArgs),
    /// Monte Carlo study over a grid of horizons and sample sizes.
    McStudy(McStudyArgs),
    /// One-step predictions, quality measures and horizon selection.
    Forecast(ForecastArgs),
    /// Autocovariance on a lag grid.
    Acvf(AcvfArgs),
    /// Spectral density on a frequency grid.
    Spectrum(SpectrumArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum MethodArg {
    Exact,
    Operator,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum PreprocessArg {
    None,
    Demean,
    Detrend,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum CriterionArg {
    Rmse,
    Mae,
    W1,
    W2,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Model JSON file.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Horizon T.
    #[arg(long = "horizon", short = 'T')]
    pub horizon: Option<f64>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    #[arg(long)]
    pub burn_in: Option<f64>,
    #[arg(long)]
    pub inner_refinement: Option<usize>,
}

#[derive(Args, Debug, Default)]
pub struct FitFlags {
    /// Series file (one value per line, or `time,value` CSV).
    #[arg(long)]
    pub series: Option<PathBuf>,
    /// Horizon T the series is placed on.
    #[arg(long = "horizon", short = 'T')]
    pub horizon: Option<f64>,
    /// Rate multiplicities, e.g. `2` or `1,1`.
    #[arg(long)]
    pub structure: Option<String>,
    /// `daubechies2` or a filter JSON file.
    #[arg(long)]
    pub filter: Option<String>,
    /// Whittle settings JSON file.
    #[arg(long)]
    pub whittle: Option<PathBuf>,
    /// Hold sigma fixed at this value.
    #[arg(long, conflicts_with = "estimate_sigma")]
    pub sigma: Option<f64>,
    /// Estimate sigma even if the config fixes it.
    #[arg(long)]
    pub estimate_sigma: bool,
    /// Hold H fixed at this value.
    #[arg(long)]
    pub hurst: Option<f64>,
    #[arg(long, value_enum)]
    pub preprocess: Option<PreprocessArg>,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[command(flatten)]
    pub fit: FitFlags,
}

#[derive(Args, Debug)]
pub struct McStudyArgs {
    /// Replications per cell.
    #[arg(long)]
    pub replications: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ForecastArgs {
    #[command(flatten)]
    pub fit: FitFlags,
    /// Fitted model JSON (model document or fit report).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Number of held-out one-step predictions.
    #[arg(long)]
    pub m: Option<usize>,
    /// Comma-separated horizons to choose from.
    #[arg(long)]
    pub select_t: Option<String>,
    #[arg(long, value_enum)]
    pub criterion: Option<CriterionArg>,
    /// Refit the model on each prefix before predicting.
    #[arg(long)]
    pub refit: bool,
    /// Where to write the per-T table (`.json` for JSON, CSV otherwise).
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AcvfArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Comma-separated lags.
    #[arg(long)]
    pub lags: Option<String>,
    #[arg(long)]
    pub max_lag: Option<f64>,
    #[arg(long)]
    pub step: Option<f64>,
    /// Series for an empirical autocovariance column.
    #[arg(long)]
    pub series: Option<PathBuf>,
    #[arg(long = "horizon", short = 'T')]
    pub horizon: Option<f64>,
}

#[derive(Args, Debug)]
pub struct SpectrumArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Comma-separated frequencies.
    #[arg(long, allow_hyphen_values = true)]
    pub freqs: Option<String>,
    #[arg(long)]
    pub max_freq: Option<f64>,
    #[arg(long)]
    pub step: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.common.threads {
        if n == 0 {
            eprintln!("usage error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: could not size the thread pool: {e}");
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

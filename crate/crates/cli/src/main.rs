//! `tsvar`: fit supOU models to hourly discharge records and evaluate
//! Tsallis Value-at-Risk bounds of their inverse moment.
//!
//! Every table is written as CSV (stdout unless `--output` is given). Errors
//! go to stderr as `error[<category>]: <message>` with a category-specific
//! exit status.

mod commands;
mod model_file;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tsvar_core::{ErrorCategory, Scheme, Side};

#[derive(Parser)]
#[command(name = "tsvar", version, about = "Robust inverse-moment bounds for supOU discharge models")]
struct Cli {
    /// Worker threads for table and sweep cells (default: all cores).
    #[arg(long, global = true, env = "TSVAR_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Identify a model from a `timestamp,discharge` CSV and write it as JSON.
    Fit(FitArgs),
    /// Stationary statistics of a model.
    Stats(StatsArgs),
    /// One TsVaR value.
    Tsvar(TsvarArgs),
    /// Resolution study: values and errors against the finest resolution.
    Converge(ConvergeArgs),
    /// TsVaR along an accuracy grid or worst-case scenarios along an aversion grid.
    Sweep(SweepArgs),
    /// Worst-case Radon–Nikodym derivative on the quantile nodes.
    Rnderiv(RnderivArgs),
}

#[derive(Args)]
pub struct ModelArg {
    /// Model JSON file, or `builtin:<station>` (tsurugi, nakajima, kazarashi).
    #[arg(long)]
    pub model: String,
}

#[derive(Args)]
pub struct OutputArg {
    /// Write the table here instead of stdout.
    #[arg(long)]
    pub output: Option<std::path::PathBuf>,
}

#[derive(Args)]
pub struct Resolution {
    /// Number of quantile nodes.
    #[arg(long, conflicts_with = "m")]
    pub n: Option<usize>,
    /// log2 of the number of quantile nodes.
    #[arg(long)]
    pub m: Option<u32>,
}

impl Resolution {
    pub fn nodes(&self) -> usize {
        match (self.n, self.m) {
            (Some(n), _) => n,
            (None, Some(m)) => 1usize << m,
            (None, None) => tsvar_core::solver::DEFAULT_NODES,
        }
    }
}

#[derive(Args)]
pub struct FitArgs {
    #[arg(long)]
    pub input: std::path::PathBuf,
    #[arg(long)]
    pub output: std::path::PathBuf,
    /// Largest autocorrelation lag examined, in hours.
    #[arg(long)]
    pub max_lag: Option<usize>,
    /// Station name recorded in the model metadata.
    #[arg(long)]
    pub station: Option<String>,
}

#[derive(Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub model: ModelArg,
    #[command(flatten)]
    pub output: OutputArg,
}

#[derive(Args)]
pub struct TsvarArgs {
    #[command(flatten)]
    pub model: ModelArg,
    #[arg(long, value_parser = parse_side)]
    pub side: Side,
    /// Shape parameter (default 0.33 upper, 1.33 lower).
    #[arg(long)]
    pub q: Option<f64>,
    /// Accuracy parameter in (0, 1].
    #[arg(long)]
    pub a: f64,
    #[command(flatten)]
    pub resolution: Resolution,
    /// Quadrature scheme (default: tilted for upper, plain for lower).
    #[arg(long, value_parser = parse_scheme)]
    pub scheme: Option<Scheme>,
    #[command(flatten)]
    pub output: OutputArg,
}

#[derive(Args)]
pub struct ConvergeArgs {
    #[command(flatten)]
    pub model: ModelArg,
    #[arg(long, value_parser = parse_side)]
    pub side: Side,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub a: f64,
    /// Range of log2 resolutions, `lo:hi` inclusive.
    #[arg(long, default_value = "12:17")]
    pub m_range: String,
    /// Comma-separated schemes (default: plain,tilted upper; plain lower).
    #[arg(long)]
    pub schemes: Option<String>,
    #[command(flatten)]
    pub output: OutputArg,
}

#[derive(Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub model: ModelArg,
    #[arg(long, value_parser = parse_side)]
    pub side: Side,
    /// One or more comma-separated shape parameters.
    #[arg(long)]
    pub q: Option<String>,
    /// Sweep variable: `a` (accuracy) or `lambda0` (ambiguity aversion).
    #[arg(long, default_value = "a")]
    pub over: String,
    /// Grid `start:stop:points[:log]`; lambda0 defaults to 1e-3:1e3:241:log.
    #[arg(long)]
    pub grid: Option<String>,
    #[command(flatten)]
    pub resolution: Resolution,
    #[arg(long, value_parser = parse_scheme)]
    pub scheme: Option<Scheme>,
    #[command(flatten)]
    pub output: OutputArg,
}

#[derive(Args)]
pub struct RnderivArgs {
    #[command(flatten)]
    pub model: ModelArg,
    #[arg(long, value_parser = parse_side)]
    pub side: Side,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub lambda0: f64,
    #[command(flatten)]
    pub resolution: Resolution,
    #[command(flatten)]
    pub output: OutputArg,
}

fn parse_side(s: &str) -> Result<Side, String> {
    s.parse().map_err(|e: tsvar_core::Error| e.to_string())
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse().map_err(|e: tsvar_core::Error| e.to_string())
}

/// Process exit status for each error category; 2 is left to argument errors.
pub fn exit_code(c: ErrorCategory) -> u8 {
    match c {
        ErrorCategory::Parse => 10,
        ErrorCategory::Grid => 11,
        ErrorCategory::Feasibility => 12,
        ErrorCategory::Convergence => 13,
        ErrorCategory::Io => 14,
        ErrorCategory::Domain => 15,
        ErrorCategory::Alignment => 16,
        ErrorCategory::Degenerate => 17,
        ErrorCategory::Boundary => 18,
        ErrorCategory::Infeasible => 19,
        ErrorCategory::InvalidParameter => 20,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        // Fails only if a pool already exists, which cannot happen this early.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let result = match cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Stats(a) => commands::stats(a),
        Command::Tsvar(a) => commands::tsvar(a),
        Command::Converge(a) => commands::converge(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Rnderiv(a) => commands::rnderiv(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let cat = e.category();
            eprintln!("error[{}]: {e}", cat.as_str());
            ExitCode::from(exit_code(cat))
        }
    }
}

//! `lighttrail` command-line front end.
//!
//! Exit status: 0 on success, 1 for usage or configuration errors, 2 when a
//! validation check fails.

mod checks;
mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "lighttrail", version, about = "Rotating-LED image sensor link simulator")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Key-value configuration file; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random draw.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker thread cap.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// LED index (1-based); defaults to the configured scenario LED.
    #[arg(long, global = true)]
    pub led: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render one frame: noise-free and, with --seed, noisy.
    Render(RenderArgs),
    /// Centroid pixel-value histograms by transmitted bit.
    Histogram(HistogramArgs),
    /// BER versus distance for analytic and Monte Carlo modes.
    Ber(BerArgs),
    /// Control-angle optimization under a BER target.
    Optimize(OptimizeArgs),
    /// Invariant checks on the configured scenario.
    Validate,
}

#[derive(Args, Debug)]
pub struct RenderArgs {
    /// Bit string of length J, e.g. 101100...
    #[arg(long, conflicts_with = "random")]
    pub bits: Option<String>,
    /// Draw the bits from --seed.
    #[arg(long)]
    pub random: bool,
}

#[derive(Args, Debug)]
pub struct HistogramArgs {
    #[arg(long, default_value_t = 5000)]
    pub n_bits: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum BerMode {
    Analytic,
    Mc,
    NoIsi,
    K2,
    AllSegment,
}

impl BerMode {
    pub fn name(self) -> &'static str {
        match self {
            BerMode::Analytic => "analytic",
            BerMode::Mc => "mc",
            BerMode::NoIsi => "no_isi",
            BerMode::K2 => "k2",
            BerMode::AllSegment => "all_segment",
        }
    }
}

#[derive(Args, Debug)]
pub struct BerArgs {
    /// `start:stop:step` or a comma-separated list, in meters.
    #[arg(long, default_value = "46:62:2")]
    pub distances: String,
    #[arg(long, value_delimiter = ',', default_value = "analytic,mc")]
    pub modes: Vec<BerMode>,
    #[arg(long, default_value_t = 1_000_000)]
    pub n_bits: u64,
}

#[derive(Args, Debug)]
pub struct OptimizeArgs {
    #[arg(long, default_value = "46:62:2")]
    pub distances: String,
    /// Defaults to the configured target.
    #[arg(long)]
    pub target_ber: Option<f64>,
    /// Also write BER and throughput for every candidate J of --led.
    #[arg(long)]
    pub throughput: bool,
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Validation(String),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Usage(e.into())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.common.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match &cli.command {
        Command::Render(a) => commands::render(&cli.common, a),
        Command::Histogram(a) => commands::histogram(&cli.common, a),
        Command::Ber(a) => commands::ber(&cli.common, a),
        Command::Optimize(a) => commands::optimize(&cli.common, a),
        Command::Validate => commands::validate(&cli.common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Validation(msg)) => {
            eprintln!("validation failed: {msg}");
            ExitCode::from(2)
        }
    }
}

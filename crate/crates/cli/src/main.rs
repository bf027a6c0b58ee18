mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Early-warning signals for multivariate time series.
#[derive(Debug, Parser)]
#[command(name = "ewscope", version, about)]
struct Cli {
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a plant-pollinator community to CSV.
    Simulate(SimulateArgs),
    /// Run indicators on a CSV series and report detections.
    Analyze(AnalyzeArgs),
    /// Run a detection-rate experiment described by a JSON file.
    Benchmark(BenchmarkArgs),
    /// Evidence over a grid of detrending bandwidths and window/length scales.
    Sensitivity(SensitivityArgs),
    /// Build surrogate null distributions into the cache directory.
    NullCache(NullCacheArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    seed: u64,
    /// Total number of species; pollinators get the smaller half when odd.
    #[arg(long, default_value_t = 10)]
    dims: usize,
    /// Pollinators whose growth rate is ramped down.
    #[arg(long, default_value_t = 5)]
    perturbed: usize,
    #[arg(long, default_value_t = 150)]
    length: usize,
    #[arg(long, default_value_t = 0.0)]
    obs_error: f64,
    /// Output CSV; a `.json` sidecar with run metadata is written next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Series CSV with header `time,<feature>...`.
    input: PathBuf,
    /// Comma-separated indicator names.
    #[arg(long, value_delimiter = ',', default_value = "ac_mean,ac_max,ac_pc1,ac_maf,var_maf,eigen_maf,ac_pooled")]
    indicators: Vec<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = ewscope::DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Surrogate series per null distribution.
    #[arg(long, default_value_t = 200)]
    surrogates: usize,
    #[arg(long, default_value_t = 0.1)]
    bandwidth: f64,
    /// Sliding window as a fraction of the series length.
    #[arg(long, default_value_t = 0.5)]
    window: f64,
    /// Observation error assumed for surrogate simulations.
    #[arg(long, default_value_t = 0.0)]
    obs_error: f64,
    /// Sampler iterations per chain, warmup included.
    #[arg(long, default_value_t = 2000)]
    iterations: usize,
    #[arg(long, default_value = "ewscope-out")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct BenchmarkArgs {
    /// Experiment JSON (see schemas/experiment.v1.schema.json).
    experiment: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    surrogates: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, default_value = "ewscope-bench")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SensitivityArgs {
    input: PathBuf,
    /// Grid JSON (see schemas/sensitivity.v1.schema.json); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    surrogates: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, default_value = "ewscope-sensitivity")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct NullCacheArgs {
    /// Null scenario JSON (see schemas/null-scenario.v1.schema.json).
    scenario: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "ac_mean,ac_max,ac_pc1,ac_maf,var_maf,eigen_maf")]
    indicators: Vec<String>,
    #[arg(long, default_value_t = ewscope::surrogate::DEFAULT_REPLICATES)]
    surrogates: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cache directory; overrides EWSCOPE_CACHE_DIR.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} workers: {e}");
            return ExitCode::from(1);
        }
    }
    let outcome = match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Analyze(a) => commands::analyze(a),
        Command::Benchmark(a) => commands::benchmark(a),
        Command::Sensitivity(a) => commands::sensitivity(a),
        Command::NullCache(a) => commands::null_cache(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use ewscope::bench::{run_sweep, sensitivity_grid, CellResult, ExperimentGrid, Method, SensitivityConfig};
use ewscope::indicators::{trajectories_from_residuals, IndicatorName, WindowSpec};
use ewscope::rng::stream_hash;
use ewscope::simulator::{simulate_viable, SamplingKnobs, SimConfig};
use ewscope::{
    build_nulls, detrend_gaussian, sample_posterior, surrogate_p, DetectionResult, EwsError, MultiSeries, NullCache,
    NullDistribution, NullScenario, PvarModelSpec, RngStream, SamplerSettings,
};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::{AnalyzeArgs, BenchmarkArgs, NullCacheArgs, SensitivityArgs, SimulateArgs};

pub const CACHE_ENV: &str = "EWSCOPE_CACHE_DIR";
const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] EwsError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{0}")]
    Usage(String),
}

type Result<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| CliError::Json { path: path.into(), source })?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.into(), source })
}

fn make_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(io_err(path))
}

fn env_cache() -> Option<NullCache> {
    std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(NullCache::new)
}

fn parse_methods(names: &[String]) -> Result<Vec<Method>> {
    let mut out: Vec<Method> = Vec::new();
    for name in names.iter().map(|s| s.trim()).filter(|s| !s.is_empty()) {
        let m = Method::from_str(name).map_err(|_| {
            CliError::Usage(format!("unknown indicator `{name}`; valid names: {}", Method::valid_names()))
        })?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(CliError::Usage(format!("no indicators given; valid names: {}", Method::valid_names())));
    }
    Ok(out)
}

pub fn simulate(args: SimulateArgs) -> Result<ExitCode> {
    let n_pollinators = args.dims / 2;
    let n_plants = args.dims - n_pollinators;
    let cfg = SimConfig { length: args.length, obs_error_sd: args.obs_error, ..SimConfig::default() };
    let knobs = SamplingKnobs::default();
    let rng = RngStream::new(args.seed, 0).derive("simulate", 0);
    let outcome = simulate_viable(n_pollinators, n_plants, args.perturbed, &knobs, &cfg, &rng)?;
    if let Some(dir) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        make_dir(dir)?;
    }
    outcome.series.write_csv_path(&args.out)?;
    let manifest = json!({
        "command": "simulate",
        "version": VERSION,
        "seed": args.seed,
        "n_pollinators": n_pollinators,
        "n_plants": n_plants,
        "perturbed": args.perturbed,
        "sim": cfg,
        "knobs": knobs,
        "collapsed": outcome.collapsed,
        "collapse_time": outcome.collapse_time,
        "retained_length": outcome.series.len(),
        "n_resamples": outcome.n_resamples,
        "params": outcome.params,
    });
    write_json(&args.out.with_extension("json"), &manifest)?;
    println!(
        "wrote {} ({} points, {})",
        args.out.display(),
        outcome.series.len(),
        match outcome.collapse_time {
            Some(t) => format!("collapsed at t = {t}"),
            None => "no collapse".to_string(),
        }
    );
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct Failure {
    indicator: String,
    error: String,
}

pub fn analyze(args: AnalyzeArgs) -> Result<ExitCode> {
    let methods = parse_methods(&args.indicators)?;
    if methods.contains(&Method::RandomGuess) {
        return Err(CliError::Usage("random_guess is a benchmark baseline, not an indicator".into()));
    }
    let series = MultiSeries::read_csv_path(&args.input)?;
    make_dir(&args.out)?;

    let residuals = detrend_gaussian(&series, args.bandwidth)?;
    let window = WindowSpec { window_frac: args.window, stride: 1 };
    let window_names: Vec<IndicatorName> = methods
        .iter()
        .filter_map(|m| if let Method::Window(n) = m { Some(*n) } else { None })
        .collect();

    let mut detections: Vec<DetectionResult> = Vec::new();
    let mut failures: Vec<Failure> = Vec::new();
    let mut fail = |indicator: &str, e: &dyn std::fmt::Display| {
        eprintln!("warning: {indicator}: {e}");
        failures.push(Failure { indicator: indicator.to_string(), error: e.to_string() });
    };

    let null_seed = stream_hash(args.seed, "null", 0);
    let mut scenario = None;
    if !window_names.is_empty() {
        let dim = series.dim();
        let s = NullScenario {
            n_pollinators: dim / 2,
            n_plants: dim - dim / 2,
            length: series.len(),
            window,
            bandwidth_frac: args.bandwidth,
            knobs: SamplingKnobs::default(),
            sim: SimConfig { obs_error_sd: args.obs_error, ..SimConfig::default() },
        };
        let nulls: std::result::Result<Vec<NullDistribution>, EwsError> = match env_cache() {
            Some(cache) => cache.get_or_build(&s, &window_names, args.surrogates, null_seed),
            None => build_nulls(&s, &window_names, args.surrogates, null_seed),
        };
        match nulls {
            Ok(nulls) => {
                for (name, null) in window_names.iter().zip(&nulls) {
                    let outcome = trajectories_from_residuals(&residuals, &[*name], &window).and_then(|mut ts| {
                        let traj = ts.remove(0);
                        let path = args.out.join(format!("trajectory_{name}.csv"));
                        let file = File::create(&path).map_err(|e| EwsError::Io { path: path.clone(), source: e })?;
                        traj.write_csv(BufWriter::new(file)).map_err(|e| EwsError::Io { path, source: e })?;
                        surrogate_p(traj.tau.tau, null, args.threshold)
                    });
                    match outcome {
                        Ok(d) => detections.push(d),
                        Err(e) => fail(name.as_str(), &e),
                    }
                }
            }
            Err(e) => {
                for name in &window_names {
                    fail(name.as_str(), &format!("null distribution: {e}"));
                }
            }
        }
        scenario = Some(s);
    }

    let model = PvarModelSpec::default();
    let sampler = SamplerSettings { n_iterations: args.iterations, ..SamplerSettings::default() };
    if methods.contains(&Method::Pooled) {
        let name = Method::Pooled.as_str();
        let rng = RngStream::new(args.seed, 0).derive("pooled", 0);
        match sample_posterior(&residuals, &model, &sampler, &rng) {
            Ok(post) => {
                let quantiles = args.out.join("pooled_phi_quantiles.csv");
                post.write_phi_quantiles_csv(create(&quantiles)?)?;
                write_json(&args.out.join("pooled_posterior.json"), &post.summary_json())?;
                match post.bayesian_p(args.threshold) {
                    Ok(d) => detections.push(d),
                    Err(e) => fail(name, &e),
                }
            }
            Err(e) => fail(name, &e),
        }
    }

    write_json(&args.out.join("detections.json"), &detections)?;
    let manifest = json!({
        "command": "analyze",
        "version": VERSION,
        "input": args.input,
        "seed": args.seed,
        "null_seed": null_seed,
        "indicators": methods,
        "threshold": args.threshold,
        "surrogates": args.surrogates,
        "bandwidth_frac": args.bandwidth,
        "window": window,
        "null_scenario": scenario,
        "null_fingerprint": scenario.as_ref().map(NullScenario::fingerprint),
        "model": model,
        "sampler": sampler,
        "failures": failures,
    });
    write_json(&args.out.join("manifest.json"), &manifest)?;

    for d in &detections {
        println!(
            "{:<10} evidence {:.4}  {}",
            d.indicator,
            d.evidence,
            if d.detected { "DETECTED" } else { "not detected" }
        );
    }
    Ok(if failures.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

pub fn benchmark(args: BenchmarkArgs) -> Result<ExitCode> {
    let mut grid: ExperimentGrid = read_json(&args.experiment)?;
    if let Some(r) = args.replicates {
        grid.replicates = r;
    }
    if let Some(s) = args.surrogates {
        grid.surrogates = s;
    }
    if let Some(t) = args.threshold {
        grid.detection_threshold = t;
    }
    grid.validate()?;
    make_dir(&args.out)?;

    let cache = env_cache();
    let output = run_sweep(&grid, args.seed, cache.as_ref())?;
    output.result.write_results_csv(create(&args.out.join("results.csv"))?)?;
    let manifest = json!({
        "command": "benchmark",
        "version": VERSION,
        "experiment": args.experiment,
        "seed": args.seed,
        "grid": grid,
        "cache_dir": cache.as_ref().map(|c| c.dir().to_path_buf()),
        "run": output.manifest,
    });
    write_json(&args.out.join("manifest.json"), &manifest)?;

    print_table(&grid, &output.result.cells);
    if let Ok(a) = output.result.anova() {
        println!("ANOVA across methods: F({}, {}) = {:.3}, p = {:.4}", a.df_between, a.df_within, a.f, a.p_value);
    }
    if grid.sweep_values.len() > 1 {
        for &m in &grid.indicators {
            if let Ok(t) = output.result.trend(m) {
                println!("trend {:<12} z = {:+.3}, p(increasing) = {:.4}", m.as_str(), t.z, t.p_increasing);
            }
        }
    }
    for w in &output.manifest.warnings {
        eprintln!("warning: {w}");
    }
    Ok(ExitCode::SUCCESS)
}

fn print_table(grid: &ExperimentGrid, cells: &[CellResult]) {
    let mut rows: BTreeMap<usize, (f64, BTreeMap<usize, String>)> = BTreeMap::new();
    for c in cells {
        let col = grid.indicators.iter().position(|&m| m == c.indicator).unwrap_or(usize::MAX);
        let row = grid.sweep_values.iter().position(|&v| v == c.sweep_value).unwrap_or(usize::MAX);
        let text = match (c.valid, c.estimate) {
            (true, Some(e)) => format!("{e:.2}"),
            _ => "NA".to_string(),
        };
        rows.entry(row).or_insert((c.sweep_value, BTreeMap::new())).1.insert(col, text);
    }
    let metric = grid.mode.as_str().to_uppercase();
    print!("{metric} by {:<16}", grid.sweep_variable.as_str());
    for m in &grid.indicators {
        print!(" {:>12}", m.as_str());
    }
    println!();
    for (value, cols) in rows.values() {
        print!("{:<w$}", value, w = metric.len() + 20);
        for k in 0..grid.indicators.len() {
            print!(" {:>12}", cols.get(&k).map(String::as_str).unwrap_or("NA"));
        }
        println!();
    }
}

pub fn sensitivity(args: SensitivityArgs) -> Result<ExitCode> {
    let mut config: SensitivityConfig = match &args.config {
        Some(path) => read_json(path)?,
        None => SensitivityConfig::default(),
    };
    if let Some(s) = args.surrogates {
        config.surrogates = s;
    }
    if let Some(t) = args.threshold {
        config.detection_threshold = t;
    }
    config.validate()?;
    let series = MultiSeries::read_csv_path(&args.input)?;
    make_dir(&args.out)?;

    let cache = env_cache();
    let result = sensitivity_grid(&series, &config, args.seed, cache.as_ref())?;
    result.write_heatmap_csv(create(&args.out.join("heatmap.csv"))?)?;
    let missing: Vec<_> = result.cells.iter().filter(|c| c.error.is_some()).collect();
    let manifest = json!({
        "command": "sensitivity",
        "version": VERSION,
        "input": args.input,
        "seed": args.seed,
        "config": config,
        "series_length": result.series_length,
        "cells": result.cells,
    });
    write_json(&args.out.join("manifest.json"), &manifest)?;
    println!("{} cells, {} missing", result.cells.len(), missing.len());
    Ok(ExitCode::SUCCESS)
}

pub fn null_cache(args: NullCacheArgs) -> Result<ExitCode> {
    let scenario: NullScenario = read_json(&args.scenario)?;
    let names: Vec<IndicatorName> = args
        .indicators
        .iter()
        .map(|s| IndicatorName::from_str(s.trim()))
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| {
            let valid: Vec<&str> = IndicatorName::ALL.iter().map(|n| n.as_str()).collect();
            CliError::Usage(format!("{e}; valid names: {}", valid.join(", ")))
        })?;
    let cache = match args.cache_dir.map(NullCache::new).or_else(env_cache) {
        Some(c) => c,
        None => return Err(CliError::Usage(format!("no cache directory: pass --cache-dir or set {CACHE_ENV}"))),
    };
    let null_seed = stream_hash(args.seed, "null", 0);
    let nulls = cache.get_or_build(&scenario, &names, args.surrogates, null_seed)?;
    for n in &nulls {
        println!(
            "{}  mean tau {:+.4}  R = {}",
            cache.path_for(&n.fingerprint, n.indicator).display(),
            n.mean_tau(),
            n.replicates
        );
    }
    Ok(ExitCode::SUCCESS)
}

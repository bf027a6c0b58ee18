//! Detection-rate experiments over simulated communities.

mod analysis;
mod sensitivity;

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use analysis::{cochran_armitage, one_way_anova, wilson_interval, AnovaResult, TrendTest};
pub use sensitivity::{sensitivity_grid, SensitivityCell, SensitivityConfig, SensitivityResult};

use crate::detection::{DetectionResult, EvidenceKind, DEFAULT_THRESHOLD};
use crate::detrend::{detrend_gaussian, ResidualSeries};
use crate::error::{EwsError, Result};
use crate::indicators::{trajectories_from_residuals, IndicatorName, WindowSpec};
use crate::pvar::{sample_posterior, PvarModelSpec, SamplerSettings};
use crate::rng::{stream_hash, RngStream};
use crate::series::MultiSeries;
use crate::simulator::{simulate_viable, SamplingKnobs, SimConfig};
use crate::surrogate::{build_nulls, surrogate_p, NullCache, NullDistribution, NullScenario};

pub const MAX_TOTAL_DIMS: usize = 50;
pub const MAX_LENGTH: usize = 1000;
/// Detection probability of the random-guess baseline.
pub const RANDOM_GUESS_RATE: f64 = 0.1;
/// Redraws allowed when a constant-condition replicate collapses.
const MAX_CONSTANT_REDRAWS: u64 = 100;

/// A detection method: a sliding-window indicator tested against
/// surrogates, the pooled Bayesian indicator, or a data-blind baseline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    Window(IndicatorName),
    Pooled,
    RandomGuess,
}

impl Method {
    pub fn all() -> Vec<Method> {
        IndicatorName::ALL
            .into_iter()
            .map(Method::Window)
            .chain([Method::Pooled, Method::RandomGuess])
            .collect()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Window(n) => n.as_str(),
            Method::Pooled => crate::pvar::INDICATOR_NAME,
            Method::RandomGuess => "random_guess",
        }
    }

    pub fn valid_names() -> String {
        Method::all().iter().map(|m| m.as_str()).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = EwsError;

    fn from_str(s: &str) -> Result<Self> {
        Method::all()
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| EwsError::invalid(format!("unknown indicator `{s}`; valid names: {}", Method::valid_names())))
    }
}

impl TryFrom<String> for Method {
    type Error = EwsError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.as_str().to_string()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    PerturbedDims,
    ObsError,
    SeriesLength,
    TotalDims,
}

impl SweepVariable {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepVariable::PerturbedDims => "perturbed_dims",
            SweepVariable::ObsError => "obs_error",
            SweepVariable::SeriesLength => "series_length",
            SweepVariable::TotalDims => "total_dims",
        }
    }
}

/// Whether replicates are perturbed towards collapse (true positive rate)
/// or held at constant conditions (true negative rate).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Tpr,
    Tnr,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Tpr => "tpr",
            Mode::Tnr => "tnr",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixedSettings {
    pub total_dims: usize,
    pub length: usize,
    pub obs_error_sd: f64,
    pub perturbed: usize,
}

impl Default for FixedSettings {
    fn default() -> Self {
        Self { total_dims: 10, length: 150, obs_error_sd: 0.0, perturbed: 5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentGrid {
    pub name: Option<String>,
    pub sweep_variable: SweepVariable,
    pub sweep_values: Vec<f64>,
    pub fixed: FixedSettings,
    pub mode: Mode,
    pub replicates: usize,
    /// Surrogate ensemble size per null distribution.
    pub surrogates: usize,
    pub indicators: Vec<Method>,
    pub detection_threshold: f64,
    pub window: WindowSpec,
    pub bandwidth_frac: f64,
    pub knobs: SamplingKnobs,
    pub model: PvarModelSpec,
    pub sampler: SamplerSettings,
}

impl Default for ExperimentGrid {
    fn default() -> Self {
        Self {
            name: None,
            sweep_variable: SweepVariable::PerturbedDims,
            sweep_values: vec![1.0, 2.0, 3.0, 4.0, 5.0],
            fixed: FixedSettings::default(),
            mode: Mode::Tpr,
            replicates: 20,
            surrogates: 200,
            indicators: Method::all(),
            detection_threshold: DEFAULT_THRESHOLD,
            window: WindowSpec::default(),
            bandwidth_frac: 0.1,
            knobs: SamplingKnobs::default(),
            model: PvarModelSpec::default(),
            sampler: SamplerSettings::default(),
        }
    }
}

/// Community and series settings of one sweep value.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellConfig {
    pub value: f64,
    pub n_pollinators: usize,
    pub n_plants: usize,
    pub perturbed: usize,
    pub length: usize,
    pub obs_error_sd: f64,
}

fn as_count(v: f64, what: &str) -> Result<usize> {
    if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(EwsError::invalid(format!("{what} must be a nonnegative integer, got {v}")))
    }
}

impl ExperimentGrid {
    pub fn validate(&self) -> Result<()> {
        if self.sweep_values.is_empty() {
            return Err(EwsError::invalid("sweep_values is empty"));
        }
        if self.replicates == 0 || self.surrogates == 0 {
            return Err(EwsError::invalid("replicates and surrogates must be positive"));
        }
        if self.indicators.is_empty() {
            return Err(EwsError::invalid("indicators is empty"));
        }
        if !(self.detection_threshold > 0.0 && self.detection_threshold <= 1.0) {
            return Err(EwsError::invalid("detection_threshold must be in (0, 1]"));
        }
        if !(self.bandwidth_frac > 0.0 && self.bandwidth_frac <= 1.0) {
            return Err(EwsError::invalid("bandwidth_frac must be in (0, 1]"));
        }
        self.model.validate()?;
        self.sampler.validate()?;
        for cell in self.cells()? {
            cell.validate()?;
            self.window.length(cell.length)?;
        }
        Ok(())
    }

    pub fn cells(&self) -> Result<Vec<CellConfig>> {
        self.sweep_values.iter().map(|&v| self.cell(v)).collect()
    }

    fn cell(&self, value: f64) -> Result<CellConfig> {
        let f = &self.fixed;
        let (mut total, mut perturbed, mut length, mut obs) = (f.total_dims, f.perturbed, f.length, f.obs_error_sd);
        match self.sweep_variable {
            SweepVariable::PerturbedDims => perturbed = as_count(value, "perturbed_dims")?,
            SweepVariable::ObsError => obs = value,
            SweepVariable::SeriesLength => length = as_count(value, "series_length")?,
            SweepVariable::TotalDims => {
                // half of the species perturbed: all pollinators
                total = as_count(value, "total_dims")?;
                perturbed = total / 2;
            }
        }
        if self.mode == Mode::Tnr {
            perturbed = 0;
        }
        Ok(CellConfig {
            value,
            n_pollinators: total / 2,
            n_plants: total - total / 2,
            perturbed,
            length,
            obs_error_sd: obs,
        })
    }

    fn window_methods(&self) -> Vec<IndicatorName> {
        let mut names: Vec<IndicatorName> = self
            .indicators
            .iter()
            .filter_map(|m| match m {
                Method::Window(n) => Some(*n),
                _ => None,
            })
            .collect();
        names.sort();
        names.dedup();
        names
    }
}

impl CellConfig {
    fn validate(&self) -> Result<()> {
        let total = self.n_pollinators + self.n_plants;
        if !(2..=MAX_TOTAL_DIMS).contains(&total) {
            return Err(EwsError::invalid(format!("total_dims must be in 2..={MAX_TOTAL_DIMS}, got {total}")));
        }
        if self.perturbed > self.n_pollinators {
            return Err(EwsError::invalid(format!(
                "perturbed_dims {} exceeds the {} pollinators",
                self.perturbed, self.n_pollinators
            )));
        }
        if !(10..=MAX_LENGTH).contains(&self.length) {
            return Err(EwsError::invalid(format!("series_length must be in 10..={MAX_LENGTH}, got {}", self.length)));
        }
        if !(self.obs_error_sd >= 0.0 && self.obs_error_sd.is_finite()) {
            return Err(EwsError::invalid("obs_error must be nonnegative"));
        }
        Ok(())
    }

    fn sim_config(&self) -> SimConfig {
        SimConfig { length: self.length, obs_error_sd: self.obs_error_sd, ..SimConfig::default() }
    }
}

/// Settings shared by every series evaluation.
#[derive(Clone, Debug)]
pub(crate) struct EvalSettings {
    pub threshold: f64,
    pub window: WindowSpec,
    pub model: PvarModelSpec,
    pub sampler: SamplerSettings,
}

/// What one method concluded on one series.
#[derive(Clone, Debug, PartialEq)]
pub(crate) enum MethodOutcome {
    Evidence(DetectionResult),
    /// The pooled sampler did not converge even with doubled iterations.
    Unconverged,
    /// The indicator could not be computed on this series.
    Failed(String),
}

impl MethodOutcome {
    fn detected(&self) -> bool {
        matches!(self, MethodOutcome::Evidence(d) if d.detected)
    }
}

/// Pooled posterior with one retry at doubled iterations. `None` when
/// neither run converges.
pub(crate) fn pooled_detection(
    residuals: &ResidualSeries,
    model: &PvarModelSpec,
    sampler: &SamplerSettings,
    threshold: f64,
    rng: &RngStream,
) -> Result<Option<DetectionResult>> {
    let post = sample_posterior(residuals, model, sampler, &rng.derive("pooled", 0))?;
    if post.is_converged() {
        return post.bayesian_p(threshold).map(Some);
    }
    let longer = SamplerSettings { n_iterations: sampler.n_iterations * 2, ..sampler.clone() };
    let post = sample_posterior(residuals, model, &longer, &rng.derive("pooled", 1))?;
    if post.is_converged() {
        post.bayesian_p(threshold).map(Some)
    } else {
        Ok(None)
    }
}

/// Runs every method on one detrended series. `nulls` must hold a null
/// distribution for each window method.
pub(crate) fn evaluate_series(
    residuals: &ResidualSeries,
    methods: &[Method],
    nulls: &[NullDistribution],
    settings: &EvalSettings,
    rng: &RngStream,
) -> Vec<MethodOutcome> {
    let window_names: Vec<IndicatorName> = nulls.iter().map(|n| n.indicator).collect();
    let window_taus = if window_names.is_empty() {
        Ok(Vec::new())
    } else {
        trajectories_from_residuals(residuals, &window_names, &settings.window)
            .map(|ts| ts.into_iter().map(|t| t.tau.tau).collect::<Vec<f64>>())
    };
    methods
        .iter()
        .map(|&method| match method {
            Method::Window(name) => {
                let k = window_names.iter().position(|&n| n == name).expect("null for every window method");
                match &window_taus {
                    Ok(taus) => match surrogate_p(taus[k], &nulls[k], settings.threshold) {
                        Ok(d) => MethodOutcome::Evidence(d),
                        Err(e) => MethodOutcome::Failed(e.to_string()),
                    },
                    Err(e) => MethodOutcome::Failed(e.to_string()),
                }
            }
            Method::Pooled => {
                match pooled_detection(residuals, &settings.model, &settings.sampler, settings.threshold, rng) {
                    Ok(Some(d)) => MethodOutcome::Evidence(d),
                    Ok(None) => MethodOutcome::Unconverged,
                    Err(e) => MethodOutcome::Failed(e.to_string()),
                }
            }
            Method::RandomGuess => {
                let mut g = rng.derive("guess", 0);
                let u: f64 = g.gen();
                // evidence uniform on (0, 1): detected with probability = threshold
                MethodOutcome::Evidence(DetectionResult::new(
                    Method::RandomGuess.as_str(),
                    u,
                    EvidenceKind::Surrogate,
                    RANDOM_GUESS_RATE,
                ))
            }
        })
        .collect()
}

/// Per (sweep value, method) tally.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub sweep_value: f64,
    pub indicator: Method,
    pub metric: Mode,
    /// Detection rate (TPR) or non-detection rate (TNR); `None` when the
    /// cell is invalid.
    pub estimate: Option<f64>,
    pub n_detected: usize,
    /// Replicates scored for this method.
    pub n_total: usize,
    /// Replicates whose simulation failed (no viable parameters).
    pub n_failed: usize,
    /// Replicates too short after truncation at collapse.
    pub n_excluded: usize,
    /// Pooled fits scored as not detected after failing to converge.
    pub n_unconverged: usize,
    /// Indicator errors, scored as not detected.
    pub n_errors: usize,
    pub valid: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub grid: ExperimentGrid,
    pub seed: u64,
    pub version: String,
    pub cells: Vec<CellResult>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CellTiming {
    pub sweep_value: f64,
    pub simulate_seconds: f64,
    pub evaluate_seconds: f64,
}

/// Provenance written next to `results.csv`.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub name: Option<String>,
    pub seed: u64,
    pub version: String,
    pub null_seed: u64,
    pub null_fingerprints: Vec<String>,
    pub threads: usize,
    pub null_seconds: f64,
    pub cells: Vec<CellTiming>,
    pub total_seconds: f64,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct SweepOutput {
    pub result: BenchResult,
    pub manifest: RunManifest,
}

enum Replicate {
    Series(MultiSeries),
    Excluded,
    Failed,
}

fn simulate_replicate(cell: &CellConfig, mode: Mode, knobs: &SamplingKnobs, min_length: usize, rng: &RngStream) -> Replicate {
    let cfg = cell.sim_config();
    let redraws = if mode == Mode::Tnr { MAX_CONSTANT_REDRAWS } else { 1 };
    for k in 0..redraws {
        let stream = rng.derive("redraw", k);
        let outcome = match simulate_viable(cell.n_pollinators, cell.n_plants, cell.perturbed, knobs, &cfg, &stream) {
            Ok(o) => o,
            Err(_) => return Replicate::Failed,
        };
        if mode == Mode::Tnr && outcome.collapsed {
            continue;
        }
        if outcome.series.len() < min_length {
            return Replicate::Excluded;
        }
        return Replicate::Series(outcome.series);
    }
    Replicate::Failed
}

/// Runs every (sweep value, replicate) of the grid. Results depend only on
/// the grid and `seed`, not on scheduling.
pub fn run_sweep(grid: &ExperimentGrid, seed: u64, cache: Option<&NullCache>) -> Result<SweepOutput> {
    grid.validate()?;
    let started = Instant::now();
    let cells = grid.cells()?;
    let root = RngStream::new(seed, 0);
    let window_names = grid.window_methods();
    let mut warnings = Vec::new();
    if !window_names.is_empty() && grid.surrogates < crate::surrogate::MIN_REPLICATES {
        warnings.push(format!(
            "{} surrogates per null is below {}; P-values are coarse",
            grid.surrogates,
            crate::surrogate::MIN_REPLICATES
        ));
    }

    // 1. simulate
    let jobs: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..grid.replicates).map(move |r| (c, r))).collect();
    let timed: Vec<(Replicate, f64)> = jobs
        .par_iter()
        .map(|&(c, r)| {
            let t0 = Instant::now();
            let cell = &cells[c];
            let min_length = grid.window.length(cell.length).unwrap_or(cell.length) + 10;
            let rep = simulate_replicate(cell, grid.mode, &grid.knobs, min_length, &replicate_stream(&root, c, r));
            (rep, t0.elapsed().as_secs_f64())
        })
        .collect();
    let mut sim_seconds = vec![0.0; cells.len()];
    for (&(c, _), (_, s)) in jobs.iter().zip(&timed) {
        sim_seconds[c] += s;
    }
    let replicates: Vec<Replicate> = timed.into_iter().map(|(r, _)| r).collect();

    // 2. null distributions, one per distinct scenario (the observed length
    //    varies with the collapse time)
    let null_start = Instant::now();
    let null_seed = stream_hash(seed, "null", 0);
    let mut scenarios: BTreeMap<String, NullScenario> = BTreeMap::new();
    let mut job_fingerprint: Vec<Option<String>> = vec![None; jobs.len()];
    if !window_names.is_empty() {
        for (j, &(c, _)) in jobs.iter().enumerate() {
            if let Replicate::Series(s) = &replicates[j] {
                let scenario = null_scenario(grid, &cells[c], s.len());
                let fp = scenario.fingerprint();
                scenarios.entry(fp.clone()).or_insert(scenario);
                job_fingerprint[j] = Some(fp);
            }
        }
    }
    let mut nulls: BTreeMap<String, Vec<NullDistribution>> = BTreeMap::new();
    for (fp, scenario) in &scenarios {
        let built = match cache {
            Some(cache) => cache.get_or_build(scenario, &window_names, grid.surrogates, null_seed)?,
            None => build_nulls(scenario, &window_names, grid.surrogates, null_seed)?,
        };
        nulls.insert(fp.clone(), built);
    }
    let null_seconds = null_start.elapsed().as_secs_f64();

    // 3. evaluate
    let settings = EvalSettings {
        threshold: grid.detection_threshold,
        window: grid.window,
        model: grid.model.clone(),
        sampler: grid.sampler.clone(),
    };
    let evaluated: Vec<(Option<Vec<MethodOutcome>>, f64)> = jobs
        .par_iter()
        .enumerate()
        .map(|(j, &(c, r))| {
            let Replicate::Series(series) = &replicates[j] else {
                return (None, 0.0);
            };
            let t0 = Instant::now();
            let stream = replicate_stream(&root, c, r).derive("evaluate", 0);
            let empty = Vec::new();
            let cell_nulls = job_fingerprint[j].as_ref().map_or(&empty, |fp| &nulls[fp]);
            let outcomes = match detrend_gaussian(series, grid.bandwidth_frac) {
                Ok(res) => evaluate_series(&res, &grid.indicators, cell_nulls, &settings, &stream),
                Err(e) => vec![MethodOutcome::Failed(e.to_string()); grid.indicators.len()],
            };
            (Some(outcomes), t0.elapsed().as_secs_f64())
        })
        .collect();

    let mut results = Vec::new();
    let mut timings = Vec::new();
    for (c, cell) in cells.iter().enumerate() {
        let idx: Vec<usize> = (0..jobs.len()).filter(|&j| jobs[j].0 == c).collect();
        let n_failed = idx.iter().filter(|&&j| matches!(replicates[j], Replicate::Failed)).count();
        let n_excluded = idx.iter().filter(|&&j| matches!(replicates[j], Replicate::Excluded)).count();
        let valid_cell = 2 * n_failed <= grid.replicates;
        for (m, &method) in grid.indicators.iter().enumerate() {
            let outcomes: Vec<&MethodOutcome> =
                idx.iter().filter_map(|&j| evaluated[j].0.as_ref().map(|o| &o[m])).collect();
            let n_total = outcomes.len();
            let n_detected = outcomes.iter().filter(|o| o.detected()).count();
            let valid = valid_cell && n_total > 0;
            let estimate = valid.then(|| {
                let rate = n_detected as f64 / n_total as f64;
                match grid.mode {
                    Mode::Tpr => rate,
                    Mode::Tnr => 1.0 - rate,
                }
            });
            results.push(CellResult {
                sweep_value: cell.value,
                indicator: method,
                metric: grid.mode,
                estimate,
                n_detected,
                n_total,
                n_failed,
                n_excluded,
                n_unconverged: outcomes.iter().filter(|o| matches!(o, MethodOutcome::Unconverged)).count(),
                n_errors: outcomes.iter().filter(|o| matches!(o, MethodOutcome::Failed(_))).count(),
                valid,
            });
        }
        if !valid_cell {
            warnings.push(format!(
                "{} = {}: {n_failed} of {} simulations failed; cell marked invalid",
                grid.sweep_variable.as_str(),
                cell.value,
                grid.replicates
            ));
        }
        timings.push(CellTiming {
            sweep_value: cell.value,
            simulate_seconds: sim_seconds[c],
            evaluate_seconds: idx.iter().map(|&j| evaluated[j].1).sum(),
        });
    }

    let version = env!("CARGO_PKG_VERSION").to_string();
    Ok(SweepOutput {
        result: BenchResult { grid: grid.clone(), seed, version: version.clone(), cells: results },
        manifest: RunManifest {
            name: grid.name.clone(),
            seed,
            version,
            null_seed,
            null_fingerprints: nulls.keys().cloned().collect(),
            threads: rayon::current_num_threads(),
            null_seconds,
            cells: timings,
            total_seconds: started.elapsed().as_secs_f64(),
            warnings,
        },
    })
}

fn replicate_stream(root: &RngStream, cell: usize, replicate: usize) -> RngStream {
    root.derive("cell", cell as u64).derive("replicate", replicate as u64)
}

fn null_scenario(grid: &ExperimentGrid, cell: &CellConfig, length: usize) -> NullScenario {
    NullScenario {
        n_pollinators: cell.n_pollinators,
        n_plants: cell.n_plants,
        length,
        window: grid.window,
        bandwidth_frac: grid.bandwidth_frac,
        knobs: grid.knobs,
        sim: cell.sim_config(),
    }
}

impl BenchResult {
    /// `results.csv`: `sweep_var,value,indicator,metric,estimate,n`, with an
    /// empty estimate for invalid cells.
    pub fn write_results_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| EwsError::invalid(format!("csv write failed: {e}"));
        w.write_record(["sweep_var", "value", "indicator", "metric", "estimate", "n"]).map_err(io)?;
        for c in &self.cells {
            w.write_record([
                self.grid.sweep_variable.as_str().to_string(),
                c.sweep_value.to_string(),
                c.indicator.to_string(),
                c.metric.as_str().to_string(),
                c.estimate.map_or(String::new(), |e| e.to_string()),
                c.n_total.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| EwsError::io("<results.csv>", e))?;
        Ok(())
    }

    pub fn cell(&self, sweep_value: f64, method: Method) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.sweep_value == sweep_value && c.indicator == method)
    }

    /// Estimates grouped by method over all valid cells, for ANOVA.
    pub fn estimates_by_method(&self) -> Vec<(Method, Vec<f64>)> {
        self.grid
            .indicators
            .iter()
            .map(|&m| (m, self.cells.iter().filter(|c| c.indicator == m).filter_map(|c| c.estimate).collect()))
            .collect()
    }

    /// One-way ANOVA of the estimates across methods.
    pub fn anova(&self) -> Result<AnovaResult> {
        let groups: Vec<Vec<f64>> = self.estimates_by_method().into_iter().map(|(_, g)| g).collect();
        one_way_anova(&groups)
    }

    /// Trend of the detection rate of `method` across sweep values.
    pub fn trend(&self, method: Method) -> Result<TrendTest> {
        let cells: Vec<&CellResult> = self.cells.iter().filter(|c| c.indicator == method && c.valid).collect();
        let successes: Vec<usize> = cells.iter().map(|c| c.n_detected).collect();
        let totals: Vec<usize> = cells.iter().map(|c| c.n_total).collect();
        let scores: Vec<f64> = cells.iter().map(|c| c.sweep_value).collect();
        cochran_armitage(&successes, &totals, &scores)
    }
}

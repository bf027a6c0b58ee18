//! Evidence of one series over a grid of detrending bandwidths and window
//! (or length-scale) fractions.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate_series, EvalSettings, Method, MethodOutcome};
use crate::detection::DEFAULT_THRESHOLD;
use crate::detrend::detrend_gaussian;
use crate::error::{EwsError, Result};
use crate::indicators::{IndicatorName, WindowSpec};
use crate::pvar::{PvarModelSpec, SamplerSettings};
use crate::rng::{stream_hash, RngStream};
use crate::series::MultiSeries;
use crate::simulator::{SamplingKnobs, SimConfig};
use crate::surrogate::{build_nulls, NullCache, NullScenario};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensitivityConfig {
    pub bandwidths: Vec<f64>,
    /// Fractions of the series length: the sliding window for window
    /// indicators, the GP length scale for the pooled indicator.
    pub scales: Vec<f64>,
    pub indicators: Vec<Method>,
    pub surrogates: usize,
    pub detection_threshold: f64,
    pub knobs: SamplingKnobs,
    /// Observation error assumed when simulating surrogates.
    pub obs_error_sd: f64,
    pub model: PvarModelSpec,
    pub sampler: SamplerSettings,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        Self {
            bandwidths: vec![0.05, 0.1, 0.2, 0.4],
            scales: vec![0.25, 0.5, 0.75, 1.0],
            indicators: Method::all(),
            surrogates: 200,
            detection_threshold: DEFAULT_THRESHOLD,
            knobs: SamplingKnobs::default(),
            obs_error_sd: 0.0,
            model: PvarModelSpec::default(),
            sampler: SamplerSettings::default(),
        }
    }
}

impl SensitivityConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bandwidths.is_empty() || self.scales.is_empty() || self.indicators.is_empty() {
            return Err(EwsError::invalid("bandwidths, scales and indicators must be non-empty"));
        }
        if self.bandwidths.iter().any(|b| !(*b > 0.0 && *b <= 1.0)) {
            return Err(EwsError::invalid("bandwidths must lie in (0, 1]"));
        }
        if self.scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(EwsError::invalid("scales must be positive"));
        }
        if self.surrogates == 0 {
            return Err(EwsError::invalid("surrogates must be positive"));
        }
        self.model.validate()?;
        self.sampler.validate()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityCell {
    pub bandwidth: f64,
    pub scale: f64,
    pub indicator: Method,
    /// Missing when the cell could not be evaluated.
    pub evidence: Option<f64>,
    pub detected: Option<bool>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityResult {
    pub seed: u64,
    pub series_length: usize,
    pub cells: Vec<SensitivityCell>,
}

/// Evidence per (bandwidth, scale, method). Cells that fail are recorded
/// as missing.
pub fn sensitivity_grid(
    series: &MultiSeries,
    config: &SensitivityConfig,
    seed: u64,
    cache: Option<&NullCache>,
) -> Result<SensitivityResult> {
    config.validate()?;
    let t_len = series.len();
    let dim = series.dim();
    if dim < 2 {
        return Err(EwsError::invalid("sensitivity analysis needs at least two features"));
    }
    let root = RngStream::new(seed, 0);
    let null_seed = stream_hash(seed, "null", 0);
    let mut window_names: Vec<IndicatorName> = config
        .indicators
        .iter()
        .filter_map(|m| if let Method::Window(n) = m { Some(*n) } else { None })
        .collect();
    window_names.sort();
    window_names.dedup();

    let grid: Vec<(usize, usize)> = (0..config.bandwidths.len())
        .flat_map(|b| (0..config.scales.len()).map(move |s| (b, s)))
        .collect();
    let per_cell: Vec<Vec<SensitivityCell>> = grid
        .par_iter()
        .map(|&(b, s)| {
            let (bandwidth, scale) = (config.bandwidths[b], config.scales[s]);
            let missing = |indicator: Method, msg: String| SensitivityCell {
                bandwidth,
                scale,
                indicator,
                evidence: None,
                detected: None,
                error: Some(msg),
            };
            let residuals = match detrend_gaussian(series, bandwidth) {
                Ok(r) => r,
                Err(e) => return config.indicators.iter().map(|&m| missing(m, e.to_string())).collect(),
            };
            let stream = root.derive("cell", (b * config.scales.len() + s) as u64);
            let model = PvarModelSpec { length_scale: Some(scale * t_len as f64), ..config.model.clone() };

            // window indicators are only defined for window fractions < 1
            let window = WindowSpec { window_frac: scale, stride: 1 };
            let window_ok = !window_names.is_empty() && scale < 1.0 && window.length(t_len).is_ok();
            let nulls = if window_ok {
                let scenario = NullScenario {
                    n_pollinators: dim / 2,
                    n_plants: dim - dim / 2,
                    length: t_len,
                    window,
                    bandwidth_frac: bandwidth,
                    knobs: config.knobs,
                    sim: SimConfig { obs_error_sd: config.obs_error_sd, ..SimConfig::default() },
                };
                let built = match cache {
                    Some(c) => c.get_or_build(&scenario, &window_names, config.surrogates, null_seed),
                    None => build_nulls(&scenario, &window_names, config.surrogates, null_seed),
                };
                match built {
                    Ok(n) => Some(n),
                    Err(e) => {
                        return config
                            .indicators
                            .iter()
                            .map(|&m| match m {
                                Method::Window(_) => missing(m, e.to_string()),
                                _ => missing(m, "not evaluated".into()),
                            })
                            .collect();
                    }
                }
            } else {
                None
            };

            let methods: Vec<Method> = config
                .indicators
                .iter()
                .copied()
                .filter(|m| window_ok || !matches!(m, Method::Window(_)))
                .collect();
            let settings = EvalSettings {
                threshold: config.detection_threshold,
                window,
                model,
                sampler: config.sampler.clone(),
            };
            let outcomes = evaluate_series(&residuals, &methods, nulls.as_deref().unwrap_or(&[]), &settings, &stream);
            config
                .indicators
                .iter()
                .map(|&m| match methods.iter().position(|&x| x == m) {
                    None => missing(m, format!("window fraction {scale} is not in (0, 1) or too short")),
                    Some(k) => match &outcomes[k] {
                        MethodOutcome::Evidence(d) => SensitivityCell {
                            bandwidth,
                            scale,
                            indicator: m,
                            evidence: Some(d.evidence),
                            detected: Some(d.detected),
                            error: None,
                        },
                        MethodOutcome::Unconverged => missing(m, "sampler did not converge".into()),
                        MethodOutcome::Failed(e) => missing(m, e.clone()),
                    },
                })
                .collect()
        })
        .collect();
    Ok(SensitivityResult { seed, series_length: t_len, cells: per_cell.into_iter().flatten().collect() })
}

impl SensitivityResult {
    /// `heatmap.csv`: `bandwidth,scale,indicator,evidence`, empty evidence
    /// for missing cells.
    pub fn write_heatmap_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| EwsError::invalid(format!("csv write failed: {e}"));
        w.write_record(["bandwidth", "scale", "indicator", "evidence"]).map_err(io)?;
        for c in &self.cells {
            w.write_record([
                c.bandwidth.to_string(),
                c.scale.to_string(),
                c.indicator.to_string(),
                c.evidence.map_or(String::new(), |e| e.to_string()),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| EwsError::io("<heatmap.csv>", e))?;
        Ok(())
    }

    pub fn cells_for(&self, method: Method) -> impl Iterator<Item = &SensitivityCell> {
        self.cells.iter().filter(move |c| c.indicator == method)
    }
}

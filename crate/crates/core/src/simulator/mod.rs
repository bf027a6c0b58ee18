//! Stochastic plant–pollinator community simulator.
//!
//! Each species follows logistic-type growth boosted by saturating mutualism
//! with the other guild and limited by competition within its own guild:
//!
//! ```text
//! dX_i = X_i (r_i + M_i / (1 + h M_i) - sum_j c_ij X_j) dt + sigma dW_i
//! M_i  = sum_k gamma_ik Y_k          (Y = abundances of the other guild)
//! ```
//!
//! Integration is Euler–Maruyama on a fine step `dt`, decimated to an integer
//! output grid. A run settles under constant conditions, then ramps the
//! growth rate of the perturbed pollinators linearly to `r_final`, and is cut
//! at the first output time any species drops below the extinction threshold.

mod params;

pub use params::{sample_params, sample_params_with, CommunityParams, SamplingKnobs};

use nalgebra::DMatrix;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{EwsError, Result};
use crate::rng::RngStream;
use crate::series::MultiSeries;

pub const INITIAL_ABUNDANCE: f64 = 2.5;
const BLOWUP: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Output points after settling.
    pub length: usize,
    pub dt: f64,
    pub decimation: usize,
    /// Output points of constant-condition burn-in, discarded.
    pub settle_steps: usize,
    pub extinction_threshold: f64,
    pub obs_error_sd: f64,
    /// Parameter redraws allowed by [`simulate_viable`].
    pub max_resamples: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            length: 150,
            dt: 0.01,
            decimation: 100,
            settle_steps: 20,
            extinction_threshold: 0.05,
            obs_error_sd: 0.0,
            max_resamples: 1000,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || self.decimation == 0 {
            return Err(EwsError::invalid("dt and decimation must be positive"));
        }
        if (self.dt * self.decimation as f64 - 1.0).abs() > 1e-9 {
            return Err(EwsError::invalid(format!(
                "dt * decimation must equal 1 (got {} * {})",
                self.dt, self.decimation
            )));
        }
        if !(self.extinction_threshold > 0.0) {
            return Err(EwsError::invalid("extinction threshold must be positive"));
        }
        if !(self.obs_error_sd >= 0.0) {
            return Err(EwsError::invalid("observation error sd must be nonnegative"));
        }
        if self.length < 2 {
            return Err(EwsError::invalid("simulation length must be at least 2"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SimOutcome {
    /// Retained output, times `1..`, observation error included.
    pub series: MultiSeries,
    pub collapsed: bool,
    /// First output time with a species below the extinction threshold.
    pub collapse_time: Option<i64>,
    pub n_resamples: usize,
    /// Abundances at the end of the settling period.
    pub settled: Vec<f64>,
    pub params: CommunityParams,
}

impl SimOutcome {
    pub fn settled_min(&self) -> f64 {
        self.settled.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `M / (1 + h M)`, the saturating mutualism benefit; bounded by `1/h`.
pub fn mutualism_ratio(benefit: f64, half_saturation: f64) -> f64 {
    benefit / (1.0 + half_saturation * benefit)
}

/// Pollinator growth rates `time` units after the end of settling.
/// Clamped to the ramp: `r0` before it starts, `r_final` at and after `length`.
pub fn growth_rates_at(params: &CommunityParams, length: usize, time: f64) -> Vec<f64> {
    let frac = (time / length as f64).clamp(0.0, 1.0);
    let mut r = params.r_pollinator.clone();
    for &i in &params.perturbed {
        r[i] = params.r_pollinator[i] * (1.0 - frac) + params.r_final * frac;
    }
    r
}

/// Deterministic drift of the full state `[pollinators..., plants...]`.
pub fn drift(params: &CommunityParams, r_pollinator: &[f64], state: &[f64], out: &mut [f64]) {
    let sp = params.n_pollinators;
    let (poll, plant) = state.split_at(sp);
    let h = params.half_saturation;
    for i in 0..sp {
        let benefit: f64 = params.gamma_pollinator[i].iter().zip(plant).map(|(g, y)| g * y).sum();
        let load: f64 = params.competition_pollinator[i].iter().zip(poll).map(|(c, x)| c * x).sum();
        out[i] = poll[i] * (r_pollinator[i] + mutualism_ratio(benefit, h) - load);
    }
    for k in 0..params.n_plants {
        let benefit: f64 = params.gamma_plant[k].iter().zip(poll).map(|(g, x)| g * x).sum();
        let load: f64 = params.competition_plant[k].iter().zip(plant).map(|(c, y)| c * y).sum();
        out[sp + k] = plant[k] * (params.r_plant[k] + mutualism_ratio(benefit, h) - load);
    }
}

struct Integrator<'a> {
    params: &'a CommunityParams,
    dt: f64,
    noise_scale: f64,
    state: Vec<f64>,
    scratch: Vec<f64>,
    noise: RngStream,
}

impl<'a> Integrator<'a> {
    fn new(params: &'a CommunityParams, dt: f64, noise: RngStream) -> Self {
        let n = params.n_species();
        Self {
            params,
            dt,
            noise_scale: params.sigma_noise * dt.sqrt(),
            state: vec![INITIAL_ABUNDANCE; n],
            scratch: vec![0.0; n],
            noise,
        }
    }

    /// One Euler–Maruyama step; negative abundances are clipped to zero.
    fn step(&mut self, r_pollinator: &[f64], time: f64) -> Result<()> {
        drift(self.params, r_pollinator, &self.state, &mut self.scratch);
        for (x, f) in self.state.iter_mut().zip(&self.scratch) {
            let mut next = *x + f * self.dt;
            if self.noise_scale > 0.0 {
                let z: f64 = StandardNormal.sample(&mut self.noise);
                next += self.noise_scale * z;
            }
            if !next.is_finite() || next.abs() > BLOWUP {
                return Err(EwsError::IntegrationFailure { time });
            }
            *x = next.max(0.0);
        }
        Ok(())
    }

    /// Advance one output interval (`decimation` steps) starting at `t0`,
    /// with growth rates evaluated at the left end of each step.
    fn advance(&mut self, cfg: &SimConfig, t0: f64, rates: impl Fn(f64) -> Vec<f64>) -> Result<()> {
        for s in 0..cfg.decimation {
            let t = t0 + s as f64 * cfg.dt;
            let r = rates(t);
            self.step(&r, t)?;
        }
        Ok(())
    }
}

/// Euler–Maruyama path through the settling period, rows at integer times
/// `0..=settle_steps` (row 0 is the initial state).
pub fn settle_path(params: &CommunityParams, cfg: &SimConfig, rng: &RngStream) -> Result<DMatrix<f64>> {
    params.validate()?;
    cfg.validate()?;
    let mut integ = Integrator::new(params, cfg.dt, rng.derive("wiener", 0));
    let n = params.n_species();
    let mut out = DMatrix::zeros(cfg.settle_steps + 1, n);
    out.row_mut(0).iter_mut().for_each(|v| *v = INITIAL_ABUNDANCE);
    let r0 = params.r_pollinator.clone();
    let settle_start = -(cfg.settle_steps as f64);
    for k in 0..cfg.settle_steps {
        integ.advance(cfg, settle_start + k as f64, |_| r0.clone())?;
        for (j, v) in integ.state.iter().enumerate() {
            out[(k + 1, j)] = *v;
        }
    }
    Ok(out)
}

/// Integrate `params` under `cfg`. Randomness comes from child streams of
/// `rng`, so the result is a pure function of its arguments; with zero noise
/// and zero observation error it does not depend on `rng` at all.
pub fn simulate(params: &CommunityParams, cfg: &SimConfig, rng: &RngStream) -> Result<SimOutcome> {
    run(params, cfg, rng, false).map(|o| o.expect("viability not required"))
}

fn run(
    params: &CommunityParams,
    cfg: &SimConfig,
    rng: &RngStream,
    require_viable: bool,
) -> Result<Option<SimOutcome>> {
    params.validate()?;
    cfg.validate()?;
    let n = params.n_species();
    let mut integ = Integrator::new(params, cfg.dt, rng.derive("wiener", 0));

    let r0 = params.r_pollinator.clone();
    let settle_start = -(cfg.settle_steps as f64);
    for k in 0..cfg.settle_steps {
        integ.advance(cfg, settle_start + k as f64, |_| r0.clone())?;
    }
    let settled = integ.state.clone();
    let viable = settled.iter().all(|&x| x > cfg.extinction_threshold);
    if require_viable && !viable {
        return Ok(None);
    }

    let mut rows: Vec<f64> = Vec::with_capacity(cfg.length * n);
    let mut collapse_time = None;
    for k in 1..=cfg.length {
        let t0 = (k - 1) as f64;
        integ.advance(cfg, t0, |t| growth_rates_at(params, cfg.length, t))?;
        if integ.state.iter().any(|&x| x < cfg.extinction_threshold) {
            collapse_time = Some(k as i64);
            break;
        }
        rows.extend_from_slice(&integ.state);
    }
    let kept = rows.len() / n;
    if kept < 2 {
        return Err(EwsError::Degenerate(format!(
            "community collapsed after {kept} output point(s)"
        )));
    }
    let mut values = DMatrix::from_row_slice(kept, n, &rows);
    if cfg.obs_error_sd > 0.0 {
        let mut obs = rng.derive("observation", 0);
        let err = Normal::new(0.0, cfg.obs_error_sd).expect("valid sd");
        // row-major draw order, independent of storage layout
        for i in 0..kept {
            for j in 0..n {
                values[(i, j)] += err.sample(&mut obs);
            }
        }
    }
    let names = (0..params.n_pollinators)
        .map(|i| format!("pollinator{}", i + 1))
        .chain((0..params.n_plants).map(|k| format!("plant{}", k + 1)))
        .collect();
    let series = MultiSeries::from_values(values, 1)?.with_feature_names(names)?;
    Ok(Some(SimOutcome {
        series,
        collapsed: collapse_time.is_some(),
        collapse_time,
        n_resamples: 0,
        settled,
        params: params.clone(),
    }))
}

/// Redraw parameters until every species is present (above the extinction
/// threshold) at the end of settling. Attempts whose integration fails count
/// against the budget like non-viable draws.
pub fn simulate_viable(
    n_pollinators: usize,
    n_plants: usize,
    perturbed_count: usize,
    knobs: &SamplingKnobs,
    cfg: &SimConfig,
    rng: &RngStream,
) -> Result<SimOutcome> {
    cfg.validate()?;
    for attempt in 0..cfg.max_resamples.max(1) {
        let mut prng = rng.derive("params", attempt as u64);
        let params = sample_params_with(n_pollinators, n_plants, perturbed_count, knobs, &mut prng)?;
        match run(&params, cfg, &rng.derive("dynamics", attempt as u64), true) {
            Ok(Some(mut outcome)) => {
                outcome.n_resamples = attempt;
                return Ok(outcome);
            }
            Ok(None) | Err(EwsError::IntegrationFailure { .. }) | Err(EwsError::Degenerate(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(EwsError::ViabilityFailure {
        attempts: cfg.max_resamples.max(1),
    })
}

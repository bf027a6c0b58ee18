//! Pooled time-varying VAR(1) indicator: a Gaussian-process prior on the
//! shared autoregressive coefficient φ_t, sampled with NUTS, summarized by
//! the posterior of Kendall's tau between φ_t and time.

mod diagnostics;
mod kernel;
mod model;
mod nuts;

use std::io::Write;

use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

pub use diagnostics::{split_r_hat, SamplerDiagnostics, R_HAT_LIMIT};
pub use kernel::{kernel_matrix, matern32, GpFactor};
pub use model::{PooledVarModel, PvarModelSpec};
pub use nuts::{run_chain, run_chains, ChainOutput, LogDensity, SamplerSettings};

use crate::detection::{DetectionResult, EvidenceKind};
use crate::detrend::ResidualSeries;
use crate::error::{EwsError, Result};
use crate::rng::RngStream;
use crate::stats::{kendall_tau_times, quantile};

pub const SAMPLER_LABEL: &str = "nuts-multinomial-diag-metric";
pub const INDICATOR_NAME: &str = "ac_pooled";
/// Quantile levels of the exported φ_t ribbon and tau summary.
pub const RIBBON_LEVELS: [f64; 5] = [0.025, 0.25, 0.5, 0.75, 0.975];
const SHORT_SERIES_WARNING: usize = 10;

#[derive(Clone, Debug, Serialize)]
pub struct PvarPosterior {
    pub spec: PvarModelSpec,
    /// Times at which φ_t is defined (every time point but the last).
    pub transition_times: Vec<i64>,
    /// One row of φ_t per kept draw, chains concatenated in order.
    pub phi_draws: Vec<Vec<f64>>,
    pub sigma_draws: Vec<Vec<f64>>,
    pub tau_draws: Vec<f64>,
    pub diagnostics: SamplerDiagnostics,
}

/// Samples the posterior of the pooled model. Non-convergence is reported
/// in the diagnostics, not as an error.
pub fn sample_posterior(
    residuals: &ResidualSeries,
    spec: &PvarModelSpec,
    settings: &SamplerSettings,
    rng: &RngStream,
) -> Result<PvarPosterior> {
    let model = PooledVarModel::new(residuals, spec)?;
    run_model(model, spec, settings, rng)
}

/// Samples the prior of φ_t through the same sampler, with the data term
/// switched off. `residuals` only fixes the time grid and dimension.
pub fn sample_prior(
    residuals: &ResidualSeries,
    spec: &PvarModelSpec,
    settings: &SamplerSettings,
    rng: &RngStream,
) -> Result<PvarPosterior> {
    let model = PooledVarModel::new(residuals, spec)?.without_likelihood();
    run_model(model, spec, settings, rng)
}

/// Independent draws of φ at `n_phi` consecutive transition times straight
/// from the Gaussian-process prior.
pub fn prior_phi_draws(n_phi: usize, spec: &PvarModelSpec, n_draws: usize, rng: &mut RngStream) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let points: Vec<i64> = (1..=n_phi as i64).collect();
    let kernel = kernel_matrix(&points, spec.process_sd, spec.resolved_length_scale(n_phi + 1))?;
    let var = spec.process_sd * spec.process_sd;
    let factor = GpFactor::new(&kernel, spec.jitter * var, 1e-4 * var)?;
    let mut eta = vec![0.0; n_phi];
    Ok((0..n_draws)
        .map(|_| {
            for e in eta.iter_mut() {
                *e = StandardNormal.sample(rng);
            }
            let mut phi = vec![0.0; n_phi];
            factor.apply(&eta, spec.gp_mean, &mut phi);
            phi
        })
        .collect())
}

fn run_model(
    model: PooledVarModel,
    spec: &PvarModelSpec,
    settings: &SamplerSettings,
    rng: &RngStream,
) -> Result<PvarPosterior> {
    settings.validate()?;
    let n_phi = model.n_phi();
    let dim = model.n_features();
    let chains = run_chains(&model, settings, rng)?;

    let mut phi_draws = Vec::new();
    let mut sigma_draws = Vec::new();
    let mut tau_draws = Vec::new();
    // per parameter, per chain traces for R-hat
    let n_traced = n_phi + dim + 1;
    let mut traces = vec![Vec::with_capacity(chains.len()); n_traced];
    for chain in &chains {
        let mut chain_traces = vec![Vec::with_capacity(chain.draws.len()); n_traced];
        for (q, lp) in chain.draws.iter().zip(&chain.log_density) {
            let (eta, log_sigma) = q.split_at(n_phi);
            let phi = model.phi(eta);
            let sigma: Vec<f64> = log_sigma.iter().map(|v| v.exp()).collect();
            tau_draws.push(kendall_tau_times(model.transition_times(), &phi)?.tau);
            for (k, v) in phi.iter().chain(&sigma).chain(std::iter::once(lp)).enumerate() {
                chain_traces[k].push(*v);
            }
            phi_draws.push(phi);
            sigma_draws.push(sigma);
        }
        for (all, one) in traces.iter_mut().zip(chain_traces) {
            all.push(one);
        }
    }

    let r_hat: Vec<f64> = traces.iter().map(|t| split_r_hat(t)).collect();
    let max_r_hat = r_hat
        .iter()
        .fold(f64::NEG_INFINITY, |m, &r| if r.is_nan() || m.is_nan() { f64::NAN } else { m.max(r) });
    let n_divergent = chains.iter().map(|c| c.n_divergent).sum();
    let n_chains = chains.len() as f64;
    let mut warnings = Vec::new();
    if n_phi + 1 < SHORT_SERIES_WARNING {
        warnings.push(format!(
            "series has {} points; fewer than {SHORT_SERIES_WARNING} gives a weakly identified φ_t",
            n_phi + 1
        ));
    }
    let diagnostics = SamplerDiagnostics {
        sampler: SAMPLER_LABEL.to_string(),
        n_chains: chains.len(),
        n_iterations: settings.n_iterations,
        n_warmup: settings.n_warmup(),
        r_hat,
        max_r_hat,
        n_divergent,
        acceptance_rate: chains.iter().map(|c| c.mean_accept_stat).sum::<f64>() / n_chains,
        step_sizes: chains.iter().map(|c| c.step_size).collect(),
        mean_tree_depth: chains.iter().map(|c| c.mean_tree_depth).sum::<f64>() / n_chains,
        kernel_jitter: model.factor().jitter(),
        converged: SamplerDiagnostics::convergence(max_r_hat, n_divergent),
        warnings,
    };
    Ok(PvarPosterior {
        spec: spec.clone(),
        transition_times: model.transition_times().to_vec(),
        phi_draws,
        sigma_draws,
        tau_draws,
        diagnostics,
    })
}

impl PvarPosterior {
    pub fn n_draws(&self) -> usize {
        self.tau_draws.len()
    }

    pub fn is_converged(&self) -> bool {
        self.diagnostics.converged
    }

    /// Posterior mass of tau at or below zero, regardless of convergence.
    pub fn negative_tau_mass(&self) -> f64 {
        let n = self.tau_draws.iter().filter(|&&t| t <= 0.0).count();
        n as f64 / self.tau_draws.len() as f64
    }

    /// Bayesian P-value with a detection flag. Refuses unconverged chains.
    pub fn bayesian_p(&self, threshold: f64) -> Result<DetectionResult> {
        if !self.is_converged() {
            return Err(EwsError::NotConverged {
                max_r_hat: self.diagnostics.max_r_hat,
                n_divergent: self.diagnostics.n_divergent,
            });
        }
        if self.tau_draws.is_empty() {
            return Err(EwsError::invalid("posterior has no draws"));
        }
        Ok(DetectionResult::new(INDICATOR_NAME, self.negative_tau_mass(), EvidenceKind::Bayesian, threshold)
            .with_tau(quantile(&self.tau_draws, 0.5)))
    }

    pub fn phi_mean(&self) -> Vec<f64> {
        let n = self.n_draws() as f64;
        let mut mean = vec![0.0; self.transition_times.len()];
        for draw in &self.phi_draws {
            for (m, v) in mean.iter_mut().zip(draw) {
                *m += v / n;
            }
        }
        mean
    }

    /// Quantiles of φ_t at each transition time, one row per time.
    pub fn phi_quantiles(&self, levels: &[f64]) -> Vec<Vec<f64>> {
        (0..self.transition_times.len())
            .map(|t| {
                let mut column: Vec<f64> = self.phi_draws.iter().map(|d| d[t]).collect();
                column.sort_by(f64::total_cmp);
                levels.iter().map(|&p| crate::stats::quantile_sorted(&column, p)).collect()
            })
            .collect()
    }

    pub fn tau_quantiles(&self, levels: &[f64]) -> Vec<f64> {
        let mut sorted = self.tau_draws.clone();
        sorted.sort_by(f64::total_cmp);
        levels.iter().map(|&p| crate::stats::quantile_sorted(&sorted, p)).collect()
    }

    /// Run summary: spec, diagnostics, Bayesian P (null when unconverged)
    /// and tau quantiles.
    pub fn summary_json(&self) -> serde_json::Value {
        let quantiles: serde_json::Map<String, serde_json::Value> = RIBBON_LEVELS
            .iter()
            .zip(self.tau_quantiles(&RIBBON_LEVELS))
            .map(|(p, q)| (format!("q{}", p * 100.0), q.into()))
            .collect();
        serde_json::json!({
            "spec": self.spec,
            "diagnostics": self.diagnostics,
            "bayesian_p": self.is_converged().then(|| self.negative_tau_mass()),
            "tau_quantiles": quantiles,
        })
    }

    /// CSV of the φ_t ribbon: `time,q2.5,q25,q50,q75,q97.5`.
    pub fn write_phi_quantiles_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["time".to_string()];
        header.extend(RIBBON_LEVELS.iter().map(|p| format!("q{}", p * 100.0)));
        w.write_record(&header).map_err(csv_error)?;
        for (t, row) in self.transition_times.iter().zip(self.phi_quantiles(&RIBBON_LEVELS)) {
            let mut record = vec![t.to_string()];
            record.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&record).map_err(csv_error)?;
        }
        w.flush().map_err(|e| EwsError::io("<phi quantiles>", e))?;
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> EwsError {
    EwsError::invalid(format!("csv write failed: {e}"))
}

#[cfg(test)]
mod tests;

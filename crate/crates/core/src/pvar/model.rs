//! Log posterior of the pooled time-varying VAR(1) model.
//!
//! ```text
//! x[t+1, d] ~ Normal(phi[t] x[t, d], sigma[d])     t = 1..T-1
//! phi       = M + L eta,   L Lᵀ = K_matern32 + jitter I
//! eta       ~ Normal(0, I)
//! sigma[d]  ~ HalfNormal(noise_prior_sd)
//! ```
//!
//! Sampling runs on the unconstrained vector `[eta, log sigma]`; the log
//! density includes the Jacobian of the log transform.

use serde::{Deserialize, Serialize};

use super::kernel::{kernel_matrix, GpFactor};
use super::nuts::LogDensity;
use crate::detrend::ResidualSeries;
use crate::error::{EwsError, Result};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PvarModelSpec {
    /// GP length scale in time steps; `None` means the series length.
    pub length_scale: Option<f64>,
    pub process_sd: f64,
    pub gp_mean: f64,
    /// Initial kernel jitter, relative to `process_sd²`.
    pub jitter: f64,
    pub noise_prior_sd: f64,
}

impl Default for PvarModelSpec {
    fn default() -> Self {
        Self {
            length_scale: None,
            process_sd: 1.0,
            gp_mean: 0.0,
            jitter: 1e-8,
            noise_prior_sd: 1.0,
        }
    }
}

/// Largest jitter tried before giving up, relative to `process_sd²`.
const MAX_RELATIVE_JITTER: f64 = 1e-4;

impl PvarModelSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if let Some(rho) = self.length_scale {
            if !positive(rho) {
                return Err(EwsError::invalid(format!("length scale must be positive, got {rho}")));
            }
        }
        if !positive(self.process_sd) || !positive(self.jitter) || !positive(self.noise_prior_sd) {
            return Err(EwsError::invalid(
                "process_sd, jitter and noise_prior_sd must be strictly positive",
            ));
        }
        if !self.gp_mean.is_finite() {
            return Err(EwsError::invalid("GP mean must be finite"));
        }
        Ok(())
    }

    /// Length scale resolved against a series of `t_len` points.
    pub fn resolved_length_scale(&self, t_len: usize) -> f64 {
        self.length_scale.unwrap_or(t_len as f64)
    }
}

/// The posterior as a differentiable log density over `[eta, log sigma]`.
#[derive(Clone, Debug)]
pub struct PooledVarModel {
    n_phi: usize,
    dim: usize,
    /// Lagged states `x[t, d]`, row-major `n_phi × dim`.
    lead: Vec<f64>,
    /// Next states `x[t+1, d]`, same layout.
    next: Vec<f64>,
    transition_times: Vec<i64>,
    factor: GpFactor,
    gp_mean: f64,
    noise_prior_sd: f64,
    use_likelihood: bool,
}

impl PooledVarModel {
    pub fn new(residuals: &ResidualSeries, spec: &PvarModelSpec) -> Result<Self> {
        spec.validate()?;
        let series = residuals.residuals();
        let t_len = series.len();
        if t_len < 3 {
            return Err(EwsError::invalid("pooled VAR model needs at least 3 time points"));
        }
        let n_phi = t_len - 1;
        let dim = series.dim();
        let values = series.values();
        let mut lead = Vec::with_capacity(n_phi * dim);
        let mut next = Vec::with_capacity(n_phi * dim);
        for t in 0..n_phi {
            for d in 0..dim {
                lead.push(values[(t, d)]);
                next.push(values[(t + 1, d)]);
            }
        }
        let transition_times = series.times()[..n_phi].to_vec();
        let rho = spec.resolved_length_scale(t_len);
        let kernel = kernel_matrix(&transition_times, spec.process_sd, rho)?;
        let var = spec.process_sd * spec.process_sd;
        let factor = GpFactor::new(&kernel, spec.jitter * var, MAX_RELATIVE_JITTER * var)?;
        Ok(Self {
            n_phi,
            dim,
            lead,
            next,
            transition_times,
            factor,
            gp_mean: spec.gp_mean,
            noise_prior_sd: spec.noise_prior_sd,
            use_likelihood: true,
        })
    }

    /// Same model with the data term removed (prior only).
    pub fn without_likelihood(mut self) -> Self {
        self.use_likelihood = false;
        self
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    pub fn n_features(&self) -> usize {
        self.dim
    }

    pub fn transition_times(&self) -> &[i64] {
        &self.transition_times
    }

    pub fn factor(&self) -> &GpFactor {
        &self.factor
    }

    /// `phi = M + L eta`.
    pub fn phi(&self, eta: &[f64]) -> Vec<f64> {
        let mut phi = vec![0.0; self.n_phi];
        self.factor.apply(eta, self.gp_mean, &mut phi);
        phi
    }

    /// Log posterior and its gradient with respect to `(eta, log sigma)`.
    pub fn log_posterior_and_gradient(
        &self,
        eta: &[f64],
        log_sigma: &[f64],
        grad_eta: &mut [f64],
        grad_log_sigma: &mut [f64],
    ) -> Result<f64> {
        if eta.len() != self.n_phi || log_sigma.len() != self.dim {
            return Err(EwsError::invalid(format!(
                "expected {} latent values and {} noise scales",
                self.n_phi, self.dim
            )));
        }
        let (n, dim) = (self.n_phi, self.dim);
        let mut lp = 0.0;

        // eta ~ N(0, I)
        for e in eta {
            lp -= 0.5 * e * e;
        }
        lp -= n as f64 * HALF_LN_2PI;

        // sigma ~ HalfNormal(s), plus log |d sigma / d log sigma|
        let s = self.noise_prior_sd;
        let sigma: Vec<f64> = log_sigma.iter().map(|v| v.exp()).collect();
        for d in 0..dim {
            let sd = sigma[d];
            lp += std::f64::consts::LN_2 - HALF_LN_2PI - s.ln() - 0.5 * sd * sd / (s * s) + log_sigma[d];
            grad_log_sigma[d] = 1.0 - sd * sd / (s * s);
        }

        let mut grad_phi = vec![0.0; n];
        if self.use_likelihood {
            let phi = self.phi(eta);
            let inv_var: Vec<f64> = sigma.iter().map(|sd| 1.0 / (sd * sd)).collect();
            let mut ss = vec![0.0; dim];
            for t in 0..n {
                let row = t * dim;
                let lead = &self.lead[row..row + dim];
                let next = &self.next[row..row + dim];
                let mut g = 0.0;
                for d in 0..dim {
                    let r = next[d] - phi[t] * lead[d];
                    ss[d] += r * r;
                    g += r * lead[d] * inv_var[d];
                }
                grad_phi[t] = g;
            }
            for d in 0..dim {
                lp -= n as f64 * (HALF_LN_2PI + log_sigma[d]) + 0.5 * ss[d] * inv_var[d];
                grad_log_sigma[d] += ss[d] * inv_var[d] - n as f64;
            }
        }
        self.factor.apply_transpose(&grad_phi, grad_eta);
        for (g, e) in grad_eta.iter_mut().zip(eta) {
            *g -= e;
        }
        if !lp.is_finite() {
            return Err(EwsError::Degenerate("log posterior is not finite".into()));
        }
        Ok(lp)
    }
}

impl LogDensity for PooledVarModel {
    fn dim(&self) -> usize {
        self.n_phi + self.dim
    }

    fn log_density_and_grad(&self, q: &[f64], grad: &mut [f64]) -> Result<f64> {
        let (eta, log_sigma) = q.split_at(self.n_phi);
        let (g_eta, g_sigma) = grad.split_at_mut(self.n_phi);
        self.log_posterior_and_gradient(eta, log_sigma, g_eta, g_sigma)
    }
}

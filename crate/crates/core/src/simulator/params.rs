use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{EwsError, Result};
use crate::rng::RngStream;

/// Parameters of the plant–pollinator mutualism/competition model.
///
/// Matrices are stored row-major as nested vectors: `gamma_pollinator[i][k]`
/// is the benefit pollinator `i` receives from plant `k`, and
/// `competition_pollinator[i][j]` the competitive load pollinator `j` puts on
/// pollinator `i`. Plant matrices mirror this with the roles swapped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommunityParams {
    pub n_pollinators: usize,
    pub n_plants: usize,
    pub r_pollinator: Vec<f64>,
    pub r_plant: Vec<f64>,
    pub gamma_pollinator: Vec<Vec<f64>>,
    pub gamma_plant: Vec<Vec<f64>>,
    pub competition_pollinator: Vec<Vec<f64>>,
    pub competition_plant: Vec<Vec<f64>>,
    pub half_saturation: f64,
    pub sigma_noise: f64,
    /// Pollinator indices whose growth rate is ramped down.
    pub perturbed: Vec<usize>,
    pub r_final: f64,
}

/// Knobs for [`sample_params_with`]; defaults follow the reference protocol.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingKnobs {
    pub half_saturation: f64,
    pub sigma_noise: f64,
    pub r_final: f64,
}

impl Default for SamplingKnobs {
    fn default() -> Self {
        Self {
            half_saturation: 0.5,
            sigma_noise: 0.1,
            r_final: -1.5,
        }
    }
}

impl CommunityParams {
    pub fn n_species(&self) -> usize {
        self.n_pollinators + self.n_plants
    }

    pub fn validate(&self) -> Result<()> {
        let (sp, sa) = (self.n_pollinators, self.n_plants);
        if sp == 0 || sa == 0 {
            return Err(EwsError::invalid("community needs at least one pollinator and one plant"));
        }
        let shape_ok = |m: &Vec<Vec<f64>>, rows: usize, cols: usize| {
            m.len() == rows && m.iter().all(|r| r.len() == cols)
        };
        if self.r_pollinator.len() != sp
            || self.r_plant.len() != sa
            || !shape_ok(&self.gamma_pollinator, sp, sa)
            || !shape_ok(&self.gamma_plant, sa, sp)
            || !shape_ok(&self.competition_pollinator, sp, sp)
            || !shape_ok(&self.competition_plant, sa, sa)
        {
            return Err(EwsError::invalid("community parameter shapes do not match species counts"));
        }
        let all = self
            .gamma_pollinator
            .iter()
            .chain(&self.gamma_plant)
            .chain(&self.competition_pollinator)
            .chain(&self.competition_plant)
            .flatten();
        if all.clone().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(EwsError::invalid("interaction matrices must be finite and nonnegative"));
        }
        if self.half_saturation < 0.0 || !self.half_saturation.is_finite() {
            return Err(EwsError::invalid("half-saturation constant must be nonnegative"));
        }
        if self.sigma_noise < 0.0 || !self.sigma_noise.is_finite() {
            return Err(EwsError::invalid("noise scale must be nonnegative"));
        }
        if self.perturbed.iter().any(|&i| i >= sp) {
            return Err(EwsError::invalid("perturbed index out of range"));
        }
        Ok(())
    }
}

pub fn sample_params(
    n_pollinators: usize,
    n_plants: usize,
    perturbed_count: usize,
    rng: &mut RngStream,
) -> Result<CommunityParams> {
    sample_params_with(n_pollinators, n_plants, perturbed_count, &SamplingKnobs::default(), rng)
}

/// Draw a random community: pollinator growth `N(0, 0.1²)`, plant growth
/// `N(-0.1, 0.05²)`, mutualism off-diagonals `U(0.6, 1)` with unit diagonal,
/// competition off-diagonals `U(0, 0.1)` with diagonal 0.3. The first
/// `perturbed_count` pollinators are the ones ramped toward `r_final`.
pub fn sample_params_with(
    n_pollinators: usize,
    n_plants: usize,
    perturbed_count: usize,
    knobs: &SamplingKnobs,
    rng: &mut RngStream,
) -> Result<CommunityParams> {
    if perturbed_count > n_pollinators {
        return Err(EwsError::invalid(format!(
            "cannot perturb {perturbed_count} of {n_pollinators} pollinators"
        )));
    }
    if n_pollinators == 0 || n_plants == 0 {
        return Err(EwsError::invalid("community needs at least one pollinator and one plant"));
    }
    let r_p = Normal::new(0.0, 0.1).expect("valid normal");
    let r_a = Normal::new(-0.1, 0.05).expect("valid normal");
    let mutualism = Uniform::new(0.6, 1.0);
    let competition = Uniform::new(0.0, 0.1);

    let r_pollinator: Vec<f64> = (0..n_pollinators).map(|_| r_p.sample(rng)).collect();
    let r_plant: Vec<f64> = (0..n_plants).map(|_| r_a.sample(rng)).collect();
    let gamma_pollinator = interaction(n_pollinators, n_plants, 1.0, &mutualism, rng);
    let gamma_plant = interaction(n_plants, n_pollinators, 1.0, &mutualism, rng);
    let competition_pollinator = interaction(n_pollinators, n_pollinators, 0.3, &competition, rng);
    let competition_plant = interaction(n_plants, n_plants, 0.3, &competition, rng);

    Ok(CommunityParams {
        n_pollinators,
        n_plants,
        r_pollinator,
        r_plant,
        gamma_pollinator,
        gamma_plant,
        competition_pollinator,
        competition_plant,
        half_saturation: knobs.half_saturation,
        sigma_noise: knobs.sigma_noise,
        perturbed: (0..perturbed_count).collect(),
        r_final: knobs.r_final,
    })
}

fn interaction<R: Rng>(
    rows: usize,
    cols: usize,
    diagonal: f64,
    off: &Uniform<f64>,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|i| {
            (0..cols)
                .map(|j| if i == j { diagonal } else { off.sample(rng) })
                .collect()
        })
        .collect()
}

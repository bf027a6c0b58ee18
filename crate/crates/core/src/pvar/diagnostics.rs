use serde::{Deserialize, Serialize};

/// Convergence is declared only below this potential scale reduction.
pub const R_HAT_LIMIT: f64 = 1.1;

/// Split potential scale reduction of one scalar quantity. Each chain is
/// cut in half and the halves are treated as separate chains.
pub fn split_r_hat(chains: &[Vec<f64>]) -> f64 {
    let n = chains.iter().map(Vec::len).min().unwrap_or(0) / 2;
    if n < 2 {
        return f64::NAN;
    }
    let halves: Vec<&[f64]> = chains
        .iter()
        .flat_map(|c| [&c[..n], &c[c.len() - n..]])
        .collect();
    let m = halves.len() as f64;
    let nf = n as f64;
    let means: Vec<f64> = halves.iter().map(|h| h.iter().sum::<f64>() / nf).collect();
    let grand = means.iter().sum::<f64>() / m;
    let between = nf / (m - 1.0) * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
    let within = halves
        .iter()
        .zip(&means)
        .map(|(h, mu)| h.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (nf - 1.0))
        .sum::<f64>()
        / m;
    let var_plus = (nf - 1.0) / nf * within + between / nf;
    if within == 0.0 {
        return if var_plus == 0.0 { 1.0 } else { f64::INFINITY };
    }
    (var_plus / within).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerDiagnostics {
    pub sampler: String,
    pub n_chains: usize,
    /// Iterations per chain, warmup included.
    pub n_iterations: usize,
    pub n_warmup: usize,
    /// Split R-hat for each φ_t, then each σ_d, then the log density.
    pub r_hat: Vec<f64>,
    pub max_r_hat: f64,
    pub n_divergent: usize,
    pub acceptance_rate: f64,
    pub step_sizes: Vec<f64>,
    pub mean_tree_depth: f64,
    pub kernel_jitter: f64,
    pub converged: bool,
    pub warnings: Vec<String>,
}

impl SamplerDiagnostics {
    pub(crate) fn convergence(max_r_hat: f64, n_divergent: usize) -> bool {
        max_r_hat < R_HAT_LIMIT && n_divergent == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use rand_distr::{Distribution, StandardNormal};

    fn normal_chain(rng: &mut RngStream, n: usize, shift: f64) -> Vec<f64> {
        (0..n).map(|_| { let z: f64 = StandardNormal.sample(rng); z + shift }).collect()
    }

    #[test]
    fn mixed_chains_are_near_one() {
        let mut rng = RngStream::new(1, 0);
        let chains: Vec<Vec<f64>> = (0..4).map(|_| normal_chain(&mut rng, 1000, 0.0)).collect();
        let r = split_r_hat(&chains);
        assert!((r - 1.0).abs() < 0.01, "{r}");
    }

    #[test]
    fn separated_chains_are_flagged() {
        let mut rng = RngStream::new(2, 0);
        let chains = vec![normal_chain(&mut rng, 500, 0.0), normal_chain(&mut rng, 500, 3.0)];
        assert!(split_r_hat(&chains) > 1.5);
    }

    #[test]
    fn drifting_single_chain_is_flagged_by_splitting() {
        let chain: Vec<f64> = (0..400).map(|i| i as f64 / 100.0).collect();
        assert!(split_r_hat(&[chain]) > 1.5);
    }

    #[test]
    fn constant_and_short_inputs() {
        assert_eq!(split_r_hat(&[vec![2.0; 10], vec![2.0; 10]]), 1.0);
        assert!(split_r_hat(&[vec![1.0, 2.0]]).is_nan());
        assert!(!SamplerDiagnostics::convergence(1.05, 1));
        assert!(!SamplerDiagnostics::convergence(f64::NAN, 0));
        assert!(SamplerDiagnostics::convergence(1.05, 0));
    }
}

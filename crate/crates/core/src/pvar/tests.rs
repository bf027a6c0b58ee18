use super::*;
use crate::series::MultiSeries;
use nalgebra::DMatrix;
use rand::Rng;

fn random_residuals(t_len: usize, dim: usize, rng: &mut RngStream) -> ResidualSeries {
    let values = DMatrix::from_fn(t_len, dim, |_, _| rng.gen_range(-1.0..1.0));
    ResidualSeries::undetrended(MultiSeries::from_values(values, 1).unwrap())
}

fn var1_residuals(phi: f64, t_len: usize, dim: usize, sd: f64, rng: &mut RngStream) -> ResidualSeries {
    let mut values = DMatrix::zeros(t_len, dim);
    for d in 0..dim {
        let z: f64 = StandardNormal.sample(rng);
        let mut x = sd / (1.0 - phi * phi).sqrt() * z;
        for t in 0..t_len {
            values[(t, d)] = x;
            let z: f64 = StandardNormal.sample(rng);
            x = phi * x + sd * z;
        }
    }
    ResidualSeries::undetrended(MultiSeries::from_values(values, 1).unwrap())
}

/// Log density written out term by term, independent of the model code.
fn scalar_log_density(r: &ResidualSeries, phi: &[f64], eta: &[f64], sigma: &[f64], s: f64) -> f64 {
    let ln_norm = |x: f64, mu: f64, sd: f64| {
        -0.5 * (2.0 * std::f64::consts::PI).ln() - sd.ln() - 0.5 * ((x - mu) / sd).powi(2)
    };
    let v = r.residuals().values();
    let mut lp = 0.0;
    for t in 0..phi.len() {
        for d in 0..sigma.len() {
            lp += ln_norm(v[(t + 1, d)], phi[t] * v[(t, d)], sigma[d]);
        }
    }
    lp += eta.iter().map(|&e| ln_norm(e, 0.0, 1.0)).sum::<f64>();
    for &sd in sigma {
        lp += 2f64.ln() + ln_norm(sd, 0.0, s) + sd.ln();
    }
    lp
}

#[test]
fn log_density_matches_scalar_oracle() {
    let mut rng = RngStream::new(11, 0);
    let r = random_residuals(12, 3, &mut rng);
    let spec = PvarModelSpec { length_scale: Some(4.0), noise_prior_sd: 0.7, ..PvarModelSpec::default() };
    let model = PooledVarModel::new(&r, &spec).unwrap();
    let eta: Vec<f64> = (0..11).map(|_| rng.gen_range(-1.5..1.5)).collect();
    let phi = model.phi(&eta);
    let mut g = vec![0.0; 14];
    for sigma in [vec![0.3f64, 0.8, 1.4], vec![0.6, 1.6, 2.8]] {
        let q: Vec<f64> = eta.iter().copied().chain(sigma.iter().map(|s| s.ln())).collect();
        let lp = model.log_density_and_grad(&q, &mut g).unwrap();
        let oracle = scalar_log_density(&r, &phi, &eta, &sigma, 0.7);
        assert!((lp - oracle).abs() < 1e-10 * oracle.abs().max(1.0), "{lp} vs {oracle}");
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = RngStream::new(3, 0);
    for _ in 0..10 {
        let r = random_residuals(20, 3, &mut rng);
        let model = PooledVarModel::new(&r, &PvarModelSpec::default()).unwrap();
        let q: Vec<f64> = (0..model.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut g = vec![0.0; q.len()];
        model.log_density_and_grad(&q, &mut g).unwrap();
        let mut scratch = vec![0.0; q.len()];
        for k in 0..q.len() {
            let h = 1e-5;
            let mut up = q.clone();
            up[k] += h;
            let mut down = q.clone();
            down[k] -= h;
            let fd = (model.log_density_and_grad(&up, &mut scratch).unwrap()
                - model.log_density_and_grad(&down, &mut scratch).unwrap())
                / (2.0 * h);
            assert!((g[k] - fd).abs() <= 1e-5 * g[k].abs().max(1.0), "component {k}: {} vs {fd}", g[k]);
        }
    }
}

#[test]
fn prior_keeps_most_mass_in_unit_interval() {
    let mut rng = RngStream::new(4, 0);
    let draws = prior_phi_draws(49, &PvarModelSpec::default(), 4000, &mut rng).unwrap();
    for t in [0, 24, 48] {
        let inside = draws.iter().filter(|d| d[t].abs() <= 1.0).count() as f64 / draws.len() as f64;
        // standard normal marginal: 0.683
        assert!(inside > 0.6 && (inside - 0.683).abs() < 0.03, "t {t}: {inside}");
    }
}

#[test]
fn direct_prior_draws_match_kernel_covariance() {
    let mut rng = RngStream::new(5, 0);
    let spec = PvarModelSpec::default();
    let n_phi = 20;
    let draws = prior_phi_draws(n_phi, &spec, 20000, &mut rng).unwrap();
    let rho = (n_phi + 1) as f64;
    for (i, j) in [(0, 0), (0, 5), (3, 19), (10, 11)] {
        let emp = draws.iter().map(|d| d[i] * d[j]).sum::<f64>() / draws.len() as f64;
        let k = matern32((i as f64 - j as f64).abs(), 1.0, rho).unwrap();
        assert!((emp - k).abs() < 0.05, "({i},{j}): {emp} vs {k}");
    }
}

#[test]
fn recovers_constant_coefficient_and_is_deterministic() {
    let mut rng = RngStream::new(21, 0);
    let r = var1_residuals(0.5, 60, 4, 0.1, &mut rng);
    let settings = SamplerSettings { n_iterations: 1000, ..SamplerSettings::default() };
    let spec = PvarModelSpec::default();
    let post = sample_posterior(&r, &spec, &settings, &RngStream::new(1, 0)).unwrap();
    assert_eq!(post.n_draws(), 1000);
    assert_eq!(post.phi_draws[0].len(), 59);
    assert!(post.is_converged(), "{:?}", post.diagnostics);

    // the posterior mean path should average out near the pooled
    // least-squares slope through the origin
    let v = r.residuals().values();
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for t in 0..59 {
        for d in 0..4 {
            sxy += v[(t + 1, d)] * v[(t, d)];
            sxx += v[(t, d)] * v[(t, d)];
        }
    }
    let mean_path = post.phi_mean();
    let average = mean_path.iter().sum::<f64>() / mean_path.len() as f64;
    assert!((average - sxy / sxx).abs() < 0.05, "{average} vs {}", sxy / sxx);
    assert!(mean_path.iter().all(|m| (m - 0.5).abs() < 0.3));

    for (phi, tau) in post.phi_draws.iter().zip(&post.tau_draws).take(50) {
        assert_eq!(kendall_tau_times(&post.transition_times, phi).unwrap().tau, *tau);
    }
    let p = post.bayesian_p(0.1).unwrap();
    assert_eq!(p.evidence, post.negative_tau_mass());
    assert!((0.0..=1.0).contains(&p.evidence));

    let again = sample_posterior(&r, &spec, &settings, &RngStream::new(1, 0)).unwrap();
    assert_eq!(post.tau_draws, again.tau_draws);

    let json = post.summary_json();
    assert!(json["bayesian_p"].is_number());
    assert_eq!(json["diagnostics"]["n_chains"], 2);
    let mut buf = Vec::new();
    post.write_phi_quantiles_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("time,q2.5,q25,q50,q75,q97.5\n"));
    assert_eq!(text.lines().count(), 60);
}

#[test]
fn unconverged_posterior_is_refused() {
    let mut rng = RngStream::new(8, 0);
    let r = random_residuals(15, 2, &mut rng);
    let settings = SamplerSettings { n_iterations: 40, ..SamplerSettings::default() };
    let mut post = sample_posterior(&r, &PvarModelSpec::default(), &settings, &RngStream::new(2, 0)).unwrap();
    post.diagnostics.converged = false;
    post.diagnostics.max_r_hat = 1.4;
    match post.bayesian_p(0.1) {
        Err(EwsError::NotConverged { max_r_hat, .. }) => assert_eq!(max_r_hat, 1.4),
        other => panic!("expected refusal, got {other:?}"),
    }
    assert!(post.summary_json()["bayesian_p"].is_null());
}

#[test]
fn detection_flags_follow_tau_mass() {
    let mut rng = RngStream::new(8, 0);
    let r = random_residuals(15, 2, &mut rng);
    let settings = SamplerSettings { n_iterations: 40, ..SamplerSettings::default() };
    let mut post = sample_posterior(&r, &PvarModelSpec::default(), &settings, &RngStream::new(2, 0)).unwrap();
    post.diagnostics.converged = true;
    post.tau_draws = vec![0.2; 10];
    let res = post.bayesian_p(0.1).unwrap();
    assert_eq!(res.evidence, 0.0);
    assert!(res.detected);
    post.tau_draws = (-5..=5).map(|i| i as f64 / 10.0).collect();
    let res = post.bayesian_p(0.1).unwrap();
    assert!((res.evidence - 6.0 / 11.0).abs() < 1e-12);
    assert!(!res.detected);
}

#[test]
fn short_series_warns() {
    let mut rng = RngStream::new(8, 0);
    let r = random_residuals(6, 2, &mut rng);
    let settings = SamplerSettings { n_iterations: 40, ..SamplerSettings::default() };
    let post = sample_posterior(&r, &PvarModelSpec::default(), &settings, &RngStream::new(2, 0)).unwrap();
    assert_eq!(post.diagnostics.warnings.len(), 1);
}

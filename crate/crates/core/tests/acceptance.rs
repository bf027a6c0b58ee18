//! Acceptance suite. Each test prints one PASS/FAIL line with its measured
//! values and runtime, then asserts. Runtime limits are part of each check.

mod common;

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use ewscope::bench::{run_sweep, sensitivity_grid, ExperimentGrid, Method, Mode, SensitivityConfig, SweepVariable};
use ewscope::indicators::IndicatorName;
use ewscope::pvar::{
    matern32, run_chains, sample_posterior, sample_prior, LogDensity, PooledVarModel, PvarModelSpec, SamplerSettings,
};
use ewscope::simulator::{settle_path, simulate_viable, SamplingKnobs, SimConfig};
use ewscope::stats::{kendall_tau_with, TieRule};
use ewscope::{detrend_gaussian, EwsError, MultiSeries, ResidualSeries, RngStream};

use common::{community_rhs, dopri5};

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/collapse_d10.csv");

fn report(id: u32, name: &str, pass: bool, detail: &str, elapsed: Duration, limit: Duration) {
    let in_time = elapsed <= limit;
    let verdict = if pass && in_time { "PASS" } else { "FAIL" };
    println!(
        "acceptance {id:>2} {verdict} {name}: {detail} [{:.1}s of {:.0}s]",
        elapsed.as_secs_f64(),
        limit.as_secs_f64()
    );
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
    assert!(in_time, "criterion {id} ({name}) exceeded its runtime limit");
}

/// Concordant and discordant pairs by direct enumeration. A pair ordered
/// by t is concordant when y does not decrease, except that pairs tied in
/// t count as concordant only when tied in y too.
fn brute_force_pairs(t: &[f64], y: &[f64]) -> (u64, u64) {
    let (mut c, mut d) = (0, 0);
    for i in 0..t.len() {
        for j in i + 1..t.len() {
            let (a, b) = if t[i] <= t[j] { (i, j) } else { (j, i) };
            let concordant = if t[a] == t[b] { y[a] == y[b] } else { y[a] <= y[b] };
            if concordant {
                c += 1;
            } else {
                d += 1;
            }
        }
    }
    (c, d)
}

#[test]
fn criterion_01_kendall_matches_enumeration() {
    let start = Instant::now();
    let mut rng = RngStream::new(101, 0);
    let mut mismatches = 0;
    for case in 0..1000 {
        let n = rng.gen_range(2..120);
        let ties = case % 2 == 0;
        let draw = |rng: &mut RngStream| -> f64 {
            if ties {
                rng.gen_range(0..6) as f64
            } else {
                rng.gen::<f64>()
            }
        };
        let t: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        let y: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        let fast = kendall_tau_with(&t, &y, TieRule::TiesConcordant).unwrap();
        let (c, d) = brute_force_pairs(&t, &y);
        let expected = (c as f64 - d as f64) / (c + d) as f64;
        if fast.n_concordant != c || fast.n_discordant != d || fast.tau != expected {
            mismatches += 1;
        }
    }
    report(
        1,
        "Kendall tau vs brute-force enumeration",
        mismatches == 0,
        &format!("{mismatches} mismatches in 1000 vectors (half with ties)"),
        start.elapsed(),
        Duration::from_secs(1),
    );
}

#[test]
fn criterion_02_gradient_matches_finite_differences() {
    let start = Instant::now();
    let mut rng = RngStream::new(102, 0);
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let values = DMatrix::from_fn(20, 3, |_, _| rng.gen_range(-1.0..1.0));
        let residuals = ResidualSeries::undetrended(MultiSeries::from_values(values, 1).unwrap());
        let model = PooledVarModel::new(&residuals, &PvarModelSpec::default()).unwrap();
        let eta: Vec<f64> = (0..19).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let log_sigma: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..0.5)).collect();
        let (mut ge, mut gs) = (vec![0.0; 19], vec![0.0; 3]);
        model.log_posterior_and_gradient(&eta, &log_sigma, &mut ge, &mut gs).unwrap();
        let analytic: Vec<f64> = ge.iter().chain(&gs).copied().collect();
        let q: Vec<f64> = eta.iter().chain(&log_sigma).copied().collect();
        let mut scratch = vec![0.0; q.len()];
        for k in 0..q.len() {
            let mut up = q.clone();
            up[k] += h;
            let mut down = q.clone();
            down[k] -= h;
            let fd = (model.log_density_and_grad(&up, &mut scratch).unwrap()
                - model.log_density_and_grad(&down, &mut scratch).unwrap())
                / (2.0 * h);
            let rel = (analytic[k] - fd).abs() / analytic[k].abs().max(1.0);
            worst = worst.max(rel);
        }
    }
    report(
        2,
        "analytic gradient vs central differences",
        worst <= 1e-5,
        &format!("worst relative error {worst:.2e} over 50 instances (T=20, D=3)"),
        start.elapsed(),
        Duration::from_secs(10),
    );
}

struct StandardGaussian(usize);

impl LogDensity for StandardGaussian {
    fn dim(&self) -> usize {
        self.0
    }

    fn log_density_and_grad(&self, q: &[f64], grad: &mut [f64]) -> ewscope::Result<f64> {
        for (g, x) in grad.iter_mut().zip(q) {
            *g = -x;
        }
        Ok(-0.5 * q.iter().map(|x| x * x).sum::<f64>())
    }
}

#[test]
fn criterion_03_sampler_calibration() {
    let start = Instant::now();
    let settings = SamplerSettings { n_chains: 4, n_iterations: 4000, ..SamplerSettings::default() };
    let chains = run_chains(&StandardGaussian(10), &settings, &RngStream::new(103, 0)).unwrap();
    let divergent: usize = chains.iter().map(|c| c.n_divergent).sum();
    let (mut worst_mean, mut worst_var, mut worst_rhat) = (0.0f64, 0.0f64, 0.0f64);
    for d in 0..10 {
        let per_chain: Vec<Vec<f64>> = chains.iter().map(|c| c.draws.iter().map(|q| q[d]).collect()).collect();
        let all: Vec<f64> = per_chain.iter().flatten().copied().collect();
        let n = all.len() as f64;
        let mean = all.iter().sum::<f64>() / n;
        let var = all.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        worst_mean = worst_mean.max(mean.abs());
        worst_var = worst_var.max((var - 1.0).abs());
        worst_rhat = worst_rhat.max(ewscope::pvar::split_r_hat(&per_chain));
    }
    let pass = worst_mean <= 0.05 && worst_var <= 0.1 && worst_rhat < 1.05 && divergent == 0;
    report(
        3,
        "NUTS on a 10-d standard Gaussian",
        pass,
        &format!(
            "max |mean| {worst_mean:.3}, max |var-1| {worst_var:.3}, max split R-hat {worst_rhat:.4}, {divergent} divergent"
        ),
        start.elapsed(),
        Duration::from_secs(30),
    );
}

#[test]
fn criterion_04_prior_matches_kernel() {
    let start = Instant::now();
    let t_len = 50;
    let mut rng = RngStream::new(104, 0);
    let values = DMatrix::from_fn(t_len, 2, |_, _| rng.gen_range(-1.0..1.0));
    let residuals = ResidualSeries::undetrended(MultiSeries::from_values(values, 1).unwrap());
    let spec = PvarModelSpec::default();
    // 2 chains x 5000 kept draws
    let settings = SamplerSettings { n_iterations: 10000, ..SamplerSettings::default() };
    let prior = sample_prior(&residuals, &spec, &settings, &RngStream::new(104, 1)).unwrap();
    let draws = &prior.phi_draws;
    let n = draws.len() as f64;
    let m = t_len - 1;
    let means: Vec<f64> = (0..m).map(|i| draws.iter().map(|d| d[i]).sum::<f64>() / n).collect();
    let mut worst = 0.0f64;
    for i in 0..m {
        for j in i..m {
            let cov = draws.iter().map(|d| (d[i] - means[i]) * (d[j] - means[j])).sum::<f64>() / (n - 1.0);
            let k = matern32((i as f64 - j as f64).abs(), 1.0, t_len as f64).unwrap();
            worst = worst.max((cov - k).abs() / k);
        }
    }
    report(
        4,
        "GP prior covariance through the sampler",
        worst <= 0.05 && draws.len() == 10000,
        &format!("worst relative error {worst:.4} over {} draws (T=50)", draws.len()),
        start.elapsed(),
        Duration::from_secs(20),
    );
}

fn var1(phi: f64, t_len: usize, dim: usize, sd: f64, rng: &mut RngStream) -> MultiSeries {
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
    MultiSeries::from_values(values, 1).unwrap()
}

#[test]
fn criterion_05_recovers_known_phi() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut not_detected = 0;
    let mut unconverged = 0;
    let mut ps = Vec::new();
    for seed in 0..10 {
        let series = var1(0.5, 100, 5, 0.1, &mut RngStream::new(500 + seed, 0));
        let residuals = ResidualSeries::undetrended(series);
        let post = sample_posterior(&residuals, &PvarModelSpec::default(), &SamplerSettings::default(), &RngStream::new(seed, 5))
            .unwrap();
        worst = post.phi_mean().iter().fold(worst, |w, m| w.max((m - 0.5).abs()));
        match post.bayesian_p(0.1) {
            Ok(d) => {
                ps.push(d.evidence);
                not_detected += usize::from(!d.detected);
            }
            Err(EwsError::NotConverged { .. }) => unconverged += 1,
            Err(e) => panic!("{e}"),
        }
    }
    report(
        5,
        "constant phi = 0.5 recovery (D=5, T=100, 10 seeds)",
        worst <= 0.1 && not_detected >= 9,
        &format!(
            "max |posterior mean - 0.5| {worst:.3}; not detected in {not_detected}/10; {unconverged} unconverged; P = {ps:.3?}"
        ),
        start.elapsed(),
        Duration::from_secs(300),
    );
}

#[test]
fn criterion_06_collapse_fixture_is_detected() {
    let start = Instant::now();
    let series = MultiSeries::read_csv_path(FIXTURE).unwrap();
    let residuals = detrend_gaussian(&series, 0.1).unwrap();
    let post = sample_posterior(&residuals, &PvarModelSpec::default(), &SamplerSettings::default(), &RngStream::new(6, 0))
        .unwrap();
    let result = post.bayesian_p(0.1);
    let (pass, detail) = match &result {
        Ok(d) => (
            d.evidence < 0.01,
            format!(
                "P = {:.4} on {} points x {} features (max R-hat {:.3})",
                d.evidence,
                series.len(),
                series.dim(),
                post.diagnostics.max_r_hat
            ),
        ),
        Err(e) => (false, e.to_string()),
    };
    report(6, "pooled indicator on the collapse fixture", pass, &detail, start.elapsed(), Duration::from_secs(120));
}

#[test]
fn criterion_07_pooled_beats_mean_at_five_perturbed() {
    let start = Instant::now();
    let grid = ExperimentGrid {
        name: Some("perturbed dims, desk scale".into()),
        sweep_variable: SweepVariable::PerturbedDims,
        sweep_values: vec![5.0],
        replicates: 20,
        surrogates: 200,
        indicators: vec![Method::Window(IndicatorName::AcMean), Method::Pooled],
        ..ExperimentGrid::default()
    };
    let out = run_sweep(&grid, 7, None).unwrap();
    let pooled = out.result.cell(5.0, Method::Pooled).unwrap();
    let mean = out.result.cell(5.0, Method::Window(IndicatorName::AcMean)).unwrap();
    let (tp, tm) = (pooled.estimate.unwrap_or(0.0), mean.estimate.unwrap_or(0.0));
    report(
        7,
        "TPR ordering at 5 perturbed of 10",
        tp > tm && tp >= 0.8,
        &format!(
            "TPR ac_pooled {tp:.2} (n={}, {} unconverged), ac_mean {tm:.2} (n={}); {} excluded",
            pooled.n_total, pooled.n_unconverged, mean.n_total, pooled.n_excluded
        ),
        start.elapsed(),
        Duration::from_secs(2 * 3600),
    );
}

#[test]
fn criterion_08_true_negative_rates() {
    let start = Instant::now();
    let indicators: Vec<Method> = IndicatorName::ALL.into_iter().map(Method::Window).chain([Method::Pooled]).collect();
    let grid = ExperimentGrid {
        name: Some("constant conditions".into()),
        sweep_variable: SweepVariable::ObsError,
        sweep_values: vec![0.0],
        mode: Mode::Tnr,
        replicates: 20,
        surrogates: 200,
        indicators: indicators.clone(),
        ..ExperimentGrid::default()
    };
    let out = run_sweep(&grid, 8, None).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for m in &indicators {
        let cell = out.result.cell(0.0, *m).unwrap();
        let tnr = cell.estimate.unwrap_or(f64::NAN);
        pass &= (0.75..=1.0).contains(&tnr);
        parts.push(format!("{m} {tnr:.2}"));
    }
    report(8, "TNR under constant conditions", pass, &parts.join(", "), start.elapsed(), Duration::from_secs(3600));
}

#[test]
fn criterion_09_sensitivity_grid_on_fixture() {
    let start = Instant::now();
    let series = MultiSeries::read_csv_path(FIXTURE).unwrap();
    let config = SensitivityConfig {
        bandwidths: vec![0.05, 0.1, 0.2, 0.4],
        scales: vec![0.5, 1.0, 1.5, 2.0],
        indicators: vec![Method::Pooled],
        ..SensitivityConfig::default()
    };
    let res = sensitivity_grid(&series, &config, 9, None).unwrap();
    let evidence: Vec<Option<f64>> = res.cells.iter().map(|c| c.evidence).collect();
    let pass = res.cells.len() == 16 && evidence.iter().all(|e| matches!(e, Some(p) if *p < 0.1));
    let worst = evidence.iter().map(|e| e.unwrap_or(f64::NAN)).fold(0.0f64, |a, b| if b.is_nan() { f64::NAN } else { a.max(b) });
    report(
        9,
        "pooled evidence over bandwidth x length scale",
        pass,
        &format!("largest P over 16 cells {worst:.4}"),
        start.elapsed(),
        Duration::from_secs(1800),
    );
}

#[test]
fn criterion_10_euler_maruyama_vs_ode_oracle() {
    let start = Instant::now();
    let knobs = SamplingKnobs { sigma_noise: 0.0, ..SamplingKnobs::default() };
    let cfg = SimConfig::default();
    let times: Vec<f64> = (0..=cfg.settle_steps).map(|k| k as f64).collect();
    let mut errors = Vec::new();
    for draw in 0..5 {
        let out = simulate_viable(5, 5, 0, &knobs, &cfg, &RngStream::new(1000 + draw, 0)).unwrap();
        let path = settle_path(&out.params, &cfg, &RngStream::new(0, 0)).unwrap();
        let y0 = vec![ewscope::simulator::INITIAL_ABUNDANCE; out.params.n_species()];
        let oracle = dopri5(|x| community_rhs(&out.params, x), &y0, &times, 1e-12);
        let mut err = 0.0f64;
        for (k, row) in oracle.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                err = err.max((path[(k, j)] - v).abs());
            }
        }
        errors.push(err);
    }
    let worst = errors.iter().copied().fold(0.0f64, f64::max);
    report(
        10,
        "Euler-Maruyama (dt=0.01, no noise) vs adaptive ODE oracle",
        worst <= 1e-3,
        &format!("max-norm errors over settling {}", errors.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>().join(", ")),
        start.elapsed(),
        Duration::from_secs(60),
    );
}

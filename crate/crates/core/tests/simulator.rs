mod common;

use ewscope::simulator::{settle_path, simulate, simulate_viable, CommunityParams, SamplingKnobs, SimConfig};
use ewscope::RngStream;

use common::{community_rhs, dopri5};

fn two_species() -> CommunityParams {
    CommunityParams {
        n_pollinators: 1,
        n_plants: 1,
        r_pollinator: vec![-0.1],
        r_plant: vec![-0.1],
        gamma_pollinator: vec![vec![1.0]],
        gamma_plant: vec![vec![1.0]],
        competition_pollinator: vec![vec![0.3]],
        competition_plant: vec![vec![0.3]],
        half_saturation: 0.5,
        sigma_noise: 0.0,
        perturbed: vec![],
        r_final: -1.5,
    }
}

#[test]
fn noiseless_two_species_settles_on_oracle_fixed_point() {
    let p = two_species();
    let oracle = dopri5(|x| community_rhs(&p, x), &[2.5, 2.5], &[500.0], 1e-12);
    let fixed = &oracle[0];
    // symmetric system: x* solves -0.1 + x/(1 + 0.5 x) = 0.3 x
    let analytic = {
        // 0.15 x^2 - 0.65 x + 0.1 = 0 after clearing denominators
        let (a, b, c) = (0.15f64, -0.65f64, 0.1f64);
        (-b + (b * b - 4.0 * a * c).sqrt()) / (2.0 * a)
    };
    assert!((fixed[0] - analytic).abs() < 1e-8, "oracle {} vs analytic {analytic}", fixed[0]);

    let cfg = SimConfig { length: 480, ..SimConfig::default() };
    let out = simulate(&p, &cfg, &RngStream::from_seed(0)).unwrap();
    let last = out.series.values().row(out.series.len() - 1);
    for j in 0..2 {
        assert!((last[j] - fixed[j]).abs() < 1e-6, "{} vs {}", last[j], fixed[j]);
    }
}

fn settle_error(p: &CommunityParams, cfg: &SimConfig) -> f64 {
    let path = settle_path(p, cfg, &RngStream::from_seed(0)).unwrap();
    let times: Vec<f64> = (0..=cfg.settle_steps).map(|k| k as f64).collect();
    let y0 = vec![2.5; p.n_species()];
    let oracle = dopri5(|x| community_rhs(p, x), &y0, &times, 1e-12);
    let mut err = 0.0f64;
    for (k, row) in oracle.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            err = err.max((path[(k, j)] - v).abs());
        }
    }
    err
}

#[test]
fn euler_error_is_first_order_in_dt() {
    let rng = RngStream::from_seed(31);
    let out = simulate_viable(5, 5, 0, &SamplingKnobs::default(), &SimConfig::default(), &rng).unwrap();
    let mut p = out.params;
    p.sigma_noise = 0.0;
    let coarse = settle_error(&p, &SimConfig::default());
    let fine = settle_error(&p, &SimConfig { dt: 0.005, decimation: 200, ..SimConfig::default() });
    let ratio = coarse / fine;
    assert!((1.8..2.2).contains(&ratio), "error ratio {ratio} ({coarse:e} / {fine:e})");
}

#[test]
fn halving_dt_roughly_halves_the_change() {
    // Successive halvings shrink the path difference by ~2 (first order).
    let rng = RngStream::from_seed(32);
    let out = simulate_viable(5, 5, 0, &SamplingKnobs::default(), &SimConfig::default(), &rng).unwrap();
    let mut p = out.params;
    p.sigma_noise = 0.0;
    let path = |dt: f64, dec: usize| settle_path(&p, &SimConfig { dt, decimation: dec, ..SimConfig::default() }, &rng).unwrap();
    let a = path(0.01, 100);
    let b = path(0.005, 200);
    let c = path(0.0025, 400);
    let d1 = (&a - &b).abs().max();
    let d2 = (&b - &c).abs().max();
    assert!((1.8..2.2).contains(&(d1 / d2)), "{d1:e} / {d2:e}");
}

//! No-U-turn sampler with multinomial trajectory sampling, a diagonal
//! metric and windowed warmup adaptation.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{EwsError, Result};
use crate::rng::RngStream;

/// A differentiable log density on `R^dim`.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;
    /// Returns the log density at `q` and writes its gradient into `grad`.
    fn log_density_and_grad(&self, q: &[f64], grad: &mut [f64]) -> Result<f64>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSettings {
    pub n_chains: usize,
    /// Iterations per chain, warmup included.
    pub n_iterations: usize,
    pub warmup_fraction: f64,
    pub target_accept: f64,
    pub max_tree_depth: usize,
    /// Initial values are drawn uniformly from `(-init_radius, init_radius)`.
    pub init_radius: f64,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        Self {
            n_chains: 2,
            n_iterations: 2000,
            warmup_fraction: 0.5,
            target_accept: 0.8,
            max_tree_depth: 10,
            init_radius: 2.0,
        }
    }
}

impl SamplerSettings {
    pub fn validate(&self) -> Result<()> {
        if self.n_chains == 0 {
            return Err(EwsError::invalid("need at least one chain"));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(EwsError::invalid("warmup fraction must be in [0, 1)"));
        }
        if self.n_iterations < 4 || self.n_draws() < 2 {
            return Err(EwsError::invalid("too few iterations to keep at least two draws per chain"));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(EwsError::invalid("target acceptance must be in (0, 1)"));
        }
        if self.max_tree_depth == 0 || self.max_tree_depth > 20 {
            return Err(EwsError::invalid("max tree depth must be in 1..=20"));
        }
        if !(self.init_radius > 0.0) {
            return Err(EwsError::invalid("init radius must be positive"));
        }
        Ok(())
    }

    pub fn n_warmup(&self) -> usize {
        (self.n_iterations as f64 * self.warmup_fraction).round() as usize
    }

    pub fn n_draws(&self) -> usize {
        self.n_iterations - self.n_warmup()
    }
}

/// Post-warmup output of one chain.
#[derive(Clone, Debug)]
pub struct ChainOutput {
    /// One row per kept draw.
    pub draws: Vec<Vec<f64>>,
    pub log_density: Vec<f64>,
    pub n_divergent: usize,
    pub mean_accept_stat: f64,
    pub mean_tree_depth: f64,
    pub step_size: f64,
    pub inv_metric: Vec<f64>,
}

const MAX_DELTA_H: f64 = 1000.0;

#[derive(Clone, Debug)]
struct Point {
    q: Vec<f64>,
    p: Vec<f64>,
    grad: Vec<f64>,
    lp: f64,
}

struct Hamiltonian<'a, T: LogDensity + ?Sized> {
    target: &'a T,
    inv_metric: Vec<f64>,
}

impl<T: LogDensity + ?Sized> Hamiltonian<'_, T> {
    fn energy(&self, z: &Point) -> f64 {
        let kinetic: f64 = z
            .p
            .iter()
            .zip(&self.inv_metric)
            .map(|(p, m)| p * p * m)
            .sum::<f64>();
        let h = -z.lp + 0.5 * kinetic;
        if h.is_nan() {
            f64::INFINITY
        } else {
            h
        }
    }

    fn sharp(&self, z: &Point) -> Vec<f64> {
        z.p.iter().zip(&self.inv_metric).map(|(p, m)| p * m).collect()
    }

    fn sample_momentum(&self, z: &mut Point, rng: &mut RngStream) {
        for (p, m) in z.p.iter_mut().zip(&self.inv_metric) {
            let n: f64 = rng.sample(StandardNormal);
            *p = n / m.sqrt();
        }
    }

    fn update_gradient(&self, z: &mut Point) {
        match self.target.log_density_and_grad(&z.q, &mut z.grad) {
            Ok(lp) if lp.is_finite() => z.lp = lp,
            _ => z.lp = f64::NEG_INFINITY,
        }
    }

    fn leapfrog(&self, z: &mut Point, eps: f64) {
        for (p, g) in z.p.iter_mut().zip(&z.grad) {
            *p += 0.5 * eps * g;
        }
        for ((q, p), m) in z.q.iter_mut().zip(&z.p).zip(&self.inv_metric) {
            *q += eps * m * p;
        }
        self.update_gradient(z);
        if !z.lp.is_finite() {
            return;
        }
        for (p, g) in z.p.iter_mut().zip(&z.grad) {
            *p += 0.5 * eps * g;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}


fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// No U-turn between the two ends of a trajectory with momentum sum `rho`.
fn no_u_turn(p_sharp_minus: &[f64], p_sharp_plus: &[f64], rho: &[f64]) -> bool {
    dot(p_sharp_plus, rho) > 0.0 && dot(p_sharp_minus, rho) > 0.0
}

#[derive(Default)]
struct Transition {
    n_leapfrog: usize,
    sum_metro_prob: f64,
    divergent: bool,
}

struct Tree<'a, 'h, T: LogDensity + ?Sized> {
    ham: &'h Hamiltonian<'a, T>,
    eps: f64,
    h0: f64,
    info: Transition,
}

/// The ends and momentum sum of a subtree, as seen in integration order.
struct Edges {
    p_sharp_beg: Vec<f64>,
    p_sharp_end: Vec<f64>,
    p_beg: Vec<f64>,
    p_end: Vec<f64>,
    rho: Vec<f64>,
}

impl<T: LogDensity + ?Sized> Tree<'_, '_, T> {
    /// Extends `z` by `2^depth` leapfrog steps and returns the subtree's
    /// edges, its proposal and log weight, or `None` if it must be rejected.
    fn build(
        &mut self,
        depth: usize,
        z: &mut Point,
        rng: &mut RngStream,
    ) -> (Option<(Edges, Point)>, f64) {
        if depth == 0 {
            self.ham.leapfrog(z, self.eps);
            self.info.n_leapfrog += 1;
            let h = self.ham.energy(z);
            if !(h - self.h0 <= MAX_DELTA_H) {
                self.info.divergent = true;
            }
            let log_weight = self.h0 - h;
            self.info.sum_metro_prob += if log_weight > 0.0 { 1.0 } else { log_weight.exp() };
            if self.info.divergent {
                return (None, log_weight);
            }
            let sharp = self.ham.sharp(z);
            let edges = Edges {
                p_sharp_beg: sharp.clone(),
                p_sharp_end: sharp,
                p_beg: z.p.clone(),
                p_end: z.p.clone(),
                rho: z.p.clone(),
            };
            return (Some((edges, z.clone())), log_weight);
        }

        let (init, lw_init) = self.build(depth - 1, z, rng);
        let Some((init, propose_init)) = init else {
            return (None, lw_init);
        };
        let (fin, lw_final) = self.build(depth - 1, z, rng);
        let Some((fin, propose_final)) = fin else {
            return (None, lw_final);
        };

        let lw_subtree = log_sum_exp(lw_init, lw_final);
        let propose = if lw_final > lw_subtree || rng.gen::<f64>() < (lw_final - lw_subtree).exp() {
            propose_final
        } else {
            propose_init
        };

        let rho = add(&init.rho, &fin.rho);
        let mut persist = no_u_turn(&init.p_sharp_beg, &fin.p_sharp_end, &rho);
        persist &= no_u_turn(&init.p_sharp_beg, &fin.p_sharp_beg, &add(&init.rho, &fin.p_beg));
        persist &= no_u_turn(&init.p_sharp_end, &fin.p_sharp_end, &add(&fin.rho, &init.p_end));
        if !persist {
            return (None, lw_subtree);
        }
        let edges = Edges {
            p_sharp_beg: init.p_sharp_beg,
            p_sharp_end: fin.p_sharp_end,
            p_beg: init.p_beg,
            p_end: fin.p_end,
            rho,
        };
        (Some((edges, propose)), lw_subtree)
    }
}

struct Step {
    accept_stat: f64,
    depth: usize,
    divergent: bool,
}

/// One NUTS transition from `z`, which is replaced by the new state.
fn transition<T: LogDensity + ?Sized>(
    ham: &Hamiltonian<'_, T>,
    z: &mut Point,
    eps: f64,
    max_depth: usize,
    rng: &mut RngStream,
) -> Step {
    ham.sample_momentum(z, rng);
    let h0 = ham.energy(z);
    let sharp = ham.sharp(z);

    // Each end of the trajectory, described in its own direction of growth.
    let mut fwd = z.clone();
    let mut bck = z.clone();
    let mut p_sharp_fwd_fwd = sharp.clone();
    let mut p_sharp_fwd_bck = sharp.clone();
    let mut p_sharp_bck_fwd = sharp.clone();
    let mut p_sharp_bck_bck = sharp;
    let mut p_fwd_bck = z.p.clone();
    let mut p_bck_fwd = z.p.clone();
    let mut rho = z.p.clone();
    let mut sample = z.clone();
    let mut log_sum_weight = 0.0;

    let mut tree = Tree { ham, eps, h0, info: Transition::default() };
    let mut depth = 0;
    while depth < max_depth {
        let forward = rng.gen::<f64>() > 0.5;
        let (rho_fwd, rho_bck, result, lw_subtree);
        if forward {
            tree.eps = eps;
            rho_bck = rho.clone();
            p_bck_fwd = p_fwd_bck.clone();
            p_sharp_bck_fwd = p_sharp_fwd_bck.clone();
            let (res, lw) = tree.build(depth, &mut fwd, rng);
            lw_subtree = lw;
            match res {
                Some((edges, propose)) => {
                    p_sharp_fwd_bck = edges.p_sharp_beg;
                    p_sharp_fwd_fwd = edges.p_sharp_end;
                    p_fwd_bck = edges.p_beg;
                    rho_fwd = edges.rho;
                    result = Some(propose);
                }
                None => {
                    rho_fwd = Vec::new();
                    result = None;
                }
            }
        } else {
            tree.eps = -eps;
            rho_fwd = rho.clone();
            p_fwd_bck = p_bck_fwd.clone();
            p_sharp_fwd_bck = p_sharp_bck_fwd.clone();
            let (res, lw) = tree.build(depth, &mut bck, rng);
            lw_subtree = lw;
            match res {
                Some((edges, propose)) => {
                    p_sharp_bck_fwd = edges.p_sharp_beg;
                    p_sharp_bck_bck = edges.p_sharp_end;
                    p_bck_fwd = edges.p_beg;
                    rho_bck = edges.rho;
                    result = Some(propose);
                }
                None => {
                    rho_bck = Vec::new();
                    result = None;
                }
            }
        }
        let Some(propose) = result else { break };
        depth += 1;

        if lw_subtree > log_sum_weight || rng.gen::<f64>() < (lw_subtree - log_sum_weight).exp() {
            sample = propose;
        }
        log_sum_weight = log_sum_exp(log_sum_weight, lw_subtree);

        rho = add(&rho_bck, &rho_fwd);
        let mut persist = no_u_turn(&p_sharp_bck_bck, &p_sharp_fwd_fwd, &rho);
        persist &= no_u_turn(&p_sharp_bck_bck, &p_sharp_fwd_bck, &add(&rho_bck, &p_fwd_bck));
        persist &= no_u_turn(&p_sharp_bck_fwd, &p_sharp_fwd_fwd, &add(&rho_fwd, &p_bck_fwd));
        if !persist {
            break;
        }
    }

    let info = tree.info;
    *z = sample;
    Step {
        accept_stat: if info.n_leapfrog > 0 {
            info.sum_metro_prob / info.n_leapfrog as f64
        } else {
            0.0
        },
        depth,
        divergent: info.divergent,
    }
}

/// Heuristic initial step size: double or halve until the one-step
/// acceptance probability crosses 0.8.
fn find_reasonable_step<T: LogDensity + ?Sized>(
    ham: &Hamiltonian<'_, T>,
    z: &Point,
    mut eps: f64,
    rng: &mut RngStream,
) -> f64 {
    let threshold = 0.8f64.ln();
    let trial = |eps: f64, rng: &mut RngStream| {
        let mut w = z.clone();
        ham.sample_momentum(&mut w, rng);
        let h0 = ham.energy(&w);
        ham.leapfrog(&mut w, eps);
        h0 - ham.energy(&w)
    };
    let delta = trial(eps, rng);
    let up = delta > threshold;
    for _ in 0..100 {
        let delta = trial(eps, rng);
        if up && !(delta > threshold) || !up && !(delta < threshold) {
            break;
        }
        let next = if up { 2.0 * eps } else { 0.5 * eps };
        if !(1e-12..=1e7).contains(&next) {
            break;
        }
        eps = next;
    }
    eps
}

struct DualAveraging {
    mu: f64,
    s_bar: f64,
    x_bar: f64,
    counter: f64,
    target: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    fn new(eps: f64, target: f64) -> Self {
        Self { mu: (10.0 * eps).ln(), s_bar: 0.0, x_bar: 0.0, counter: 0.0, target }
    }

    fn update(&mut self, accept_stat: f64) -> f64 {
        self.counter += 1.0;
        let stat = accept_stat.min(1.0);
        let eta = 1.0 / (self.counter + Self::T0);
        self.s_bar = (1.0 - eta) * self.s_bar + eta * (self.target - stat);
        let x = self.mu - self.s_bar * self.counter.sqrt() / Self::GAMMA;
        let w = self.counter.powf(-Self::KAPPA);
        self.x_bar = (1.0 - w) * self.x_bar + w * x;
        x.exp()
    }

    fn adapted(&self) -> f64 {
        self.x_bar.exp()
    }
}

/// Start of the first slow metric-adaptation window and the end points
/// (exclusive) of every window.
pub(crate) fn metric_windows(n_warmup: usize) -> (usize, Vec<usize>) {
    let (mut init, mut term, mut base) = (75, 50, 25);
    if n_warmup < 20 {
        return (n_warmup, Vec::new());
    }
    if init + term + base > n_warmup {
        init = (0.15 * n_warmup as f64) as usize;
        term = (0.1 * n_warmup as f64) as usize;
        base = n_warmup - init - term;
    }
    let slow_end = n_warmup - term;
    let mut ends = Vec::new();
    let (mut start, mut size) = (init, base);
    while start < slow_end {
        let mut end = start + size;
        if end + 2 * size > slow_end {
            end = slow_end;
        }
        ends.push(end);
        start = end;
        size *= 2;
    }
    (init, ends)
}

/// Running mean and variance.
struct Welford {
    n: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    fn new(dim: usize) -> Self {
        Self { n: 0.0, mean: vec![0.0; dim], m2: vec![0.0; dim] }
    }

    fn push(&mut self, x: &[f64]) {
        self.n += 1.0;
        for ((m, s), v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(x) {
            let delta = v - *m;
            *m += delta / self.n;
            *s += delta * (v - *m);
        }
    }

    /// Sample variance shrunk towards a small constant.
    fn regularized_variance(&self) -> Vec<f64> {
        let n = self.n;
        self.m2
            .iter()
            .map(|s| (n / (n + 5.0)) * s / (n - 1.0) + 1e-3 * 5.0 / (n + 5.0))
            .collect()
    }
}

fn initial_point<T: LogDensity + ?Sized>(target: &T, radius: f64, rng: &mut RngStream) -> Result<Point> {
    let dim = target.dim();
    for _ in 0..100 {
        let q: Vec<f64> = (0..dim).map(|_| rng.gen_range(-radius..radius)).collect();
        let mut grad = vec![0.0; dim];
        if let Ok(lp) = target.log_density_and_grad(&q, &mut grad) {
            if lp.is_finite() && grad.iter().all(|g| g.is_finite()) {
                return Ok(Point { q, p: vec![0.0; dim], grad, lp });
            }
        }
    }
    Err(EwsError::Degenerate("no finite initial point found in 100 attempts".into()))
}

/// Runs one chain with warmup adaptation and returns its kept draws.
pub fn run_chain<T: LogDensity + ?Sized>(
    target: &T,
    settings: &SamplerSettings,
    rng: &mut RngStream,
) -> Result<ChainOutput> {
    settings.validate()?;
    let dim = target.dim();
    let n_warmup = settings.n_warmup();
    let mut ham = Hamiltonian { target, inv_metric: vec![1.0; dim] };
    let mut z = initial_point(target, settings.init_radius, rng)?;

    let mut eps = find_reasonable_step(&ham, &z, 1.0, rng);
    let mut averaging = DualAveraging::new(eps, settings.target_accept);
    let (first_window_start, windows) = metric_windows(n_warmup);
    let mut next_window = 0;
    let mut welford = Welford::new(dim);

    let mut out = ChainOutput {
        draws: Vec::with_capacity(settings.n_draws()),
        log_density: Vec::with_capacity(settings.n_draws()),
        n_divergent: 0,
        mean_accept_stat: 0.0,
        mean_tree_depth: 0.0,
        step_size: eps,
        inv_metric: Vec::new(),
    };
    for iter in 0..settings.n_iterations {
        let step = transition(&ham, &mut z, eps, settings.max_tree_depth, rng);
        if iter < n_warmup {
            eps = averaging.update(step.accept_stat);
            if iter >= first_window_start && next_window < windows.len() {
                welford.push(&z.q);
                if iter + 1 == windows[next_window] {
                    ham.inv_metric = welford.regularized_variance();
                    welford = Welford::new(dim);
                    next_window += 1;
                    eps = find_reasonable_step(&ham, &z, eps, rng);
                    averaging = DualAveraging::new(eps, settings.target_accept);
                }
            }
            if iter + 1 == n_warmup {
                eps = averaging.adapted();
            }
        } else {
            out.n_divergent += usize::from(step.divergent);
            out.mean_accept_stat += step.accept_stat;
            out.mean_tree_depth += step.depth as f64;
            out.draws.push(z.q.clone());
            out.log_density.push(z.lp);
        }
    }
    let kept = out.draws.len() as f64;
    out.mean_accept_stat /= kept;
    out.mean_tree_depth /= kept;
    out.step_size = eps;
    out.inv_metric = ham.inv_metric;
    Ok(out)
}

/// Runs `settings.n_chains` chains in parallel, chain `c` on stream
/// `rng.derive("chain", c)`.
pub fn run_chains<T: LogDensity + ?Sized>(
    target: &T,
    settings: &SamplerSettings,
    rng: &RngStream,
) -> Result<Vec<ChainOutput>> {
    settings.validate()?;
    (0..settings.n_chains)
        .into_par_iter()
        .map(|c| {
            let mut chain_rng = rng.derive("chain", c as u64);
            run_chain(target, settings, &mut chain_rng)
        })
        .collect()
}

//! Test-only oracles, kept independent of the library code paths they check.
#![allow(dead_code)]

use ewscope::simulator::CommunityParams;

/// Right-hand side of the deterministic community model, written out
/// directly from the model equations.
pub fn community_rhs(p: &CommunityParams, x: &[f64]) -> Vec<f64> {
    let sp = p.n_pollinators;
    let sa = p.n_plants;
    let mut out = vec![0.0; sp + sa];
    for i in 0..sp {
        let mut m = 0.0;
        for k in 0..sa {
            m += p.gamma_pollinator[i][k] * x[sp + k];
        }
        let mut c = 0.0;
        for j in 0..sp {
            c += p.competition_pollinator[i][j] * x[j];
        }
        out[i] = x[i] * (p.r_pollinator[i] + m / (1.0 + p.half_saturation * m) - c);
    }
    for k in 0..sa {
        let mut m = 0.0;
        for i in 0..sp {
            m += p.gamma_plant[k][i] * x[i];
        }
        let mut c = 0.0;
        for j in 0..sa {
            c += p.competition_plant[k][j] * x[sp + j];
        }
        out[sp + k] = x[sp + k] * (p.r_plant[k] + m / (1.0 + p.half_saturation * m) - c);
    }
    out
}

/// Adaptive Dormand–Prince 5(4) integration of `y' = f(y)` from `y0`,
/// returning the state at each requested output time (ascending, >= 0).
pub fn dopri5<F: Fn(&[f64]) -> Vec<f64>>(f: F, y0: &[f64], outputs: &[f64], tol: f64) -> Vec<Vec<f64>> {
    const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let _ = C;
    let n = y0.len();
    let mut y = y0.to_vec();
    let mut t = 0.0;
    let mut h: f64 = 1e-3;
    let mut results = Vec::with_capacity(outputs.len());
    for &target in outputs {
        while t < target - 1e-14 {
            let step = h.min(target - t);
            let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
            for s in 0..7 {
                let mut ys = y.clone();
                for (j, kj) in k.iter().enumerate() {
                    for i in 0..n {
                        ys[i] += step * A[s][j] * kj[i];
                    }
                }
                k.push(f(&ys));
            }
            let mut y5 = y.clone();
            let mut err = 0.0f64;
            for i in 0..n {
                let mut d5 = 0.0;
                let mut d4 = 0.0;
                for s in 0..7 {
                    d5 += B5[s] * k[s][i];
                    d4 += B4[s] * k[s][i];
                }
                y5[i] += step * d5;
                let sc = tol + tol * y[i].abs().max(y5[i].abs());
                err = err.max((step * (d5 - d4)).abs() / sc);
            }
            if err <= 1.0 {
                t += step;
                y = y5;
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = step * factor;
        }
        results.push(y.clone());
    }
    results
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

/// Asymptotic critical value of the two-sample KS statistic at level alpha.
pub fn ks_critical(n: usize, m: usize, alpha: f64) -> f64 {
    let c = (-0.5 * (alpha / 2.0).ln()).sqrt();
    c * (((n + m) as f64) / (n * m) as f64).sqrt()
}

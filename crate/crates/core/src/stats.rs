//! Rank correlation and lag-1 autocorrelation primitives.

use serde::{Deserialize, Serialize};

use crate::error::{EwsError, Result};

/// How tied pairs are scored by [`kendall_tau_with`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieRule {
    /// A pair with `t_i <= t_j` is concordant iff `y_i <= y_j`. Ties in `y`
    /// count as concordant; ties in `t` are concordant only when `y` ties too.
    /// Every pair is either concordant or discordant.
    #[default]
    TiesConcordant,
    /// Classical tau-a: tied pairs are neither concordant nor discordant.
    Strict,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauSummary {
    pub tau: f64,
    pub n_concordant: u64,
    pub n_discordant: u64,
    pub n_pairs: u64,
}

pub fn kendall_tau(t: &[f64], y: &[f64]) -> Result<TauSummary> {
    kendall_tau_with(t, y, TieRule::TiesConcordant)
}

/// Kendall's tau-a, `(C - D) / (n (n - 1) / 2)`, in `O(n log n)`.
///
/// Pairs are sorted by `(t, y)`; discordant pairs with distinct `t` are then
/// exactly the strict inversions of the `y` sequence, counted by merge sort.
pub fn kendall_tau_with(t: &[f64], y: &[f64], rule: TieRule) -> Result<TauSummary> {
    let n = t.len();
    if n != y.len() {
        return Err(EwsError::invalid(format!(
            "kendall_tau: length mismatch ({n} vs {})",
            y.len()
        )));
    }
    if n < 2 {
        return Err(EwsError::invalid("kendall_tau needs at least 2 points"));
    }
    if t.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(EwsError::invalid("kendall_tau: non-finite input"));
    }
    let n_pairs = (n as u64) * (n as u64 - 1) / 2;

    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| t[a].total_cmp(&t[b]).then(y[a].total_cmp(&y[b])));

    // pairs tied in t, and tied in both t and y, from runs in the sorted order
    let mut t_ties = 0u64;
    let mut both_ties = 0u64;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && t[idx[j]] == t[idx[i]] {
            j += 1;
        }
        t_ties += choose2(j - i);
        let mut k = i;
        while k < j {
            let mut m = k + 1;
            while m < j && y[idx[m]] == y[idx[k]] {
                m += 1;
            }
            both_ties += choose2(m - k);
            k = m;
        }
        i = j;
    }

    let mut ys: Vec<f64> = idx.iter().map(|&k| y[k]).collect();
    let inversions = count_inversions(&mut ys);

    let (n_concordant, n_discordant) = match rule {
        TieRule::TiesConcordant => {
            // t-tied pairs with distinct y are discordant
            let discordant = inversions + (t_ties - both_ties);
            (n_pairs - discordant, discordant)
        }
        TieRule::Strict => {
            // ys is now sorted; count pairs tied in y
            let mut y_ties = 0u64;
            let mut a = 0;
            while a < n {
                let mut b = a + 1;
                while b < n && ys[b] == ys[a] {
                    b += 1;
                }
                y_ties += choose2(b - a);
                a = b;
            }
            let untied = n_pairs + both_ties - t_ties - y_ties;
            (untied - inversions, inversions)
        }
    };
    let tau = (n_concordant as f64 - n_discordant as f64) / n_pairs as f64;
    Ok(TauSummary {
        tau,
        n_concordant,
        n_discordant,
        n_pairs,
    })
}

/// Kendall's tau of `values` against their integer time stamps.
pub fn kendall_tau_times(times: &[i64], values: &[f64]) -> Result<TauSummary> {
    let t: Vec<f64> = times.iter().map(|&x| x as f64).collect();
    kendall_tau(&t, values)
}

fn choose2(k: usize) -> u64 {
    let k = k as u64;
    k * k.saturating_sub(1) / 2
}

/// Number of pairs `i < j` with `v[i] > v[j]`; sorts `v` in place.
fn count_inversions(v: &mut [f64]) -> u64 {
    let n = v.len();
    let mut buf = vec![0.0; n];
    let mut count = 0u64;
    let mut width = 1;
    while width < n {
        let mut lo = 0;
        while lo < n {
            let mid = (lo + width).min(n);
            let hi = (lo + 2 * width).min(n);
            let (mut a, mut b, mut k) = (lo, mid, lo);
            while a < mid && b < hi {
                if v[a] <= v[b] {
                    buf[k] = v[a];
                    a += 1;
                } else {
                    buf[k] = v[b];
                    count += (mid - a) as u64;
                    b += 1;
                }
                k += 1;
            }
            buf[k..k + (mid - a)].copy_from_slice(&v[a..mid]);
            k += mid - a;
            buf[k..k + (hi - b)].copy_from_slice(&v[b..hi]);
            lo = hi;
        }
        v.copy_from_slice(&buf);
        width *= 2;
    }
    count
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Sample quantile with linear interpolation between order statistics
/// (the default definition in R and numpy). `p` must lie in `[0, 1]`.
pub fn quantile(x: &[f64], p: f64) -> f64 {
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, p)
}

pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty() && (0.0..=1.0).contains(&p));
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Lag-1 autocorrelation as the least-squares slope of `x[t+1]` on `x[t]`
/// with an intercept (the AR(1) maximum-likelihood coefficient).
pub fn lag1_autocorr(x: &[f64]) -> Result<f64> {
    let n = x.len();
    if n < 3 {
        return Err(EwsError::invalid(format!(
            "lag-1 autocorrelation needs at least 3 points, got {n}"
        )));
    }
    let lead = &x[..n - 1];
    let next = &x[1..];
    let m_lead = mean(lead);
    let m_next = mean(next);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (a, b) in lead.iter().zip(next) {
        let da = a - m_lead;
        sxy += da * (b - m_next);
        sxx += da * da;
    }
    let scale = lead.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if sxx <= f64::EPSILON * f64::EPSILON * scale * scale * n as f64 || sxx == 0.0 {
        return Err(EwsError::Degenerate("zero variance in lag-1 autocorrelation".into()));
    }
    Ok(sxy / sxx)
}

//! Summary statistics for benchmark tables.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, FisherSnedecor, Normal};

use crate::error::{EwsError, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnovaResult {
    pub f: f64,
    pub df_between: usize,
    pub df_within: usize,
    pub p_value: f64,
}

/// One-way ANOVA across groups, e.g. per-experiment TPRs grouped by
/// indicator.
pub fn one_way_anova(groups: &[Vec<f64>]) -> Result<AnovaResult> {
    let k = groups.len();
    let n: usize = groups.iter().map(Vec::len).sum();
    if k < 2 || groups.iter().any(Vec::is_empty) || n <= k {
        return Err(EwsError::invalid("ANOVA needs at least two non-empty groups and more observations than groups"));
    }
    let grand = groups.iter().flatten().sum::<f64>() / n as f64;
    let mut ss_between = 0.0;
    let mut ss_within = 0.0;
    for g in groups {
        let m = g.iter().sum::<f64>() / g.len() as f64;
        ss_between += g.len() as f64 * (m - grand).powi(2);
        ss_within += g.iter().map(|x| (x - m).powi(2)).sum::<f64>();
    }
    let (df_b, df_w) = (k - 1, n - k);
    if ss_within == 0.0 {
        return Err(EwsError::Degenerate("ANOVA groups have zero within-group variance".into()));
    }
    let f = (ss_between / df_b as f64) / (ss_within / df_w as f64);
    let dist = FisherSnedecor::new(df_b as f64, df_w as f64).expect("positive degrees of freedom");
    Ok(AnovaResult { f, df_between: df_b, df_within: df_w, p_value: dist.sf(f) })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrendTest {
    pub z: f64,
    /// One-sided P-value against an increasing trend.
    pub p_increasing: f64,
}

/// Cochran–Armitage test for a trend in binomial proportions across
/// ordered groups with the given scores.
pub fn cochran_armitage(successes: &[usize], totals: &[usize], scores: &[f64]) -> Result<TrendTest> {
    let k = successes.len();
    if k < 2 || totals.len() != k || scores.len() != k {
        return Err(EwsError::invalid("trend test needs matching successes, totals and scores for at least two groups"));
    }
    if successes.iter().zip(totals).any(|(s, n)| s > n) {
        return Err(EwsError::invalid("successes exceed totals"));
    }
    let n: f64 = totals.iter().map(|&v| v as f64).sum();
    let r: f64 = successes.iter().map(|&v| v as f64).sum();
    let p = r / n;
    let s_bar = scores.iter().zip(totals).map(|(s, &m)| s * m as f64).sum::<f64>() / n;
    let num: f64 = successes
        .iter()
        .zip(totals)
        .zip(scores)
        .map(|((&x, &m), s)| (s - s_bar) * (x as f64 - m as f64 * p))
        .sum();
    let var = p * (1.0 - p) * totals.iter().zip(scores).map(|(&m, s)| m as f64 * (s - s_bar).powi(2)).sum::<f64>();
    if var == 0.0 {
        return Err(EwsError::Degenerate("trend test has zero variance (all or no successes, or equal scores)".into()));
    }
    let z = num / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    Ok(TrendTest { z, p_increasing: normal.sf(z) })
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, total: usize, z: f64) -> (f64, f64) {
    if total == 0 {
        return (0.0, 1.0);
    }
    let n = total as f64;
    let p = successes as f64 / n;
    let denom = 1.0 + z * z / n;
    let centre = (p + z * z / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

//! Gaussian-kernel (Nadaraya–Watson) detrending.

use nalgebra::DMatrix;

use crate::error::{EwsError, Result};
use crate::series::MultiSeries;

/// Detrended residuals together with the trend they were taken from.
#[derive(Clone, Debug)]
pub struct ResidualSeries {
    residuals: MultiSeries,
    trend: DMatrix<f64>,
    bandwidth_frac: f64,
}

impl ResidualSeries {
    /// Treat `series` as already detrended: zero trend, residuals = input.
    pub fn undetrended(series: MultiSeries) -> Self {
        let trend = DMatrix::zeros(series.len(), series.dim());
        Self {
            residuals: series,
            trend,
            bandwidth_frac: f64::INFINITY,
        }
    }

    pub fn residuals(&self) -> &MultiSeries {
        &self.residuals
    }

    pub fn trend(&self) -> &DMatrix<f64> {
        &self.trend
    }

    pub fn bandwidth_frac(&self) -> f64 {
        self.bandwidth_frac
    }

    pub fn len(&self) -> usize {
        self.residuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residuals.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.residuals.dim()
    }

    pub fn times(&self) -> &[i64] {
        self.residuals.times()
    }
}

/// Smooths each feature separately with a Gaussian kernel whose standard
/// deviation is `bandwidth_frac * T` time steps. Near the ends the weights are
/// renormalised over the points that exist.
pub fn detrend_gaussian(series: &MultiSeries, bandwidth_frac: f64) -> Result<ResidualSeries> {
    if !(bandwidth_frac > 0.0 && bandwidth_frac <= 1.0) {
        return Err(EwsError::invalid(format!(
            "bandwidth fraction must lie in (0, 1], got {bandwidth_frac}"
        )));
    }
    let (t_len, d) = series.values().shape();
    if t_len < 3 {
        return Err(EwsError::invalid("detrending needs at least 3 time points"));
    }
    let sd = bandwidth_frac * t_len as f64;
    let inv = -0.5 / (sd * sd);
    let kernel: Vec<f64> = (0..t_len).map(|lag| (inv * (lag * lag) as f64).exp()).collect();

    let mut trend = DMatrix::zeros(t_len, d);
    for j in 0..d {
        let x = series.feature(j);
        for i in 0..t_len {
            let mut num = 0.0;
            let mut den = 0.0;
            for (s, xs) in x.iter().enumerate() {
                let w = kernel[i.abs_diff(s)];
                num += w * xs;
                den += w;
            }
            trend[(i, j)] = num / den;
        }
    }
    let residual_values = series.values() - &trend;
    let mut residuals = MultiSeries::new(residual_values, series.times().to_vec())?;
    if let Some(names) = series.feature_names() {
        residuals = residuals.with_feature_names(names.to_vec())?;
    }
    Ok(ResidualSeries {
        residuals,
        trend,
        bandwidth_frac,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::stats::{lag1_autocorr, mean};
    use proptest::prelude::*;
    use rand_distr::{Distribution, Normal};

    fn linear_plus_ar1(seed: u64) -> MultiSeries {
        let mut rng = RngStream::from_seed(seed);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let mut e = 0.0;
        let x: Vec<f64> = (0..150)
            .map(|t| {
                e = 0.5 * e + noise.sample(&mut rng);
                0.1 * t as f64 + e
            })
            .collect();
        MultiSeries::from_columns(&[x], 0).unwrap()
    }

    #[test]
    fn constant_series_has_zero_residuals() {
        let s = MultiSeries::from_columns(&[vec![3.25; 40], vec![-1.0; 40]], 0).unwrap();
        let r = detrend_gaussian(&s, 0.1).unwrap();
        assert!(r.residuals().values().iter().all(|v| v.abs() < 1e-12));
        assert!(r.trend().column(0).iter().all(|v| (v - 3.25).abs() < 1e-12));
    }

    #[test]
    fn wide_bandwidth_residual_mean_is_bounded_by_weight_spread() {
        // mean(residual) = sum_s (x_s - xbar) (1/T - c_s), where c_s is the
        // average normalised weight of point s. Zero for constants, and small
        // (not exactly zero) otherwise.
        let s = linear_plus_ar1(5);
        let flat: Vec<f64> = s.feature(0).iter().enumerate().map(|(t, v)| v - 0.1 * t as f64).collect();
        let t_len = flat.len();
        let s = MultiSeries::from_columns(std::slice::from_ref(&flat), 0).unwrap();
        let r = detrend_gaussian(&s, 1.0).unwrap();
        let sd = t_len as f64;
        let w = |i: usize, j: usize| (-0.5 * ((i as f64 - j as f64) / sd).powi(2)).exp();
        let row_sums: Vec<f64> = (0..t_len).map(|i| (0..t_len).map(|j| w(i, j)).sum()).collect();
        let c: Vec<f64> = (0..t_len)
            .map(|j| (0..t_len).map(|i| w(i, j) / row_sums[i]).sum::<f64>() / t_len as f64)
            .collect();
        let xbar = mean(&flat);
        let predicted: f64 = flat.iter().zip(&c).map(|(x, cs)| (x - xbar) * (1.0 / t_len as f64 - cs)).sum();
        let observed = mean(r.residuals().feature(0));
        assert!((observed - predicted).abs() < 1e-12, "{observed} vs {predicted}");
        assert!(observed.abs() < 1e-3);
    }

    #[test]
    fn rejects_bad_bandwidth() {
        let s = MultiSeries::from_columns(&[vec![1.0, 2.0, 3.0]], 0).unwrap();
        assert!(detrend_gaussian(&s, 0.0).is_err());
        assert!(detrend_gaussian(&s, -0.1).is_err());
        assert!(detrend_gaussian(&s, 1.5).is_err());
        let short = MultiSeries::from_columns(&[vec![1.0, 2.0]], 0).unwrap();
        assert!(detrend_gaussian(&short, 0.5).is_err());
    }

    #[test]
    fn residuals_plus_trend_reconstruct_input() {
        let s = linear_plus_ar1(1);
        let r = detrend_gaussian(&s, 0.1).unwrap();
        let back = r.residuals().values() + r.trend();
        for (a, b) in back.iter().zip(s.values().iter()) {
            assert!((a - b).abs() <= 4.0 * f64::EPSILON * b.abs().max(1.0));
        }
    }

    #[test]
    fn linear_trend_recovers_ar1_coefficient_away_from_edges() {
        // Renormalised weights are symmetric only two kernel widths in from
        // either end; there a linear trend is reproduced exactly.
        let s = linear_plus_ar1(2024);
        let r = detrend_gaussian(&s, 0.1).unwrap();
        let margin = 30;
        let x = r.residuals().feature(0);
        let phi = lag1_autocorr(&x[margin..x.len() - margin]).unwrap();
        assert!((phi - 0.5).abs() <= 0.15, "phi = {phi}");
    }

    #[test]
    fn linear_trend_edge_bias_inflates_full_series_estimate() {
        // Near the ends the renormalised smoother flattens a steep trend, and
        // the leftover ramp dominates the residual autocorrelation.
        let s = linear_plus_ar1(2024);
        let r = detrend_gaussian(&s, 0.1).unwrap();
        let full = lag1_autocorr(r.residuals().feature(0)).unwrap();
        assert!(full > 0.9, "full-series phi = {full}");
        let n = s.len();
        let edge = r.residuals().values()[(n - 1, 0)];
        // bias at the last point ~ slope * sd * sqrt(2/pi)
        assert!(edge > 0.8 && edge < 1.6, "edge residual {edge}");
    }

    proptest! {
        #[test]
        fn translation_equivariant(seed in any::<u64>(), c in -10.0f64..10.0, bw in 0.02f64..1.0) {
            let s = linear_plus_ar1(seed);
            let shifted: Vec<f64> = s.feature(0).iter().map(|v| v + c).collect();
            let s2 = MultiSeries::from_columns(&[shifted], 0).unwrap();
            let r1 = detrend_gaussian(&s, bw).unwrap();
            let r2 = detrend_gaussian(&s2, bw).unwrap();
            for i in 0..s.len() {
                prop_assert!((r2.trend()[(i, 0)] - r1.trend()[(i, 0)] - c).abs() < 1e-12);
                prop_assert!((r2.residuals().values()[(i, 0)] - r1.residuals().values()[(i, 0)]).abs() < 1e-12);
            }
        }
    }
}

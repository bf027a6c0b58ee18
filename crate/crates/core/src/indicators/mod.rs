//! Sliding-window early-warning indicators on detrended residuals.

mod maf;

pub use maf::{covariance, differences, maf_basis, MafBasis, DEFAULT_REGULARIZATION};

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::detrend::{detrend_gaussian, ResidualSeries};
use crate::error::{EwsError, Result};
use crate::series::MultiSeries;
use crate::stats::{kendall_tau_times, lag1_autocorr, variance, TauSummary};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndicatorName {
    AcMean,
    AcMax,
    AcPc1,
    AcMaf,
    VarMaf,
    EigenMaf,
}

impl IndicatorName {
    pub const ALL: [IndicatorName; 6] = [
        IndicatorName::AcMean,
        IndicatorName::AcMax,
        IndicatorName::AcPc1,
        IndicatorName::AcMaf,
        IndicatorName::VarMaf,
        IndicatorName::EigenMaf,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            IndicatorName::AcMean => "ac_mean",
            IndicatorName::AcMax => "ac_max",
            IndicatorName::AcPc1 => "ac_pc1",
            IndicatorName::AcMaf => "ac_maf",
            IndicatorName::VarMaf => "var_maf",
            IndicatorName::EigenMaf => "eigen_maf",
        }
    }
}

impl fmt::Display for IndicatorName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IndicatorName {
    type Err = EwsError;

    fn from_str(s: &str) -> Result<Self> {
        IndicatorName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| EwsError::invalid(format!("unknown indicator `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowSpec {
    pub window_frac: f64,
    pub stride: usize,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self {
            window_frac: 0.5,
            stride: 1,
        }
    }
}

impl WindowSpec {
    pub const MIN_LENGTH: usize = 5;

    /// Window length for a series of `t_len` points.
    pub fn length(&self, t_len: usize) -> Result<usize> {
        if !(self.window_frac > 0.0 && self.window_frac < 1.0) {
            return Err(EwsError::invalid(format!(
                "window fraction must lie in (0, 1), got {}",
                self.window_frac
            )));
        }
        if self.stride == 0 {
            return Err(EwsError::invalid("window stride must be positive"));
        }
        let w = (self.window_frac * t_len as f64).round() as usize;
        if w < Self::MIN_LENGTH {
            return Err(EwsError::invalid(format!(
                "window of {w} points is shorter than {}",
                Self::MIN_LENGTH
            )));
        }
        Ok(w)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndicatorTrajectory {
    pub indicator: IndicatorName,
    pub window_end_times: Vec<i64>,
    pub values: Vec<f64>,
    pub tau: TauSummary,
}

#[derive(Serialize)]
struct TrajectorySummary<'a> {
    indicator: &'a str,
    tau: f64,
    n_windows: usize,
}

impl IndicatorTrajectory {
    fn new(indicator: IndicatorName, window_end_times: Vec<i64>, values: Vec<f64>) -> Result<Self> {
        let tau = kendall_tau_times(&window_end_times, &values)?;
        Ok(Self {
            indicator,
            window_end_times,
            values,
            tau,
        })
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "window_end_time,value")?;
        for (t, v) in self.window_end_times.iter().zip(&self.values) {
            writeln!(w, "{t},{v}")?;
        }
        Ok(())
    }

    /// `{indicator, tau, n_windows}`.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::to_value(TrajectorySummary {
            indicator: self.indicator.as_str(),
            tau: self.tau.tau,
            n_windows: self.values.len(),
        })
        .expect("summary serialises")
    }
}

/// Lag-1 autocorrelation of every column of a window.
pub fn ac_per_feature(window: &DMatrix<f64>) -> Result<Vec<f64>> {
    if window.nrows() < WindowSpec::MIN_LENGTH {
        return Err(EwsError::invalid(format!(
            "window needs at least {} rows",
            WindowSpec::MIN_LENGTH
        )));
    }
    window
        .column_iter()
        .enumerate()
        .map(|(j, col)| {
            let x: Vec<f64> = col.iter().copied().collect();
            lag1_autocorr(&x).map_err(|e| match e {
                EwsError::Degenerate(_) => EwsError::Degenerate(format!("feature {} has zero variance", j + 1)),
                other => other,
            })
        })
        .collect()
}

/// Leading principal direction of the centred window (no rescaling).
pub fn first_principal_component(window: &DMatrix<f64>) -> DVector<f64> {
    let eig = SymmetricEigen::new(covariance(window));
    let k = eig.eigenvalues.imax();
    let mut v = eig.eigenvectors.column(k).into_owned();
    maf::orient(&mut v);
    v
}

fn project(window: &DMatrix<f64>, v: &DVector<f64>) -> Vec<f64> {
    (window * v).iter().copied().collect()
}

/// All requested indicators for one window.
fn window_values(window: &DMatrix<f64>, names: &[IndicatorName]) -> Result<Vec<f64>> {
    let needs_ac = names.iter().any(|n| matches!(n, IndicatorName::AcMean | IndicatorName::AcMax));
    let needs_maf = names
        .iter()
        .any(|n| matches!(n, IndicatorName::AcMaf | IndicatorName::VarMaf | IndicatorName::EigenMaf));
    let ac = if needs_ac { Some(ac_per_feature(window)?) } else { None };
    let maf = if needs_maf {
        Some(maf_basis(window, DEFAULT_REGULARIZATION)?)
    } else {
        None
    };
    names
        .iter()
        .map(|name| {
            Ok(match name {
                IndicatorName::AcMean => {
                    let ac = ac.as_ref().expect("computed");
                    ac.iter().sum::<f64>() / ac.len() as f64
                }
                IndicatorName::AcMax => ac
                    .as_ref()
                    .expect("computed")
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max),
                IndicatorName::AcPc1 => lag1_autocorr(&project(window, &first_principal_component(window)))?,
                IndicatorName::AcMaf => {
                    lag1_autocorr(&project(window, &maf.as_ref().expect("computed").first()))?
                }
                IndicatorName::VarMaf => {
                    let v = maf.as_ref().expect("computed").first();
                    let unit = &v / v.norm();
                    variance(&project(window, &unit))
                }
                IndicatorName::EigenMaf => -maf.as_ref().expect("computed").eigenvalues[0],
            })
        })
        .collect()
}

/// Indicator trajectories over right-aligned sliding windows of already
/// detrended residuals, indexed by window end time.
pub fn trajectories_from_residuals(
    residuals: &ResidualSeries,
    names: &[IndicatorName],
    window: &WindowSpec,
) -> Result<Vec<IndicatorTrajectory>> {
    let series = residuals.residuals();
    let t_len = series.len();
    let w = window.length(t_len)?;
    if t_len < w + 1 {
        return Err(EwsError::invalid(format!(
            "series of {t_len} points is too short for windows of {w}"
        )));
    }
    let values = series.values();
    let times = series.times();
    let mut ends = Vec::new();
    let mut per_name: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    let mut start = 0;
    while start + w <= t_len {
        let end_time = times[start + w - 1];
        let block = values.rows(start, w).into_owned();
        let vals = window_values(&block, names).map_err(|e| EwsError::Window {
            end_time,
            source: Box::new(e),
        })?;
        for (acc, v) in per_name.iter_mut().zip(vals) {
            acc.push(v);
        }
        ends.push(end_time);
        start += window.stride;
    }
    if ends.len() < 2 {
        return Err(EwsError::invalid("fewer than 2 windows; increase length or reduce stride"));
    }
    names
        .iter()
        .zip(per_name)
        .map(|(&name, vals)| IndicatorTrajectory::new(name, ends.clone(), vals))
        .collect()
}

/// Detrend once over the whole series, then compute each indicator per window.
pub fn indicator_trajectories(
    series: &MultiSeries,
    names: &[IndicatorName],
    window: &WindowSpec,
    bandwidth_frac: f64,
) -> Result<Vec<IndicatorTrajectory>> {
    let residuals = detrend_gaussian(series, bandwidth_frac)?;
    trajectories_from_residuals(&residuals, names, window)
}

pub fn indicator_trajectory(
    series: &MultiSeries,
    name: IndicatorName,
    window: &WindowSpec,
    bandwidth_frac: f64,
) -> Result<IndicatorTrajectory> {
    indicator_trajectories(series, &[name], window, bandwidth_frac).map(|mut v| v.remove(0))
}

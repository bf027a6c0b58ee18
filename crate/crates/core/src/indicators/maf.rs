//! Min/max autocorrelation factors.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{EwsError, Result};

/// Generalised eigenvectors of `Cov(Δx) v = λ Cov(x) v`, ascending in `λ`.
///
/// Small `λ` means the projection changes little from step to step, i.e.
/// high lag-1 autocorrelation. Columns of `vectors` satisfy
/// `vᵀ Cov(x) v = 1` and are signed so their largest-magnitude entry is
/// positive.
#[derive(Clone, Debug)]
pub struct MafBasis {
    pub vectors: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    /// Ridge added to `Cov(x)`, zero when none was needed.
    pub ridge: f64,
}

impl MafBasis {
    pub fn first(&self) -> DVector<f64> {
        self.vectors.column(0).into_owned()
    }
}

pub const DEFAULT_REGULARIZATION: f64 = 1e-8;

/// Condition threshold on the Cholesky diagonal below which `Cov(x)` counts
/// as near-singular.
const NEAR_SINGULAR: f64 = 1e-10;

/// Sample covariance of the columns of `x` (rows are observations).
pub fn covariance(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let mut centered = x.clone();
    for mut col in centered.column_iter_mut() {
        let m = col.mean();
        col.add_scalar_mut(-m);
    }
    let mut cov = centered.transpose() * &centered;
    cov /= (n - 1) as f64;
    cov
}

/// First differences `x[t+1] - x[t]`.
pub fn differences(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    x.rows(1, n - 1) - x.rows(0, n - 1)
}

pub fn maf_basis(window: &DMatrix<f64>, regularization: f64) -> Result<MafBasis> {
    let (n, d) = window.shape();
    if n < d + 2 {
        return Err(EwsError::invalid(format!(
            "MAF needs at least D + 2 = {} rows, got {n}",
            d + 2
        )));
    }
    let cov_x = covariance(window);
    let cov_dx = covariance(&differences(window));

    let mut ridge = 0.0;
    let chol = match cov_x.clone().cholesky() {
        Some(c) if well_conditioned(c.l_dirty()) => c,
        _ => {
            ridge = regularization * cov_x.trace() / d as f64;
            if !(ridge > 0.0) {
                return Err(EwsError::SingularCovariance);
            }
            let mut reg = cov_x.clone();
            for i in 0..d {
                reg[(i, i)] += ridge;
            }
            match reg.cholesky() {
                Some(c) if well_conditioned(c.l_dirty()) => c,
                _ => return Err(EwsError::SingularCovariance),
            }
        }
    };
    let l = chol.l();
    // C = L^-1 Cov(Δx) L^-T
    let left = l
        .solve_lower_triangular(&cov_dx)
        .ok_or(EwsError::SingularCovariance)?;
    let c = l
        .solve_lower_triangular(&left.transpose())
        .ok_or(EwsError::SingularCovariance)?;
    let c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let lt = l.transpose();
    let mut vectors = DMatrix::zeros(d, d);
    let mut eigenvalues = Vec::with_capacity(d);
    for (k, &idx) in order.iter().enumerate() {
        let u = eig.eigenvectors.column(idx).into_owned();
        let mut v = lt.solve_upper_triangular(&u).ok_or(EwsError::SingularCovariance)?;
        orient(&mut v);
        vectors.set_column(k, &v);
        eigenvalues.push(eig.eigenvalues[idx].max(0.0));
    }
    Ok(MafBasis {
        vectors,
        eigenvalues,
        ridge,
    })
}

fn well_conditioned(l: &DMatrix<f64>) -> bool {
    let diag: Vec<f64> = (0..l.nrows()).map(|i| l[(i, i)] * l[(i, i)]).collect();
    let max = diag.iter().copied().fold(0.0, f64::max);
    let min = diag.iter().copied().fold(f64::INFINITY, f64::min);
    max > 0.0 && min / max > NEAR_SINGULAR
}

/// Flip `v` so its largest-magnitude entry is positive.
pub(crate) fn orient(v: &mut DVector<f64>) {
    let pivot = v.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
    if pivot < 0.0 {
        v.neg_mut();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::stats::variance;
    use rand_distr::{Distribution, StandardNormal};

    fn ar1_columns(phis: &[f64], n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = RngStream::from_seed(seed);
        let mut x = DMatrix::zeros(n, phis.len());
        let mut state = vec![0.0; phis.len()];
        for t in 0..n {
            for (j, phi) in phis.iter().enumerate() {
                let e: f64 = StandardNormal.sample(&mut rng);
                state[j] = phi * state[j] + e;
                x[(t, j)] = state[j];
            }
        }
        x
    }

    #[test]
    fn univariate_eigenvalue_is_variance_ratio() {
        let x = ar1_columns(&[0.6], 400, 3);
        let basis = maf_basis(&x, DEFAULT_REGULARIZATION).unwrap();
        let col: Vec<f64> = x.column(0).iter().copied().collect();
        let diffs: Vec<f64> = col.windows(2).map(|w| w[1] - w[0]).collect();
        let direct = variance(&diffs) / variance(&col);
        assert!((basis.eigenvalues[0] - direct).abs() < 1e-12 * direct.max(1.0));
        // and approximately 2 (1 - lag-1 autocorrelation)
        let ac = crate::stats::lag1_autocorr(&col).unwrap();
        assert!((basis.eigenvalues[0] - 2.0 * (1.0 - ac)).abs() < 0.05);
        // unit length under the covariance metric
        let v = basis.vectors[(0, 0)];
        assert!((v * v * variance(&col) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigenvalues_sorted_and_metric_normalised() {
        let x = ar1_columns(&[0.9, 0.1, 0.5, -0.3], 600, 4);
        let basis = maf_basis(&x, DEFAULT_REGULARIZATION).unwrap();
        assert!(basis.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        let gram = basis.vectors.transpose() * covariance(&x) * &basis.vectors;
        assert!((gram - DMatrix::identity(4, 4)).abs().max() < 1e-10);
        assert_eq!(basis.ridge, 0.0);
    }

    #[test]
    fn rotation_equivariance() {
        let x = ar1_columns(&[0.9, 0.2, 0.5], 500, 5);
        // orthogonal Q from the QR of a fixed matrix
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.5, -0.3, 1.1, 0.7, 0.9, -0.4, 1.3]);
        let q = m.qr().q();
        let rotated = &x * q.transpose();
        let a = maf_basis(&x, DEFAULT_REGULARIZATION).unwrap();
        let b = maf_basis(&rotated, DEFAULT_REGULARIZATION).unwrap();
        for k in 0..3 {
            assert!((a.eigenvalues[k] - b.eigenvalues[k]).abs() < 1e-10);
            let expected = &q * a.vectors.column(k);
            let got = b.vectors.column(k);
            let same = (&expected - got).abs().max();
            let flipped = (&expected + got).abs().max();
            assert!(same.min(flipped) < 1e-8, "column {k}: {same} / {flipped}");
        }
    }

    #[test]
    fn first_factor_picks_most_autocorrelated_feature() {
        let x = ar1_columns(&[0.9, 0.1], 5000, 6);
        let basis = maf_basis(&x, DEFAULT_REGULARIZATION).unwrap();
        let v = basis.first();
        let cosine = v[0].abs() / v.norm();
        assert!(cosine > 0.95, "cosine {cosine}");
    }

    #[test]
    fn collinear_features_get_ridge_or_fail() {
        let base = ar1_columns(&[0.7], 200, 7);
        let mut x = DMatrix::zeros(200, 2);
        x.set_column(0, &base.column(0));
        x.set_column(1, &(base.column(0) * 2.0));
        let basis = maf_basis(&x, DEFAULT_REGULARIZATION).unwrap();
        assert!(basis.ridge > 0.0);
        let zeros = DMatrix::zeros(50, 2);
        assert!(matches!(maf_basis(&zeros, DEFAULT_REGULARIZATION), Err(EwsError::SingularCovariance)));
    }

    #[test]
    fn too_few_rows() {
        let x = ar1_columns(&[0.5, 0.5, 0.5], 4, 1);
        assert!(matches!(maf_basis(&x, DEFAULT_REGULARIZATION), Err(EwsError::InvalidInput(_))));
    }
}

use nalgebra::DMatrix;

use crate::error::{EwsError, Result};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Matérn-3/2 covariance `α² (1 + √3 r/ρ) exp(-√3 r/ρ)`.
pub fn matern32(r: f64, alpha: f64, rho: f64) -> Result<f64> {
    if !(alpha > 0.0) || !(rho > 0.0) {
        return Err(EwsError::invalid(format!(
            "Matérn-3/2 needs alpha > 0 and rho > 0 (got {alpha}, {rho})"
        )));
    }
    if !(r >= 0.0) {
        return Err(EwsError::invalid(format!("distance must be nonnegative, got {r}")));
    }
    Ok(matern32_unchecked(r, alpha, rho))
}

#[inline]
pub(crate) fn matern32_unchecked(r: f64, alpha: f64, rho: f64) -> f64 {
    let s = SQRT3 * r / rho;
    alpha * alpha * (1.0 + s) * (-s).exp()
}

/// Kernel matrix over integer input points.
pub fn kernel_matrix(points: &[i64], alpha: f64, rho: f64) -> Result<DMatrix<f64>> {
    matern32(0.0, alpha, rho)?;
    let n = points.len();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        matern32_unchecked(points[i].abs_diff(points[j]) as f64, alpha, rho)
    }))
}

/// Lower Cholesky factor of `K + jitter I`, packed row by row.
#[derive(Clone, Debug)]
pub struct GpFactor {
    n: usize,
    packed: Vec<f64>,
    jitter: f64,
}

impl GpFactor {
    /// Factor the kernel, escalating jitter tenfold from `initial_jitter`
    /// until Cholesky succeeds or `max_jitter` is exceeded.
    pub fn new(kernel: &DMatrix<f64>, initial_jitter: f64, max_jitter: f64) -> Result<Self> {
        let n = kernel.nrows();
        let mut jitter = initial_jitter;
        loop {
            let mut k = kernel.clone();
            for i in 0..n {
                k[(i, i)] += jitter;
            }
            if let Some(chol) = k.cholesky() {
                let l = chol.l();
                let mut packed = Vec::with_capacity(n * (n + 1) / 2);
                for i in 0..n {
                    for j in 0..=i {
                        packed.push(l[(i, j)]);
                    }
                }
                return Ok(Self { n, packed, jitter });
            }
            jitter *= 10.0;
            if jitter > max_jitter * (1.0 + 1e-12) {
                return Err(EwsError::IllConditionedKernel { jitter: jitter / 10.0 });
            }
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn lower(&self) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let row = self.row(i);
            for j in 0..=i {
                l[(i, j)] = row[j];
            }
        }
        l
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        let start = i * (i + 1) / 2;
        &self.packed[start..start + i + 1]
    }

    /// `out = offset + L z`.
    pub fn apply(&self, z: &[f64], offset: f64, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.n) {
            let row = self.row(i);
            *o = offset + row.iter().zip(&z[..=i]).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    /// `out = Lᵀ g`.
    pub fn apply_transpose(&self, g: &[f64], out: &mut [f64]) {
        out[..self.n].iter_mut().for_each(|v| *v = 0.0);
        for (i, gi) in g.iter().enumerate().take(self.n) {
            let row = self.row(i);
            for (o, a) in out[..=i].iter_mut().zip(row) {
                *o += a * gi;
            }
        }
    }
}

//! Dense symmetric-positive-definite linear algebra and stable scalar
//! primitives.
//!
//! Everything here is sized for the regime the estimators live in: dense
//! matrices of dimension up to roughly a thousand, factorized once and then
//! queried many times. Quadratic forms in an inverse are always computed via
//! triangular solves against the Cholesky factor, never by forming an
//! explicit inverse: one solve is O(d^2) and much better conditioned.

use alloc::vec;
use alloc::vec::Vec;

use crate::fm;
use crate::{Error, Result};

/// Relative Cholesky pivot tolerance: a pivot at or below
/// `PIVOT_RTOL * trace(A)/d` means the matrix is treated as singular.
pub const PIVOT_RTOL: f64 = 1e-14;

/// Dense row-major matrix of `f64`. Rows are observations throughout this
/// crate (an n x d design stores one sample per row).
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds a matrix from `rows * cols` row-major entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally sized rows. An empty slice yields a
    /// 0 x `cols_hint` matrix.
    pub fn from_rows(rows: &[Vec<f64>], cols_hint: usize) -> Result<Self> {
        let cols = rows.first().map_or(cols_hint, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1))
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Gram matrix of the rows: `sum_i x_i x_i^T`, a dense `cols x cols`
    /// symmetric matrix.
    pub fn gram(&self) -> Vec<f64> {
        let d = self.cols;
        let mut g = vec![0.0; d * d];
        for x in self.iter_rows() {
            for j in 0..d {
                let xj = x[j];
                if xj == 0.0 {
                    continue;
                }
                for k in j..d {
                    g[j * d + k] += xj * x[k];
                }
            }
        }
        for j in 0..d {
            for k in 0..j {
                g[j * d + k] = g[k * d + j];
            }
        }
        g
    }

    /// `sum_i w_i x_i` for per-row weights `w`.
    pub fn weighted_row_sum(&self, w: &[f64]) -> Result<Vec<f64>> {
        if w.len() != self.rows {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                got: w.len(),
            });
        }
        let mut s = vec![0.0; self.cols];
        for (x, &wi) in self.iter_rows().zip(w) {
            axpy(wi, x, &mut s);
        }
        Ok(s)
    }
}

impl core::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    fm::sqrt(dot(a, a))
}

/// `y += alpha * x`.
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Cholesky factorization of a symmetric positive-definite matrix.
///
/// Immutable after construction; all queries go through triangular solves
/// against the stored lower factor `L` with `A = L L^T`.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    dim: usize,
    /// Lower-triangular factor, stored dense row-major (upper part zero).
    factor: Vec<f64>,
}

/// Factorizes a symmetric matrix given as dense row-major `dim x dim` data.
///
/// Only the lower triangle is read; the caller is responsible for symmetry
/// (within 1e-12). Fails with [`Error::NotPositiveDefinite`] as soon as a
/// pivot drops to `PIVOT_RTOL * trace(A)/dim`, which is how a singular
/// empirical covariance surfaces.
pub fn spd_factorize(a: &[f64], dim: usize) -> Result<SpdFactor> {
    if a.len() != dim * dim {
        return Err(Error::DimensionMismatch {
            expected: dim * dim,
            got: a.len(),
        });
    }
    let mut trace = 0.0;
    for j in 0..dim {
        trace += a[j * dim + j];
    }
    let tol = PIVOT_RTOL * (trace / dim.max(1) as f64);

    let mut l = vec![0.0; dim * dim];
    for j in 0..dim {
        let mut pivot = a[j * dim + j];
        for k in 0..j {
            pivot -= l[j * dim + k] * l[j * dim + k];
        }
        if pivot <= tol || !pivot.is_finite() {
            return Err(Error::NotPositiveDefinite { col: j, pivot, tol });
        }
        let ljj = fm::sqrt(pivot);
        l[j * dim + j] = ljj;
        for i in (j + 1)..dim {
            let mut v = a[i * dim + j];
            for k in 0..j {
                v -= l[i * dim + k] * l[j * dim + k];
            }
            l[i * dim + j] = v / ljj;
        }
    }
    Ok(SpdFactor { dim, factor: l })
}

impl SpdFactor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: len,
            });
        }
        Ok(())
    }

    /// Forward substitution: solves `L w = b` in place.
    fn forward(&self, w: &mut [f64]) {
        let d = self.dim;
        for i in 0..d {
            let mut v = w[i];
            for k in 0..i {
                v -= self.factor[i * d + k] * w[k];
            }
            w[i] = v / self.factor[i * d + i];
        }
    }

    /// Backward substitution: solves `L^T x = w` in place.
    fn backward(&self, w: &mut [f64]) {
        let d = self.dim;
        for i in (0..d).rev() {
            let mut v = w[i];
            for k in (i + 1)..d {
                v -= self.factor[k * d + i] * w[k];
            }
            w[i] = v / self.factor[i * d + i];
        }
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(b.len())?;
        let mut w = b.to_vec();
        self.forward(&mut w);
        self.backward(&mut w);
        Ok(w)
    }

    /// Quadratic form in the inverse: `<A^{-1} x, x> = ||L^{-1} x||^2 >= 0`.
    pub fn quad_form_inv(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        let mut w = x.to_vec();
        self.forward(&mut w);
        Ok(dot(&w, &w))
    }

    /// Leverage of `v` through the rank-one augmented matrix.
    ///
    /// With `self` factoring `S`, returns `(h, g)` where `g = <S^{-1} v, v>`
    /// and `h = g / (1 + g) = <(S + v v^T)^{-1} v, v>`; the identity
    /// `(1 - h)^{-1} = 1 + g` then holds by construction.
    pub fn sherman_morrison_leverage(&self, v: &[f64]) -> Result<(f64, f64)> {
        let g = self.quad_form_inv(v)?;
        Ok((g / (1.0 + g), g))
    }

    /// Rank-one augmented solve: `(A + v v^T)^{-1} b` without refactorizing,
    /// via the Sherman-Morrison identity.
    pub fn augmented_solve(&self, v: &[f64], b: &[f64]) -> Result<Vec<f64>> {
        let av = self.solve(v)?;
        let mut ab = self.solve(b)?;
        let g = dot(v, &av);
        let scale = dot(v, &ab) / (1.0 + g);
        axpy(-scale, &av, &mut ab);
        Ok(ab)
    }

    /// Trace of the inverse: `tr(A^{-1}) = ||L^{-1}||_F^2`.
    pub fn trace_inverse(&self) -> f64 {
        let d = self.dim;
        let mut total = 0.0;
        let mut w = vec![0.0; d];
        for j in 0..d {
            // Column j of L^{-1}: forward solve of e_j, nonzero from row j on.
            w[j] = 1.0 / self.factor[j * d + j];
            for i in (j + 1)..d {
                let mut v = 0.0;
                for k in j..i {
                    v -= self.factor[i * d + k] * w[k];
                }
                w[i] = v / self.factor[i * d + i];
            }
            for wi in &w[j..] {
                total += wi * wi;
            }
        }
        total
    }

    /// `log det A = 2 sum_j log L_jj`.
    pub fn log_det(&self) -> f64 {
        let d = self.dim;
        (0..d).map(|j| fm::ln(self.factor[j * d + j])).sum::<f64>() * 2.0
    }

    /// Rebuilds `L L^T`; used by invariants that check the factorization
    /// reproduces its input.
    pub fn reconstruct(&self) -> Vec<f64> {
        let d = self.dim;
        let mut a = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..=i {
                let mut v = 0.0;
                for k in 0..=j {
                    v += self.factor[i * d + k] * self.factor[j * d + k];
                }
                a[i * d + j] = v;
                a[j * d + i] = v;
            }
        }
        a
    }
}

/// Degrees of freedom of ridge regression: `tr[(Sigma + lambda I)^{-1} Sigma]`.
///
/// Computed as `d - lambda * tr[(Sigma + lambda I)^{-1}]`, so a single
/// factorization of the shifted matrix suffices. The result satisfies
/// `df <= min(d, tr(Sigma)/lambda)` and decreases in `lambda`.
pub fn degrees_of_freedom(sigma: &[f64], dim: usize, lambda: f64) -> Result<f64> {
    if sigma.len() != dim * dim {
        return Err(Error::DimensionMismatch {
            expected: dim * dim,
            got: sigma.len(),
        });
    }
    let mut shifted = sigma.to_vec();
    for j in 0..dim {
        shifted[j * dim + j] += lambda;
    }
    // A negative eigenvalue beyond -lambda (plus pivot tolerance) makes the
    // shifted matrix indefinite, which is how non-PSD inputs surface here.
    let f = spd_factorize(&shifted, dim).map_err(|_| Error::NotPsd)?;
    Ok(dim as f64 - lambda * f.trace_inverse())
}

/// Numerically stable scalar kernels for the logistic family.
pub mod scalar {
    use crate::fm;

    /// Sigmoid `1 / (1 + e^{-u})`, branch-split at zero so that neither tail
    /// overflows and differences like `sigmoid(a) - sigmoid(b)` retain
    /// meaning at the 1e-12 scale.
    pub fn sigmoid(u: f64) -> f64 {
        if u >= 0.0 {
            1.0 / (1.0 + fm::exp(-u))
        } else {
            let e = fm::exp(u);
            e / (1.0 + e)
        }
    }

    /// Derivative of the sigmoid, `sigmoid(u) * sigmoid(-u)`.
    pub fn sigmoid_prime(u: f64) -> f64 {
        sigmoid(u) * sigmoid(-u)
    }

    /// Logistic loss `log(1 + e^u)`, stable over the whole f64 range
    /// (`u + log1p(e^{-u})` for positive `u`).
    pub fn logistic_loss(u: f64) -> f64 {
        if u > 0.0 {
            u + fm::ln_1p(fm::exp(-u))
        } else {
            fm::ln_1p(fm::exp(u))
        }
    }

    /// `log(sigmoid(u)) = -logistic_loss(-u)`, without forming the sigmoid.
    pub fn log_sigmoid(u: f64) -> f64 {
        -logistic_loss(-u)
    }

    /// `log(e^a + e^b)` with the max factored out.
    pub fn log_sum_exp(a: f64, b: f64) -> f64 {
        let m = a.max(b);
        if m == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        m + fm::ln(fm::exp(a - m) + fm::exp(b - m))
    }
}

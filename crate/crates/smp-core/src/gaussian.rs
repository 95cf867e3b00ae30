//! Gaussian location and Gaussian linear conditional density estimation.
//!
//! The location model fixes a known covariance `Sigma` and estimates the
//! mean; the SMP returns `N(mean, (1+1/n)^2 Sigma)` and the exact-minimax
//! predictive returns `N(mean, (1+1/n) Sigma)`. Neither moves the point
//! estimate; both inflate the covariance.
//!
//! The linear model has unit noise variance by convention (responses can be
//! rescaled) and log-loss taken against the base measure `(2pi)^{-1/2} dy`,
//! so `-log f_theta(y|x) = (y - <theta, x>)^2 / 2`. The plain SMP at a query
//! `x` is `N(<theta_ols, x>, (1 + <(n Sigma_hat)^{-1} x, x>)^2)`: the usual
//! point prediction with variance inflated by the leverage of `x` in the
//! augmented design. The ridge variant keeps everything well-defined without
//! any rank assumption and shrinks both the mean and the inflation.

use alloc::vec;
use alloc::vec::Vec;

use crate::numerics::{dot, spd_factorize, Matrix, SpdFactor};
use crate::{fm, Error, Result};

/// A multivariate Gaussian `N(mean, covariance)` with dense covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianDensity {
    pub mean: Vec<f64>,
    /// Row-major `d x d` covariance, symmetric positive definite.
    pub covariance: Vec<f64>,
}

impl GaussianDensity {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// A scalar Gaussian predictive `N(mean, variance)` for a single query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarGaussianPredictive {
    pub mean: f64,
    pub variance: f64,
}

/// A least-squares or ridge fit of the Gaussian linear model.
///
/// `gram` factorizes `n Sigma_hat` for the plain fit and
/// `n Sigma_hat + lambda (n+1) I` for the ridge fit, which is exactly the
/// matrix every SMP prediction solves against.
#[derive(Debug, Clone)]
pub struct LinearGaussianFit {
    pub theta: Vec<f64>,
    /// `S_hat = n^{-1} sum_i y_i x_i`.
    pub s_hat: Vec<f64>,
    pub gram: SpdFactor,
    pub lambda: f64,
    pub n: usize,
}

fn mean_of_rows(sample: &Matrix) -> Result<Vec<f64>> {
    if sample.rows() == 0 {
        return Err(Error::EmptySample);
    }
    let mut mean = vec![0.0; sample.cols()];
    for row in sample.iter_rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    let inv = 1.0 / sample.rows() as f64;
    for m in &mut mean {
        *m *= inv;
    }
    Ok(mean)
}

fn scaled_covariance(sigma: &[f64], dim: usize, factor: f64) -> Result<Vec<f64>> {
    if sigma.len() != dim * dim {
        return Err(Error::DimensionMismatch {
            expected: dim * dim,
            got: sigma.len(),
        });
    }
    Ok(sigma.iter().map(|v| v * factor).collect())
}

/// Location SMP: `N(mean(Y), (1+1/n)^2 Sigma)`.
pub fn location_smp(sample: &Matrix, sigma: &[f64]) -> Result<GaussianDensity> {
    let mean = mean_of_rows(sample)?;
    let c = 1.0 + 1.0 / sample.rows() as f64;
    Ok(GaussianDensity {
        covariance: scaled_covariance(sigma, mean.len(), c * c)?,
        mean,
    })
}

/// Exact-minimax location predictive: `N(mean(Y), (1+1/n) Sigma)`.
///
/// Its excess risk equals `(d/2) log(1+1/n)` for every finite-second-moment
/// source, which makes it a useful distribution-free calibration point.
pub fn location_minimax(sample: &Matrix, sigma: &[f64]) -> Result<GaussianDensity> {
    let mean = mean_of_rows(sample)?;
    let c = 1.0 + 1.0 / sample.rows() as f64;
    Ok(GaussianDensity {
        covariance: scaled_covariance(sigma, mean.len(), c)?,
        mean,
    })
}

/// Location MLE: `N(mean(Y), Sigma)`, the plug-in baseline.
pub fn location_mle(sample: &Matrix, sigma: &[f64]) -> Result<GaussianDensity> {
    let mean = mean_of_rows(sample)?;
    Ok(GaussianDensity {
        covariance: scaled_covariance(sigma, mean.len(), 1.0)?,
        mean,
    })
}

/// Excess-risk bound of the location SMP: `d log(1+1/n)`.
pub fn location_smp_bound(n: usize, d: usize) -> f64 {
    d as f64 * fm::ln_1p(1.0 / n as f64)
}

/// Constant excess risk of the minimax location predictive:
/// `(d/2) log(1+1/n)`.
pub fn location_minimax_risk(n: usize, d: usize) -> f64 {
    0.5 * d as f64 * fm::ln_1p(1.0 / n as f64)
}

/// Ordinary least squares. Requires the empirical covariance to be positive
/// definite (in particular `n >= d`); otherwise fails with
/// [`Error::SingularDesign`].
pub fn ols_fit(x: &Matrix, y: &[f64]) -> Result<LinearGaussianFit> {
    fit_impl(x, y, 0.0)
}

/// Ridge fit: solves `(Sigma_hat + lambda I) theta = S_hat`. The stored gram
/// factor is `n Sigma_hat + lambda (n+1) I`, the augmented-sample matrix the
/// ridge SMP queries.
pub fn ridge_fit(x: &Matrix, y: &[f64], lambda: f64) -> Result<LinearGaussianFit> {
    if lambda <= 0.0 {
        return Err(Error::NonPositiveLambda(lambda));
    }
    fit_impl(x, y, lambda)
}

fn fit_impl(x: &Matrix, y: &[f64], lambda: f64) -> Result<LinearGaussianFit> {
    if y.len() != x.rows() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            got: y.len(),
        });
    }
    if x.rows() == 0 && lambda == 0.0 {
        return Err(Error::EmptySample);
    }
    let n = x.rows();
    let d = x.cols();
    let mut gram = x.gram(); // n * Sigma_hat
    if lambda > 0.0 {
        let shift = lambda * (n + 1) as f64;
        for j in 0..d {
            gram[j * d + j] += shift;
        }
    }
    let gram = spd_factorize(&gram, d).map_err(|e| match e {
        Error::NotPositiveDefinite { col, pivot, .. } => Error::SingularDesign { col, pivot },
        other => other,
    })?;
    let xty = x.weighted_row_sum(y)?; // n * S_hat
    // The reported theta solves (n Sigma_hat + lambda n I) theta = n S_hat,
    // a different shift than the stored augmented gram.
    let theta = if lambda == 0.0 {
        gram.solve(&xty)?
    } else {
        let mut shifted = x.gram();
        let shift = lambda * n as f64;
        for j in 0..d {
            shifted[j * d + j] += shift;
        }
        spd_factorize(&shifted, d)?.solve(&xty)?
    };
    let inv_n = 1.0 / n.max(1) as f64;
    let s_hat = xty.iter().map(|v| v * inv_n).collect();
    Ok(LinearGaussianFit {
        theta,
        s_hat,
        gram,
        lambda,
        n,
    })
}

/// Plain SMP predictive at `x`: mean `<theta_ols, x>`, variance
/// `(1 + <(n Sigma_hat)^{-1} x, x>)^2`. The variance is always at least one.
pub fn linear_smp_predict(fit: &LinearGaussianFit, x: &[f64]) -> Result<ScalarGaussianPredictive> {
    if fit.lambda != 0.0 {
        return Err(Error::RequiresUnpenalizedFit(fit.lambda));
    }
    let g = fit.gram.quad_form_inv(x)?;
    Ok(ScalarGaussianPredictive {
        mean: dot(&fit.theta, x),
        variance: (1.0 + g) * (1.0 + g),
    })
}

/// Plug-in predictive of a (ridge) fit: `N(<theta, x>, 1)`.
pub fn plug_in_predict(fit: &LinearGaussianFit, x: &[f64]) -> ScalarGaussianPredictive {
    ScalarGaussianPredictive {
        mean: dot(&fit.theta, x),
        variance: 1.0,
    }
}

/// Ridge SMP predictive at `x` from a ridge fit.
///
/// With `M = n Sigma_hat + lambda (n+1) I` (the fit's gram factor),
/// `w = M^{-1} x` and `g = <x, w>`, the closed forms reduce to
///
/// ```text
/// sigma^2(x) = (1 + g)^2 / (1 + lambda ||w||^2)
/// mu(x)      = <theta', x> - lambda sigma^2(x) <theta', w> / (1 + g)
/// ```
///
/// where `theta' = M^{-1} (n S_hat)` is the ridge estimator at the
/// augmented-sample penalty level `lambda' = (n+1) lambda / n`. Everything is
/// one triangular solve pair per query; the rank-one augmented matrix
/// `M + x x^T` never has to be formed.
pub fn ridge_smp_predict_from(
    fit: &LinearGaussianFit,
    x: &[f64],
) -> Result<ScalarGaussianPredictive> {
    if fit.lambda <= 0.0 {
        return Err(Error::NonPositiveLambda(fit.lambda));
    }
    let lambda = fit.lambda;
    let n = fit.n as f64;
    let n_s_hat: Vec<f64> = fit.s_hat.iter().map(|v| v * n).collect();
    let theta_prime = fit.gram.solve(&n_s_hat)?;
    let w = fit.gram.solve(x)?;
    let g = dot(x, &w);
    let one_plus_g = 1.0 + g;
    let variance = one_plus_g * one_plus_g / (1.0 + lambda * dot(&w, &w));
    let mean = dot(&theta_prime, x) - lambda * variance * dot(&theta_prime, &w) / one_plus_g;
    Ok(ScalarGaussianPredictive { mean, variance })
}

/// One-shot ridge SMP: fit on `(x, y)` with penalty `lambda`, then predict
/// at `query`.
pub fn ridge_smp_predict(
    x: &Matrix,
    y: &[f64],
    lambda: f64,
    query: &[f64],
) -> Result<ScalarGaussianPredictive> {
    let fit = ridge_fit(x, y, lambda)?;
    ridge_smp_predict_from(&fit, query)
}

/// Penalty level that balances the ridge log-norm bound: `d / (B^2 (n+1))`.
pub fn ridge_log_norm_lambda(b: f64, n: usize, d: usize) -> f64 {
    d as f64 / (b * b * (n + 1) as f64)
}

/// The bound that goes with [`ridge_log_norm_lambda`]:
/// `5 d log(2 + B R / sqrt(d)) / (n+1)`.
pub fn ridge_log_norm_bound(b: f64, r: f64, n: usize, d: usize) -> f64 {
    let df = d as f64;
    5.0 * df * fm::ln(2.0 + b * r / fm::sqrt(df)) / (n + 1) as f64
}

/// Excess-risk bound of the plain linear SMP given (an estimate of)
/// `E[tr(rescaled Sigma_hat^{-1})]`: `log(1 + trace / n)`.
pub fn linear_smp_bound_from_trace(trace: f64, n: usize) -> f64 {
    fm::ln_1p(trace / n as f64)
}

/// Closed form of `E[tr(rescaled Sigma_hat^{-1})]` for a standard Gaussian
/// design: `n d / (n - d - 1)`, finite for `n > d + 1`.
pub fn gaussian_design_expected_trace(n: usize, d: usize) -> Option<f64> {
    if n > d + 1 {
        Some(n as f64 * d as f64 / (n - d - 1) as f64)
    } else {
        None
    }
}

/// Penalized excess-risk bound of the ridge SMP: `1.25 df_lambda / (n+1)`,
/// valid for `lambda >= 2 R^2 / (n+1)`.
pub fn ridge_smp_df_bound(df: f64, n: usize) -> f64 {
    1.25 * df / (n + 1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    fn identity(d: usize) -> Vec<f64> {
        let mut m = vec![0.0; d * d];
        for j in 0..d {
            m[j * d + j] = 1.0;
        }
        m
    }

    #[test]
    fn location_examples() {
        // n = 1: factor (1 + 1)^2 = 4.
        let sample = Matrix::from_rows(&[vec![0.0, 0.0]], 2).unwrap();
        let smp = location_smp(&sample, &identity(2)).unwrap();
        assert_eq!(smp.mean, vec![0.0, 0.0]);
        assert_close(smp.covariance[0], 4.0, 0.0);
        assert_close(smp.covariance[3], 4.0, 0.0);

        // n = 3, scalar: N(3, 16/9).
        let sample = Matrix::from_rows(&[vec![0.0], vec![3.0], vec![6.0]], 1).unwrap();
        let smp = location_smp(&sample, &[1.0]).unwrap();
        assert_close(smp.mean[0], 3.0, 0.0);
        assert_close(smp.covariance[0], 16.0 / 9.0, 1e-15);

        // Large n: covariance approaches Sigma.
        let rows: Vec<Vec<f64>> = (0..20000).map(|i| vec![i as f64]).collect();
        let sample = Matrix::from_rows(&rows, 1).unwrap();
        let smp = location_smp(&sample, &[1.0]).unwrap();
        assert_close(smp.covariance[0], 1.0, 2e-4);

        let minimax = location_minimax(&sample, &[1.0]).unwrap();
        assert_close(minimax.covariance[0], 1.0, 2e-4);
    }

    #[test]
    fn minimax_examples() {
        let sample = Matrix::from_rows(&[vec![0.0, 0.0]], 2).unwrap();
        let g = location_minimax(&sample, &identity(2)).unwrap();
        assert_close(g.covariance[0], 2.0, 0.0);

        let rows: Vec<Vec<f64>> = (0..9).map(|_| vec![1.0]).collect();
        let sample = Matrix::from_rows(&rows, 1).unwrap();
        let g = location_minimax(&sample, &[1.0]).unwrap();
        assert_close(g.covariance[0], 10.0 / 9.0, 1e-15);

        assert_close(location_minimax_risk(10, 3), 1.5 * (1.1f64).ln(), 1e-12);
        assert_close(location_minimax_risk(10, 3), 0.142966, 1e-6);
    }

    #[test]
    fn location_empty_sample() {
        let sample = Matrix::from_rows(&[], 2).unwrap();
        assert!(matches!(
            location_smp(&sample, &identity(2)),
            Err(Error::EmptySample)
        ));
        assert!(matches!(
            location_minimax(&sample, &identity(2)),
            Err(Error::EmptySample)
        ));
    }

    #[test]
    fn ols_examples() {
        let x = Matrix::from_rows(&[vec![1.0]], 1).unwrap();
        let fit = ols_fit(&x, &[2.0]).unwrap();
        assert_close(fit.theta[0], 2.0, 0.0);

        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], 2).unwrap();
        let fit = ols_fit(&x, &[1.0, 2.0]).unwrap();
        assert_close(fit.theta[0], 1.0, 1e-15);
        assert_close(fit.theta[1], 2.0, 1e-15);

        // Scalar normal equation: (1 + 8) / (1 + 4).
        let x = Matrix::from_rows(&[vec![1.0], vec![2.0]], 1).unwrap();
        let fit = ols_fit(&x, &[1.0, 4.0]).unwrap();
        assert_close(fit.theta[0], 1.8, 1e-15);

        // Residual orthogonality: ||X^T (y - X theta)|| <= 1e-8 ||X^T y||.
        let x = Matrix::from_rows(
            &[
                vec![1.0, 0.3, -0.2],
                vec![0.4, 1.1, 0.9],
                vec![-0.7, 0.2, 1.4],
                vec![0.1, -0.5, 0.8],
            ],
            3,
        )
        .unwrap();
        let y = [0.7, -1.2, 0.4, 2.1];
        let fit = ols_fit(&x, &y).unwrap();
        let resid: Vec<f64> = x
            .iter_rows()
            .zip(&y)
            .map(|(row, &yi)| yi - dot(row, &fit.theta))
            .collect();
        let xt_r = x.weighted_row_sum(&resid).unwrap();
        let xt_y = x.weighted_row_sum(&y).unwrap();
        assert!(crate::numerics::norm2(&xt_r) <= 1e-8 * crate::numerics::norm2(&xt_y));
    }

    #[test]
    fn singular_design_rejected() {
        let x = Matrix::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0]], 2).unwrap();
        assert!(matches!(
            ols_fit(&x, &[1.0, 2.0]),
            Err(Error::SingularDesign { .. })
        ));
    }

    #[test]
    fn ridge_examples() {
        // d=1, X=(1), y=(2), n=1, lambda=1: theta = 2 / (1 + 1) = 1.
        let x = Matrix::from_rows(&[vec![1.0]], 1).unwrap();
        let fit = ridge_fit(&x, &[2.0], 1.0).unwrap();
        assert_close(fit.theta[0], 1.0, 1e-15);

        // lambda -> infinity: theta -> 0.
        let fit = ridge_fit(&x, &[2.0], 1e12).unwrap();
        assert!(fit.theta[0].abs() < 1e-10);

        // lambda -> 0+ approaches OLS.
        let x = Matrix::from_rows(&[vec![1.0], vec![2.0]], 1).unwrap();
        let y = [1.0, 4.0];
        let fit = ridge_fit(&x, &y, 1e-12).unwrap();
        assert_close(fit.theta[0], 1.8, 1e-10);

        // Residual of the ridge normal equation.
        let fit = ridge_fit(&x, &y, 0.7).unwrap();
        let n = 2.0;
        let lhs = (x.gram()[0] / n + 0.7) * fit.theta[0];
        assert_close(lhs, fit.s_hat[0], 1e-12);

        assert!(matches!(
            ridge_fit(&x, &y, 0.0),
            Err(Error::NonPositiveLambda(_))
        ));
    }

    #[test]
    fn linear_smp_examples() {
        // d=1, X=(1), y=(2), n=1, x=1: N(2, 4).
        let x = Matrix::from_rows(&[vec![1.0]], 1).unwrap();
        let fit = ols_fit(&x, &[2.0]).unwrap();
        let p = linear_smp_predict(&fit, &[1.0]).unwrap();
        assert_close(p.mean, 2.0, 0.0);
        assert_close(p.variance, 4.0, 1e-15);

        // Zero query has zero leverage.
        let p = linear_smp_predict(&fit, &[0.0]).unwrap();
        assert_close(p.mean, 0.0, 0.0);
        assert_close(p.variance, 1.0, 0.0);

        // Growing n at fixed query: variance tends to 1 (and stays >= 1).
        let rows: Vec<Vec<f64>> = (1..=4000).map(|i| vec![1.0 + (i % 7) as f64]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 2.0 * r[0]).collect();
        let x = Matrix::from_rows(&rows, 1).unwrap();
        let fit = ols_fit(&x, &y).unwrap();
        let p = linear_smp_predict(&fit, &[3.0]).unwrap();
        assert!(p.variance >= 1.0);
        assert_close(p.variance, 1.0, 1e-2);

        let ridge = ridge_fit(&x, &y, 0.5).unwrap();
        assert!(matches!(
            linear_smp_predict(&ridge, &[3.0]),
            Err(Error::RequiresUnpenalizedFit(_))
        ));
    }

    #[test]
    fn ridge_smp_worked_example() {
        // Scalar hand evaluation: n=1, d=1, X=(1), y=(1), lambda=1, x=1
        // gives sigma^2 = 1.6 and mu = 0.2.
        let x = Matrix::from_rows(&[vec![1.0]], 1).unwrap();
        let p = ridge_smp_predict(&x, &[1.0], 1.0, &[1.0]).unwrap();
        assert_close(p.variance, 1.6, 1e-14);
        assert_close(p.mean, 0.2, 1e-14);

        // x = 0: all query quadratic forms vanish.
        let p = ridge_smp_predict(&x, &[1.0], 1.0, &[0.0]).unwrap();
        assert_close(p.mean, 0.0, 0.0);
        assert_close(p.variance, 1.0, 0.0);
    }

    #[test]
    fn ridge_smp_quadrature_oracle_scalar() {
        // Independent route for the worked example: refit per grid value of
        // y, weight by exp(-lambda ||theta^(x,y)||^2 / 2), normalize
        // numerically and read off the first two moments.
        let (n, lambda, xq) = (1.0f64, 1.0f64, 1.0f64);
        let (x1, y1) = (1.0f64, 1.0f64);
        let m = n * x1 * x1 + xq * xq + lambda * (n + 1.0); // = 4
        let k = 1.0 / m;
        let steps = 40_000;
        let (lo, hi) = (-12.0, 12.0);
        let h = (hi - lo) / steps as f64;
        let (mut z0, mut z1, mut z2) = (0.0, 0.0, 0.0);
        for i in 0..=steps {
            let y = lo + i as f64 * h;
            let theta = k * (n * x1 * y1 + y * xq);
            let weight = (-0.5 * (y - theta * xq) * (y - theta * xq)
                - 0.5 * lambda * theta * theta)
                .exp();
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            z0 += w * weight;
            z1 += w * weight * y;
            z2 += w * weight * y * y;
        }
        let mean = z1 / z0;
        let var = z2 / z0 - mean * mean;
        let x = Matrix::from_rows(&[vec![x1]], 1).unwrap();
        let p = ridge_smp_predict(&x, &[y1], lambda, &[xq]).unwrap();
        assert_close(p.mean, mean, 1e-9);
        assert_close(p.variance, var, 1e-8);
    }

    #[test]
    fn ridge_smp_matches_plain_as_lambda_vanishes() {
        let x = Matrix::from_rows(
            &[
                vec![1.0, 0.2],
                vec![-0.3, 1.1],
                vec![0.8, -0.6],
                vec![0.5, 0.9],
            ],
            2,
        )
        .unwrap();
        let y = [0.4, -0.2, 1.3, 0.8];
        let query = [0.7, -0.4];
        let plain = linear_smp_predict(&ols_fit(&x, &y).unwrap(), &query).unwrap();
        let ridge = ridge_smp_predict(&x, &y, 1e-10, &query).unwrap();
        assert_close(ridge.mean, plain.mean, 1e-6 * plain.mean.abs().max(1.0));
        assert_close(ridge.variance, plain.variance, 1e-6 * plain.variance);
    }

    #[test]
    fn tuning_rules() {
        assert_close(ridge_log_norm_lambda(1.0, 0, 1), 1.0, 0.0);
        assert_close(ridge_log_norm_lambda(2.0, 99, 4), 0.01, 1e-18);
        let b = ridge_log_norm_bound(2.0, 1.0, 99, 4);
        assert_close(b, 5.0 * 4.0 * (2.0f64 + 1.0).ln() / 100.0, 1e-15);

        assert_close(
            linear_smp_bound_from_trace(250.0 / 44.0, 50),
            (1.0 + 250.0 / 44.0 / 50.0f64).ln(),
            1e-15,
        );
        assert_close(linear_smp_bound_from_trace(250.0 / 44.0, 50), 0.10763, 1e-5);
        assert_eq!(gaussian_design_expected_trace(50, 5), Some(250.0 / 44.0));
        assert_eq!(gaussian_design_expected_trace(6, 5), None);
        assert_close(ridge_smp_df_bound(2.0, 99), 0.025, 1e-15);
    }
}

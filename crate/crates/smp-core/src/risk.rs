//! Closed-form divergences and conditional-risk evaluation.
//!
//! Excess risks are measured as risk differences, which are independent of
//! the dominating measure. For scalar Gaussian predictives the log-loss is
//! taken against the base measure `(2pi)^{-1/2} dy`, so that
//! `-log f(y) = log sigma + (y - mu)^2 / (2 sigma^2)` and the unit-variance
//! in-model members reduce to plain squared error over two.
//!
//! The conditional-risk evaluators integrate the response analytically and
//! Monte Carlo only over the query distribution: the caller supplies the
//! query points together with the generator's conditional moments.

use alloc::vec::Vec;

use crate::gaussian::{GaussianDensity, ScalarGaussianPredictive};
use crate::logistic::BernoulliPredictive;
use crate::multinomial::CategoricalDensity;
use crate::numerics::{spd_factorize, Matrix};
use crate::{fm, Error, Result};

/// Kullback-Leibler divergence between categorical densities, with the
/// conventions `0 log(0/q) = 0` and `p log(p/0) = +inf`.
pub fn kl_categorical(p: &CategoricalDensity, q: &CategoricalDensity) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch {
            expected: p.len(),
            got: q.len(),
        });
    }
    let mut kl = 0.0;
    for (&pi, &qi) in p.probs().iter().zip(q.probs()) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Ok(f64::INFINITY);
        }
        kl += pi * fm::ln(pi / qi);
    }
    Ok(kl.max(0.0))
}

/// KL divergence between multivariate Gaussians,
/// `0.5 [tr(Sq^{-1} Sp) - d + ||mq - mp||^2_{Sq^{-1}} + log det Sq - log det Sp]`.
pub fn kl_gaussian(p: &GaussianDensity, q: &GaussianDensity) -> Result<f64> {
    let d = p.dim();
    if q.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: q.dim(),
        });
    }
    let fp = spd_factorize(&p.covariance, d)?;
    let fq = spd_factorize(&q.covariance, d)?;
    // tr(Sq^{-1} Sp): column solves against Sq.
    let mut trace = 0.0;
    let mut col = Vec::with_capacity(d);
    for j in 0..d {
        col.clear();
        col.extend((0..d).map(|i| p.covariance[i * d + j]));
        trace += fq.solve(&col)?[j];
    }
    let diff: Vec<f64> = q.mean.iter().zip(&p.mean).map(|(a, b)| a - b).collect();
    let maha = fq.quad_form_inv(&diff)?;
    Ok(0.5 * (trace - d as f64 + maha + fq.log_det() - fp.log_det()))
}

/// Scalar special case of [`kl_gaussian`].
pub fn kl_gaussian_scalar(mean_p: f64, var_p: f64, mean_q: f64, var_q: f64) -> f64 {
    let diff = mean_q - mean_p;
    0.5 * (var_p / var_q - 1.0 + diff * diff / var_q + fm::ln(var_q / var_p))
}

/// Log-loss of a scalar Gaussian predictive at an observed response.
pub fn gaussian_log_loss(pred: &ScalarGaussianPredictive, y: f64) -> f64 {
    let diff = y - pred.mean;
    0.5 * fm::ln(pred.variance) + diff * diff / (2.0 * pred.variance)
}

/// Conditional expected log-loss of a Gaussian predictive at one query,
/// given the generator's conditional mean `m` and variance `s2` there.
pub fn gaussian_conditional_integrand(pred: &ScalarGaussianPredictive, m: f64, s2: f64) -> f64 {
    let diff = m - pred.mean;
    0.5 * fm::ln(pred.variance) + (diff * diff + s2) / (2.0 * pred.variance)
}

/// Conditional expected log-loss of a Bernoulli predictive at one query,
/// given `eta = P(Y = +1 | x)`.
pub fn bernoulli_conditional_integrand(pred: &BernoulliPredictive, eta: f64) -> f64 {
    let p = pred.p_plus;
    let mut loss = 0.0;
    if eta > 0.0 {
        loss -= eta * fm::ln(p);
    }
    if eta < 1.0 {
        loss -= (1.0 - eta) * fm::ln(1.0 - p);
    }
    loss
}

/// Average conditional risk of a Gaussian predictive over query points: the
/// response integral is analytic, only the queries are sampled.
pub fn gaussian_conditional_risk<P, M>(mut pred: P, mut moments: M, xs: &Matrix) -> Result<f64>
where
    P: FnMut(&[f64]) -> Result<ScalarGaussianPredictive>,
    M: FnMut(&[f64]) -> (f64, f64),
{
    if xs.rows() == 0 {
        return Err(Error::EmptySample);
    }
    let mut total = 0.0;
    for x in xs.iter_rows() {
        let p = pred(x)?;
        let (m, s2) = moments(x);
        total += gaussian_conditional_integrand(&p, m, s2);
    }
    Ok(total / xs.rows() as f64)
}

/// Average conditional risk of a Bernoulli predictive over query points.
pub fn bernoulli_conditional_risk<P, E>(mut pred: P, mut eta: E, xs: &Matrix) -> Result<f64>
where
    P: FnMut(&[f64]) -> Result<BernoulliPredictive>,
    E: FnMut(&[f64]) -> f64,
{
    if xs.rows() == 0 {
        return Err(Error::EmptySample);
    }
    let mut total = 0.0;
    for x in xs.iter_rows() {
        let p = pred(x)?;
        total += bernoulli_conditional_integrand(&p, eta(x));
    }
    Ok(total / xs.rows() as f64)
}

/// Monte Carlo summary of an excess-risk experiment: replicate mean,
/// standard error, the matching closed-form bound when one applies, and how
/// many replicates failed.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub replicates: usize,
    pub bound: Option<f64>,
    pub failures: usize,
}

impl RiskEstimate {
    /// Summarizes per-replicate values in their given (deterministic) order:
    /// `std_err` is the sample standard deviation over the square root of
    /// the replicate count.
    pub fn from_values(values: &[f64], bound: Option<f64>, failures: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std_err = if values.len() > 1 && mean.is_finite() {
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            fm::sqrt(var / n)
        } else {
            0.0
        };
        Ok(Self {
            mean,
            std_err,
            replicates: values.len(),
            bound,
            failures,
        })
    }

    /// Whether the mean respects the bound, allowing `k` standard errors of
    /// Monte Carlo slack (plus a deterministic epsilon).
    pub fn satisfies_bound(&self, k: f64) -> Option<bool> {
        self.bound
            .map(|b| self.mean <= b + k * self.std_err + 1e-12)
    }
}

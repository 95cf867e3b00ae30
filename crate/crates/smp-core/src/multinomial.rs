//! Density estimation on a finite alphabet.
//!
//! Fits take per-symbol counts (the sufficient statistic) rather than raw
//! label sequences. The MLE is the empirical histogram and can put exact
//! zeros on unseen symbols, which makes its expected log-loss risk infinite
//! for any non-degenerate source; the SMP is the add-one (Laplace) smoothed
//! histogram and is strictly positive everywhere.

use alloc::vec::Vec;

use crate::fm;
use crate::{Error, Result};

/// A probability vector over a finite alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalDensity {
    probs: Vec<f64>,
}

impl CategoricalDensity {
    /// Validates nonnegativity and normalization (sum within 1e-12 of one).
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::EmptySample);
        }
        let sum: f64 = probs.iter().sum();
        if probs.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDensity { sum });
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Log-loss `-log p(y)`; `+inf` on a zero-probability symbol.
    pub fn log_loss(&self, y: usize) -> f64 {
        let p = self.probs[y];
        if p == 0.0 {
            f64::INFINITY
        } else {
            -fm::ln(p)
        }
    }
}

/// Maximum-likelihood fit: `p(y) = counts[y] / n`. May contain exact zeros.
pub fn multinomial_mle(counts: &[u64]) -> Result<CategoricalDensity> {
    let n: u64 = counts.iter().sum();
    if counts.is_empty() || n == 0 {
        return Err(Error::EmptySample);
    }
    let nf = n as f64;
    Ok(CategoricalDensity {
        probs: counts.iter().map(|&c| c as f64 / nf).collect(),
    })
}

/// SMP fit: the Laplace estimator `p(y) = (counts[y] + 1) / (n + d)`.
///
/// Well-defined for an empty sample (it returns the uniform density) and
/// strictly positive everywhere.
pub fn multinomial_smp(counts: &[u64]) -> Result<CategoricalDensity> {
    if counts.is_empty() {
        return Err(Error::EmptySample);
    }
    let n: u64 = counts.iter().sum();
    let denom = (n + counts.len() as u64) as f64;
    Ok(CategoricalDensity {
        probs: counts.iter().map(|&c| (c + 1) as f64 / denom).collect(),
    })
}

/// Excess-risk bound of the Laplace SMP: `log((n + d) / (n + 1))`.
///
/// Always at most `(d - 1) / n`, with equality in the bound itself exactly
/// when the source is a point mass.
pub fn multinomial_excess_risk_bound(n: u64, d: usize) -> f64 {
    fm::ln((n + d as u64) as f64 / (n + 1) as f64)
}

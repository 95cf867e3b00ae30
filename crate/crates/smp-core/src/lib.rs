//! Predictive density estimation under logarithmic loss.
//!
//! This crate implements the *sample minmax predictor* (SMP) for several
//! standard families, together with the maximum-likelihood / ridge baselines
//! it is compared against:
//!
//! - [`multinomial`]: densities on a finite alphabet. The SMP is the Laplace
//!   (add-one) estimator; the MLE is the empirical histogram.
//! - [`gaussian`]: the Gaussian location model and the Gaussian linear
//!   conditional model, plain and ridge-regularized. The SMP keeps the MLE
//!   point prediction but inflates the predictive variance by a
//!   leverage-dependent factor.
//! - [`logistic`]: binary conditional densities. Each SMP prediction is the
//!   normalization of two refits, one per candidate label appended to the
//!   training sample as a virtual observation.
//! - [`numerics`]: the dense symmetric-positive-definite kernel (Cholesky
//!   solves, rank-one updates, degrees of freedom) and stable scalar
//!   primitives shared by all estimators.
//! - [`risk`]: closed-form divergences and conditional-risk evaluation used
//!   to measure excess risk against an oracle comparator.
//!
//! The predictors here are *improper*: they step outside the model family
//! (inflated-variance Gaussians, nonlinear log-odds) which is what makes
//! their excess risk insensitive to misspecification of the response
//! distribution.
//!
//! The crate is `no_std`-compatible (with `alloc`); disable the default
//! `std` feature to route float math through `libm`. Sampling, parallel
//! Monte Carlo and file formats live in the companion `smp` crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

use alloc::string::String;
use alloc::vec::Vec;

pub mod gaussian;
pub mod logistic;
pub mod multinomial;
pub mod numerics;
pub mod risk;

/// Errors shared across the estimator modules.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A Cholesky pivot fell below the relative tolerance: the input is
    /// singular or indefinite. Degenerate inputs fail loudly rather than
    /// being silently regularized.
    #[error("matrix not positive definite: pivot {pivot:.3e} at column {col} (tolerance {tol:.3e})")]
    NotPositiveDefinite { col: usize, pivot: f64, tol: f64 },

    /// Operand sizes do not agree.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A matrix required to be positive semi-definite has a negative
    /// eigenvalue direction beyond tolerance.
    #[error("matrix not positive semi-definite")]
    NotPsd,

    /// A probability vector has a negative entry or does not sum to one
    /// within 1e-12.
    #[error("invalid probability vector (sum {sum})")]
    InvalidDensity { sum: f64 },

    /// An operation that needs at least one observation received none.
    #[error("empty sample")]
    EmptySample,

    /// The empirical covariance of the design is singular, so the
    /// least-squares fit (and the plain SMP) is undefined.
    #[error("singular design: empirical covariance not positive definite (pivot {pivot:.3e} at column {col})")]
    SingularDesign { col: usize, pivot: f64 },

    /// The solver ran out of iterations; the last iterate and its gradient
    /// norm are reported.
    #[error("solver did not converge after {iterations} iterations (gradient norm {grad_norm:.3e})")]
    MaxIterExceeded {
        iterations: usize,
        grad_norm: f64,
        theta: Vec<f64>,
    },

    /// Linear separability could not be decided: the best certificate margin
    /// is below tolerance but the origin was not shown to lie in the convex
    /// hull either.
    #[error("separation check inconclusive: best margin {margin:.3e} below tolerance")]
    SeparationInconclusive { margin: f64 },

    /// `newton_fit` requires a strictly positive ridge penalty.
    #[error("ridge penalty must be positive, got {0}")]
    NonPositiveLambda(f64),

    /// `linear_smp_predict` was handed a penalized fit.
    #[error("operation requires an unpenalized (lambda = 0) fit, got lambda = {0}")]
    RequiresUnpenalizedFit(f64),

    /// Stability precondition violated: the penalty is below the level that
    /// guarantees the two augmented minimizers stay within known distance.
    #[error("lambda {lambda:.3e} below stability threshold 2R^2/(n+1) = {required:.3e}")]
    LambdaTooSmall { lambda: f64, required: f64 },

    /// A measured stability quantity exceeded its bound.
    #[error("stability check failed: {0}")]
    StabilityViolation(String),
}

pub type Result<T> = core::result::Result<T, Error>;

/// Float math shim: inherent `f64` methods under `std`, `libm` otherwise.
#[cfg(feature = "std")]
pub(crate) mod fm {
    #[inline]
    pub fn exp(x: f64) -> f64 {
        x.exp()
    }
    #[inline]
    pub fn ln(x: f64) -> f64 {
        x.ln()
    }
    #[inline]
    pub fn ln_1p(x: f64) -> f64 {
        x.ln_1p()
    }
    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        x.sqrt()
    }
}

#[cfg(not(feature = "std"))]
pub(crate) mod fm {
    #[inline]
    pub fn exp(x: f64) -> f64 {
        libm::exp(x)
    }
    #[inline]
    pub fn ln(x: f64) -> f64 {
        libm::log(x)
    }
    #[inline]
    pub fn ln_1p(x: f64) -> f64 {
        libm::log1p(x)
    }
    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        libm::sqrt(x)
    }
}

//! Model/estimator dispatch for the Monte Carlo excess-risk loop.
//!
//! One replicate draws a fresh training set, fits the requested estimator,
//! and measures its conditional risk on fresh query points against the
//! comparator's risk on the same points (the response integral is analytic
//! throughout, so only designs and training sets are sampled). Per-model
//! comparators: the truth itself (multinomial), the population mean
//! (location), the true or penalized-population parameter (linear), and the
//! true parameter or a large-sample best-in-ball oracle (logistic).

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use smp_core::gaussian::{
    gaussian_design_expected_trace, linear_smp_bound_from_trace, linear_smp_predict,
    location_minimax_risk, location_smp_bound, ols_fit, plug_in_predict, ridge_fit,
    ridge_smp_df_bound, ridge_smp_predict_from,
};
use smp_core::logistic::{
    mle_fit, newton_fit, smp_predict_warm, BernoulliPredictive, NEWTON_MAX_ITER, NEWTON_TOL,
};
use smp_core::multinomial::{
    multinomial_excess_risk_bound, multinomial_mle, multinomial_smp, CategoricalDensity,
};
use smp_core::numerics::scalar::sigmoid;
use smp_core::numerics::{axpy, degrees_of_freedom, dot, norm2, spd_factorize, Matrix};
use smp_core::risk::{
    bernoulli_conditional_risk, gaussian_conditional_risk, kl_categorical, RiskEstimate,
};

use crate::generator::Generator;
use crate::mc::{self, derive_seed};
use crate::{HarnessError, Result};

/// Model families the experiment runner knows about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Multinomial,
    GaussianLocation,
    Linear,
    RidgeLinear,
    Logistic,
    LogisticRidge,
}

impl ModelKind {
    pub fn needs_lambda(self) -> bool {
        matches!(self, Self::RidgeLinear | Self::LogisticRidge)
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Multinomial => "multinomial",
            Self::GaussianLocation => "gaussian_location",
            Self::Linear => "linear",
            Self::RidgeLinear => "ridge_linear",
            Self::Logistic => "logistic",
            Self::LogisticRidge => "logistic_ridge",
        }
    }
}

/// Estimators that can be attached to a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Smp,
    Mle,
    RidgeMle,
    MinimaxPosterior,
}

impl EstimatorKind {
    pub fn label(self) -> &'static str {
        match self {
            Self::Smp => "smp",
            Self::Mle => "mle",
            Self::RidgeMle => "ridge_mle",
            Self::MinimaxPosterior => "minimax_posterior",
        }
    }
}

/// Valid (model, estimator) pairings.
pub fn supported(model: ModelKind, estimator: EstimatorKind) -> bool {
    use EstimatorKind::*;
    use ModelKind::*;
    matches!(
        (model, estimator),
        (Multinomial, Smp | Mle)
            | (GaussianLocation, Smp | Mle | MinimaxPosterior)
            | (Linear, Smp | Mle)
            | (RidgeLinear, Smp | RidgeMle)
            | (Logistic, Smp | Mle)
            | (LogisticRidge, Smp | RidgeMle)
    )
}

/// One Monte Carlo cell: a model/estimator pair at a grid point, with the
/// comparator parameter already resolved for the conditional models.
pub struct McTask<'a> {
    pub model: ModelKind,
    pub estimator: EstimatorKind,
    pub generator: &'a Generator,
    pub n: usize,
    pub lambda: f64,
    /// Fresh query points per replicate for conditional-risk evaluation.
    pub x_eval: usize,
    /// Comparator parameter for the conditional models.
    pub comparator_theta: Option<Vec<f64>>,
}

/// The closed-form bound (or exact risk value) that belongs next to the
/// measured excess of this cell, when one applies.
pub fn bound_for(task: &McTask<'_>) -> Option<f64> {
    let d = task.generator.dim();
    let n = task.n;
    match (task.model, task.estimator) {
        (ModelKind::Multinomial, EstimatorKind::Smp) => {
            Some(multinomial_excess_risk_bound(n as u64, d))
        }
        (ModelKind::GaussianLocation, EstimatorKind::Smp) => Some(location_smp_bound(n, d)),
        (ModelKind::GaussianLocation, EstimatorKind::MinimaxPosterior) => {
            Some(location_minimax_risk(n, d))
        }
        // Exact misspecification value of the plug-in: tr(Sigma_Y) / (2n).
        (ModelKind::GaussianLocation, EstimatorKind::Mle) => {
            Some(task.generator.location_cov_trace() / (2.0 * n as f64))
        }
        (ModelKind::Linear, EstimatorKind::Smp) => {
            let design = task.generator.design()?;
            if matches!(design, crate::generator::Design::StandardGaussian) {
                gaussian_design_expected_trace(n, d)
                    .map(|trace| linear_smp_bound_from_trace(trace, n))
            } else {
                None
            }
        }
        (ModelKind::RidgeLinear, EstimatorKind::Smp) => {
            let design = task.generator.design()?;
            let r = design.radius(d)?;
            // The df bound needs lambda >= 2 R^2 / (n+1).
            if task.lambda + 1e-12 < 2.0 * r * r / (n + 1) as f64 {
                return None;
            }
            let sigma = design.covariance(d);
            let df = degrees_of_freedom(&sigma, d, task.lambda).ok()?;
            Some(ridge_smp_df_bound(df, n))
        }
        (ModelKind::LogisticRidge, EstimatorKind::Smp) => {
            let design = task.generator.design()?;
            let sigma = design.covariance(d);
            let df4 = degrees_of_freedom(&sigma, d, 4.0 * task.lambda).ok()?;
            let b = norm2(task.comparator_theta.as_deref()?);
            Some(core::f64::consts::E * df4 / n as f64 + 0.5 * task.lambda * b * b)
        }
        _ => None,
    }
}

fn sample_xy(
    gen: &Generator,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> smp_core::Result<(Matrix, Vec<f64>)> {
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let x = gen.sample_x(rng);
        y.push(gen.sample_y_given(&x, rng));
        rows.push(x);
    }
    Ok((Matrix::from_rows(&rows, gen.dim())?, y))
}

fn sample_queries(gen: &Generator, count: usize, rng: &mut ChaCha8Rng) -> smp_core::Result<Matrix> {
    let rows: Vec<Vec<f64>> = (0..count).map(|_| gen.sample_x(rng)).collect();
    Matrix::from_rows(&rows, gen.dim())
}

fn multinomial_replicate(
    task: &McTask<'_>,
    truth: &CategoricalDensity,
    rng: &mut ChaCha8Rng,
) -> smp_core::Result<f64> {
    let counts = task.generator.sample_counts(task.n, rng);
    let pred = match task.estimator {
        EstimatorKind::Smp => multinomial_smp(&counts)?,
        EstimatorKind::Mle => multinomial_mle(&counts)?,
        _ => unreachable!("unsupported multinomial estimator"),
    };
    // The family always contains the truth, so the excess is plain KL.
    kl_categorical(truth, &pred)
}

fn location_replicate(task: &McTask<'_>, rng: &mut ChaCha8Rng) -> smp_core::Result<f64> {
    let gen = task.generator;
    let d = gen.dim();
    let n = task.n;
    let mut mean = vec![0.0; d];
    for _ in 0..n {
        let y = gen.sample_location(rng);
        axpy(1.0, &y, &mut mean);
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let c2 = match task.estimator {
        EstimatorKind::Smp => {
            let c = 1.0 + 1.0 / n as f64;
            c * c
        }
        EstimatorKind::MinimaxPosterior => 1.0 + 1.0 / n as f64,
        EstimatorKind::Mle => 1.0,
        EstimatorKind::RidgeMle => unreachable!("unsupported location estimator"),
    };
    // Risk difference of N(mean, c2 I) against N(theta*, I) under any source
    // with mean theta* and covariance trace tr(Sigma_Y): log-densities are
    // quadratic, so only the first two moments enter.
    let theta_star = gen.location_mean();
    let mut dev2 = 0.0;
    for (m, t) in mean.iter().zip(theta_star) {
        dev2 += (m - t) * (m - t);
    }
    let tr = gen.location_cov_trace();
    Ok(0.5 * d as f64 * c2.ln() + dev2 / (2.0 * c2) + 0.5 * (1.0 / c2 - 1.0) * tr)
}

fn linear_replicate(task: &McTask<'_>, rng: &mut ChaCha8Rng) -> smp_core::Result<f64> {
    let gen = task.generator;
    let (x, y) = sample_xy(gen, task.n, rng)?;
    let xs = sample_queries(gen, task.x_eval, rng)?;
    let moments = |q: &[f64]| (gen.conditional_mean(q), gen.conditional_var(q));
    let penalized = task.model == ModelKind::RidgeLinear;
    let risk_pred = match task.estimator {
        EstimatorKind::Smp if !penalized => {
            let fit = ols_fit(&x, &y)?;
            gaussian_conditional_risk(|q| linear_smp_predict(&fit, q), moments, &xs)?
        }
        EstimatorKind::Smp => {
            let fit = ridge_fit(&x, &y, task.lambda)?;
            gaussian_conditional_risk(|q| ridge_smp_predict_from(&fit, q), moments, &xs)?
        }
        EstimatorKind::Mle => {
            let fit = ols_fit(&x, &y)?;
            gaussian_conditional_risk(|q| Ok(plug_in_predict(&fit, q)), moments, &xs)?
        }
        EstimatorKind::RidgeMle => {
            let fit = ridge_fit(&x, &y, task.lambda)?;
            gaussian_conditional_risk(|q| Ok(plug_in_predict(&fit, q)), moments, &xs)?
        }
        EstimatorKind::MinimaxPosterior => unreachable!("unsupported linear estimator"),
    };
    let theta_cmp = task
        .comparator_theta
        .as_deref()
        .expect("linear comparator resolved");
    let mut risk_cmp = gaussian_conditional_risk(
        |q| {
            Ok(smp_core::gaussian::ScalarGaussianPredictive {
                mean: dot(theta_cmp, q),
                variance: 1.0,
            })
        },
        moments,
        &xs,
    )?;
    if penalized {
        risk_cmp += 0.5 * task.lambda * dot(theta_cmp, theta_cmp);
    }
    Ok(risk_pred - risk_cmp)
}

fn logistic_replicate(task: &McTask<'_>, rng: &mut ChaCha8Rng) -> smp_core::Result<f64> {
    let gen = task.generator;
    let d = gen.dim();
    let mut rows = Vec::with_capacity(task.n);
    for _ in 0..task.n {
        let x = gen.sample_x(rng);
        let label = gen.sample_label(&x, rng);
        rows.push(x.iter().map(|v| -label * v).collect::<Vec<f64>>());
    }
    let z = Matrix::from_rows(&rows, d)?;
    let xs = sample_queries(gen, task.x_eval, rng)?;
    let eta = |q: &[f64]| gen.eta(q);
    let risk_pred = match (task.model, task.estimator) {
        (ModelKind::LogisticRidge, EstimatorKind::Smp) => {
            let base = newton_fit(&z, task.lambda, &vec![0.0; d], NEWTON_TOL, NEWTON_MAX_ITER)?;
            bernoulli_conditional_risk(
                |q| smp_predict_warm(&z, q, task.lambda, Some(&base.theta)),
                eta,
                &xs,
            )?
        }
        (ModelKind::LogisticRidge, EstimatorKind::RidgeMle) => {
            let base = newton_fit(&z, task.lambda, &vec![0.0; d], NEWTON_TOL, NEWTON_MAX_ITER)?;
            bernoulli_conditional_risk(
                |q| {
                    Ok(BernoulliPredictive {
                        p_plus: sigmoid(dot(&base.theta, q)),
                    })
                },
                eta,
                &xs,
            )?
        }
        (ModelKind::Logistic, EstimatorKind::Smp) => {
            bernoulli_conditional_risk(|q| smp_predict_warm(&z, q, 0.0, None), eta, &xs)?
        }
        (ModelKind::Logistic, EstimatorKind::Mle) => {
            let fit = mle_fit(&z, NEWTON_TOL, NEWTON_MAX_ITER)?;
            bernoulli_conditional_risk(
                |q| {
                    let u = dot(&fit.theta, q);
                    let p = if fit.separated {
                        // Extended-class MLE: saturated prediction along the
                        // separating direction.
                        if u > 0.0 {
                            1.0
                        } else if u < 0.0 {
                            0.0
                        } else {
                            0.5
                        }
                    } else {
                        sigmoid(u)
                    };
                    Ok(BernoulliPredictive { p_plus: p })
                },
                eta,
                &xs,
            )?
        }
        _ => unreachable!("unsupported logistic pairing"),
    };
    let theta_cmp = task
        .comparator_theta
        .as_deref()
        .expect("logistic comparator resolved");
    let risk_cmp = bernoulli_conditional_risk(
        |q| {
            Ok(BernoulliPredictive {
                p_plus: sigmoid(dot(theta_cmp, q)),
            })
        },
        eta,
        &xs,
    )?;
    Ok(risk_pred - risk_cmp)
}

/// Monte Carlo excess-risk estimate over independent training replicates.
/// Deterministic for a given seed; the `bound` field carries the matching
/// closed-form expression when one applies.
pub fn excess_risk_mc(task: &McTask<'_>, replicates: usize, seed: u64) -> Result<RiskEstimate> {
    if !supported(task.model, task.estimator) {
        return Err(HarnessError::Config(format!(
            "estimator {} is not defined for model {}",
            task.estimator.label(),
            task.model.label()
        )));
    }
    let bound = bound_for(task);
    match task.model {
        ModelKind::Multinomial => {
            let probs = task
                .generator
                .probs()
                .ok_or_else(|| HarnessError::Config("multinomial generator required".into()))?;
            let truth = CategoricalDensity::new(probs.to_vec())?;
            mc::estimate(replicates, seed, bound, |_, rng| {
                multinomial_replicate(task, &truth, rng)
            })
        }
        ModelKind::GaussianLocation => {
            mc::estimate(replicates, seed, bound, |_, rng| location_replicate(task, rng))
        }
        ModelKind::Linear | ModelKind::RidgeLinear => {
            mc::estimate(replicates, seed, bound, |_, rng| linear_replicate(task, rng))
        }
        ModelKind::Logistic | ModelKind::LogisticRidge => {
            mc::estimate(replicates, seed, bound, |_, rng| logistic_replicate(task, rng))
        }
    }
}

/// Monte Carlo estimate of `E[tr(rescaled Sigma_hat^{-1})]` for the
/// generator's design: the mean of `n * tr((n Sigma_hat)^{-1} Sigma)` over
/// replicates. Singular replicates count as failures.
pub fn trace_inverse_mc(
    gen: &Generator,
    n: usize,
    replicates: usize,
    seed: u64,
) -> Result<RiskEstimate> {
    let d = gen.dim();
    let design = gen
        .design()
        .ok_or_else(|| HarnessError::Config("a conditional design is required".into()))?;
    let sigma = design.covariance(d);
    let closed_form = if matches!(design, crate::generator::Design::StandardGaussian) {
        gaussian_design_expected_trace(n, d)
    } else {
        None
    };
    mc::estimate(replicates, seed, closed_form, |_, rng| {
        let rows: Vec<Vec<f64>> = (0..n).map(|_| gen.sample_x(rng)).collect();
        let x = Matrix::from_rows(&rows, d)?;
        let f = spd_factorize(&x.gram(), d)?;
        // tr((n Sigma_hat)^{-1} Sigma) via column solves, rescaled by n.
        let mut trace = 0.0;
        let mut col = vec![0.0; d];
        for j in 0..d {
            for i in 0..d {
                col[i] = sigma[i * d + j];
            }
            trace += f.solve(&col)?[j];
        }
        Ok(n as f64 * trace)
    })
}

/// Monte Carlo estimate of the plain linear SMP bound
/// `log(1 + E[tr(rescaled Sigma_hat^{-1})] / n)`, with a delta-method
/// standard error and the closed form attached for a Gaussian design.
pub fn linear_smp_bound_mc(
    gen: &Generator,
    n: usize,
    replicates: usize,
    seed: u64,
) -> Result<RiskEstimate> {
    let trace = trace_inverse_mc(gen, n, replicates, seed)?;
    Ok(RiskEstimate {
        mean: linear_smp_bound_from_trace(trace.mean, n),
        std_err: trace.std_err / (n as f64 + trace.mean),
        replicates: trace.replicates,
        bound: trace.bound.map(|t| linear_smp_bound_from_trace(t, n)),
        failures: trace.failures,
    })
}

/// Large-sample constrained logistic fit: minimizes the empirical logistic
/// risk over the ball of radius `b` by projected gradient descent with
/// backtracking, on `samples` draws from the generator. Used as the
/// best-in-ball comparator oracle.
pub fn best_in_ball(gen: &Generator, b: f64, samples: usize, seed: u64) -> Result<Vec<f64>> {
    let d = gen.dim();
    let mut rng = crate::mc::replicate_rng(derive_seed(seed, 0xB411), 0);
    let mut rows = Vec::with_capacity(samples);
    for _ in 0..samples {
        let x = gen.sample_x(&mut rng);
        let label = gen.sample_label(&x, &mut rng);
        rows.push(x.iter().map(|v| -label * v).collect::<Vec<f64>>());
    }
    let z = Matrix::from_rows(&rows, d)?;
    let value_grad = |theta: &[f64]| {
        let (v, g, _) = smp_core::logistic::logistic_objective(theta, &z, 0.0);
        (v, g)
    };
    let project = |theta: &mut Vec<f64>| {
        let norm = norm2(theta);
        if norm > b {
            let s = b / norm;
            for t in theta.iter_mut() {
                *t *= s;
            }
        }
    };
    let mut theta = vec![0.0; d];
    let (mut value, mut grad) = value_grad(&theta);
    let mut step = 1.0;
    for _ in 0..500 {
        // Projected-gradient residual as the stopping criterion.
        let mut probe = theta.clone();
        axpy(-1.0, &grad, &mut probe);
        project(&mut probe);
        axpy(-1.0, &theta, &mut probe);
        if norm2(&probe) <= 1e-10 * (1.0 + norm2(&theta)) {
            break;
        }
        // Backtracking projected step.
        let mut t = step * 2.0;
        loop {
            let mut candidate = theta.clone();
            axpy(-t, &grad, &mut candidate);
            project(&mut candidate);
            let (cv, cg) = value_grad(&candidate);
            if cv <= value + 1e-15 * (1.0 + value.abs()) {
                theta = candidate;
                value = cv;
                grad = cg;
                step = t;
                break;
            }
            t *= 0.5;
            if t < 1e-18 {
                return Ok(theta);
            }
        }
    }
    Ok(theta)
}

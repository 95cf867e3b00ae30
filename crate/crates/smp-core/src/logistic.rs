//! Logistic conditional density estimation: objective, damped Newton solver,
//! linear-separation detection, and the SMP predictor.
//!
//! Samples enter in the folded form `z_i = -y_i x_i`, so the empirical
//! objective is `m^{-1} sum_i loss(<theta, z_i>) + lambda ||theta||^2 / 2`
//! and a strict separator is any `theta` with `<theta, z_i> < 0` for all i.
//!
//! An SMP prediction at a query `x` refits twice, once per candidate label
//! appended as a virtual sample, and normalizes:
//!
//! ```text
//! p(+1 | x) = a / (a + b),
//!   a = sigmoid(<theta_plus, x>)   * exp(-lambda ||theta_plus||^2  / 2)
//!   b = sigmoid(-<theta_minus, x>) * exp(-lambda ||theta_minus||^2 / 2)
//! ```
//!
//! where `theta_plus` minimizes the `(n+1)`-averaged objective over the
//! sample plus `(x, +1)` and `theta_minus` over the sample plus `(x, -1)`.
//! For `lambda = 0` a separated augmented sample contributes its term as
//! exactly 1 (the supremum over the extended class), so the prediction never
//! depends on a choice of maximizer and always lands strictly inside (0, 1).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::numerics::scalar::{log_sigmoid, log_sum_exp, logistic_loss, sigmoid, sigmoid_prime};
use crate::numerics::{axpy, dot, norm2, spd_factorize, Matrix};
use crate::{fm, Error, Result};

/// Default gradient-norm tolerance for the Newton solver.
pub const NEWTON_TOL: f64 = 1e-10;
/// Default iteration cap for the Newton solver.
pub const NEWTON_MAX_ITER: usize = 100;
/// Below this certificate margin, separation is reported as inconclusive
/// rather than guessed.
pub const MARGIN_TOL: f64 = 1e-7;

/// Result of a (ridge-)logistic fit.
#[derive(Debug, Clone)]
pub struct LogisticFit {
    pub theta: Vec<f64>,
    pub lambda: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    /// Only meaningful on unpenalized paths: the sample was strictly
    /// linearly separated, `theta` is a separating direction and no finite
    /// maximum-likelihood estimate exists.
    pub separated: bool,
}

/// Bernoulli predictive: probability of the label `+1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernoulliPredictive {
    pub p_plus: f64,
}

impl BernoulliPredictive {
    /// Log-loss against a label in `{-1, +1}`.
    pub fn log_loss(&self, y: i8) -> f64 {
        let p = if y > 0 { self.p_plus } else { 1.0 - self.p_plus };
        -fm::ln(p)
    }
}

/// The averaged ridge-logistic objective over base rows plus an optional
/// virtual sample.
struct Problem<'a> {
    z: &'a Matrix,
    virtual_z: Option<&'a [f64]>,
    lambda: f64,
}

impl<'a> Problem<'a> {
    fn count(&self) -> usize {
        self.z.rows() + usize::from(self.virtual_z.is_some())
    }

    fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.z.iter_rows().chain(self.virtual_z.iter().copied())
    }

    fn value(&self, theta: &[f64]) -> f64 {
        let m = self.count().max(1) as f64;
        let loss: f64 = self.rows().map(|z| logistic_loss(dot(theta, z))).sum();
        loss / m + 0.5 * self.lambda * dot(theta, theta)
    }

    fn value_grad(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let m = self.count().max(1) as f64;
        let mut loss = 0.0;
        let mut grad = vec![0.0; theta.len()];
        for z in self.rows() {
            let u = dot(theta, z);
            loss += logistic_loss(u);
            axpy(sigmoid(u), z, &mut grad);
        }
        let inv = 1.0 / m;
        for (g, t) in grad.iter_mut().zip(theta) {
            *g = *g * inv + self.lambda * t;
        }
        (loss / m + 0.5 * self.lambda * dot(theta, theta), grad)
    }

    fn hessian(&self, theta: &[f64]) -> Vec<f64> {
        let d = theta.len();
        let m = self.count().max(1) as f64;
        let mut h = vec![0.0; d * d];
        for z in self.rows() {
            let w = sigmoid_prime(dot(theta, z)) / m;
            if w == 0.0 {
                continue;
            }
            for j in 0..d {
                let wj = w * z[j];
                if wj == 0.0 {
                    continue;
                }
                for k in j..d {
                    h[j * d + k] += wj * z[k];
                }
            }
        }
        for j in 0..d {
            for k in 0..j {
                h[j * d + k] = h[k * d + j];
            }
            h[j * d + j] += self.lambda;
        }
        h
    }
}

/// Value, gradient and Hessian of the averaged ridge-logistic objective
/// `n^{-1} sum_i loss(<theta, z_i>) + lambda ||theta||^2 / 2`.
pub fn logistic_objective(theta: &[f64], z: &Matrix, lambda: f64) -> (f64, Vec<f64>, Vec<f64>) {
    let p = Problem {
        z,
        virtual_z: None,
        lambda,
    };
    let (value, grad) = p.value_grad(theta);
    (value, grad, p.hessian(theta))
}

/// Damped Newton with backtracking line search (halving, Armijo constant
/// 1e-4) and a gradient-step fallback when the Hessian solve fails. Accepted
/// steps never increase the objective beyond floating-point resolution.
/// Converged when the gradient norm drops to `tol * (1 + ||theta||)`.
fn newton_impl(
    problem: &Problem<'_>,
    theta0: &[f64],
    tol: f64,
    max_iter: usize,
    mut on_accept: impl FnMut(f64),
) -> Result<LogisticFit> {
    const ARMIJO: f64 = 1e-4;
    let mut theta = theta0.to_vec();
    let (mut value, mut grad) = problem.value_grad(&theta);
    let mut iterations = 0;
    loop {
        let grad_norm = norm2(&grad);
        if grad_norm <= tol * (1.0 + norm2(&theta)) {
            return Ok(LogisticFit {
                theta,
                lambda: problem.lambda,
                iterations,
                grad_norm,
                separated: false,
            });
        }
        if iterations >= max_iter {
            return Err(Error::MaxIterExceeded {
                iterations,
                grad_norm,
                theta,
            });
        }
        let hess = problem.hessian(&theta);
        let mut dir = match spd_factorize(&hess, theta.len()).and_then(|f| f.solve(&grad)) {
            Ok(dir) => dir,
            Err(_) => grad.clone(),
        };
        let mut descent = dot(&grad, &dir);
        if !(descent > 0.0) {
            dir = grad.clone();
            descent = grad_norm * grad_norm;
        }
        let mut step = 1.0;
        // Once the attainable decrease drops below the resolution of the
        // objective value, the Armijo test is pure rounding noise; accept
        // any non-increasing step (the full Newton step is contractive in
        // that regime).
        let noise = 1e-15 * (1.0 + value.abs());
        let accepted = loop {
            let mut candidate = theta.clone();
            axpy(-step, &dir, &mut candidate);
            let candidate_value = problem.value(&candidate);
            let required = ARMIJO * step * descent;
            if candidate_value <= value - required
                || (required <= noise && candidate_value <= value + noise)
            {
                break Some((candidate, candidate_value));
            }
            step *= 0.5;
            if step < 1e-20 {
                break None;
            }
        };
        match accepted {
            Some((new_theta, new_value)) => {
                theta = new_theta;
                value = new_value;
                on_accept(value);
                let vg = problem.value_grad(&theta);
                value = vg.0;
                grad = vg.1;
                iterations += 1;
            }
            // The line search cannot make progress: we are at the numerical
            // floor of the objective.
            None => {
                return Err(Error::MaxIterExceeded {
                    iterations,
                    grad_norm,
                    theta,
                });
            }
        }
    }
}

/// Ridge-logistic fit by damped Newton. Strong convexity (`lambda > 0`)
/// guarantees a unique minimizer.
pub fn newton_fit(
    z: &Matrix,
    lambda: f64,
    theta0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<LogisticFit> {
    if lambda <= 0.0 {
        return Err(Error::NonPositiveLambda(lambda));
    }
    let problem = Problem {
        z,
        virtual_z: None,
        lambda,
    };
    newton_impl(&problem, theta0, tol, max_iter, |_| {})
}

/// Outcome of a separation check.
#[derive(Debug, Clone, PartialEq)]
pub enum Separation {
    /// A strict separator exists; `certificate` is a unit vector with
    /// `<certificate, z_i> <= -margin` for every sample.
    Separated { certificate: Vec<f64>, margin: f64 },
    /// The origin lies in the convex hull of the normalized samples, so no
    /// strict separator exists.
    NotSeparated,
}

/// Decides whether some `theta` has `<theta, z_i> < 0` for all rows
/// (equivalently `y_i <theta, x_i> > 0` for the unfolded sample).
///
/// Separability is scale-invariant, so the rows are normalized and the
/// question becomes whether the origin lies in their convex hull. A
/// minimum-norm-point iteration produces either a certificate direction with
/// verified margin or a hull point at the origin; small instances that stay
/// ambiguous are settled exactly by enumerating simplices. A best margin
/// below [`MARGIN_TOL`] that cannot be settled is reported as
/// [`Error::SeparationInconclusive`] rather than guessed.
pub fn separation_check(z: &Matrix) -> Result<Separation> {
    if z.rows() == 0 {
        return Err(Error::EmptySample);
    }
    let mut normalized: Vec<Vec<f64>> = Vec::with_capacity(z.rows());
    for row in z.iter_rows() {
        let norm = norm2(row);
        if norm == 0.0 {
            // <theta, 0> = 0 can never be strictly negative.
            return Ok(Separation::NotSeparated);
        }
        normalized.push(row.iter().map(|v| v / norm).collect());
    }

    let d = z.cols();
    let mut p = normalized[0].clone();
    let mut best_margin = f64::NEG_INFINITY;
    let mut best_dir: Vec<f64> = vec![0.0; d];
    let max_iter = 200 * (z.rows() + d) + 2000;
    for _ in 0..max_iter {
        let p_norm = norm2(&p);
        if p_norm <= 1e-12 {
            return Ok(Separation::NotSeparated);
        }
        // Candidate certificate from the current hull point.
        let mut margin = f64::INFINITY;
        let mut support = 0;
        for (i, zi) in normalized.iter().enumerate() {
            let v = dot(&p, zi) / p_norm;
            if v < margin {
                margin = v;
                support = i;
            }
        }
        if margin > best_margin {
            best_margin = margin;
            best_dir.copy_from_slice(&p);
            let inv = 1.0 / p_norm;
            for v in &mut best_dir {
                *v *= inv;
            }
        }
        // Minimum-norm step towards the least-aligned sample.
        let v = &normalized[support];
        let gap = p_norm * p_norm - margin * p_norm;
        if gap <= 1e-15 * (1.0 + p_norm * p_norm) {
            break;
        }
        let mut diff = p.clone();
        axpy(-1.0, v, &mut diff);
        let denom = dot(&diff, &diff);
        if denom == 0.0 {
            break;
        }
        let t = (dot(&p, &diff) / denom).clamp(0.0, 1.0);
        axpy(-t, &diff, &mut p);
    }

    if best_margin >= MARGIN_TOL {
        let certificate: Vec<f64> = best_dir.iter().map(|v| -v).collect();
        return Ok(Separation::Separated {
            certificate,
            margin: best_margin,
        });
    }
    if norm2(&p) <= 1e-9 {
        return Ok(Separation::NotSeparated);
    }
    if z.rows() <= 16 && d <= 5 {
        return if origin_in_hull_exact(&normalized, d) {
            Ok(Separation::NotSeparated)
        } else {
            Err(Error::SeparationInconclusive {
                margin: best_margin,
            })
        };
    }
    Err(Error::SeparationInconclusive {
        margin: best_margin,
    })
}

/// Exhaustive Caratheodory check: the origin lies in the hull of the points
/// iff it lies in the simplex of some subset of at most d+1 points.
fn origin_in_hull_exact(points: &[Vec<f64>], d: usize) -> bool {
    let n = points.len();
    let max_k = (d + 1).min(n);
    let mut subset = Vec::with_capacity(max_k);
    for k in 1..=max_k {
        subset.clear();
        subset.extend(0..k);
        loop {
            if origin_in_simplex(points, &subset, d) {
                return true;
            }
            // Next k-combination of 0..n in lexicographic order.
            let mut i = k;
            loop {
                if i == 0 {
                    break;
                }
                i -= 1;
                if subset[i] < n - (k - i) {
                    subset[i] += 1;
                    for j in (i + 1)..k {
                        subset[j] = subset[j - 1] + 1;
                    }
                    break;
                }
                if i == 0 {
                    subset.clear();
                    break;
                }
            }
            if subset.is_empty() {
                break;
            }
        }
    }
    false
}

fn origin_in_simplex(points: &[Vec<f64>], subset: &[usize], d: usize) -> bool {
    // Solve sum_j alpha_j p_j = 0, sum_j alpha_j = 1 in least squares and
    // verify residual and nonnegativity.
    let k = subset.len();
    let rows = d + 1;
    // Normal equations of the (d+1) x k stacked system [points; ones].
    let mut ata = vec![0.0; k * k];
    let mut atb = vec![0.0; k];
    for a in 0..k {
        let pa = &points[subset[a]];
        for b in a..k {
            let pb = &points[subset[b]];
            ata[a * k + b] = dot(pa, pb) + 1.0;
            ata[b * k + a] = ata[a * k + b];
        }
        atb[a] = 1.0; // <column a, target (0,..,0,1)>
    }
    let Ok(f) = spd_factorize(&ata, k) else {
        return false;
    };
    let Ok(alpha) = f.solve(&atb) else {
        return false;
    };
    if alpha.iter().any(|&a| a < -1e-9) {
        return false;
    }
    // Residual of the stacked system.
    let mut res = 0.0;
    for r in 0..rows {
        let mut v = if r == d { -1.0 } else { 0.0 };
        for (j, &idx) in subset.iter().enumerate() {
            let col = if r == d { 1.0 } else { points[idx][r] };
            v += col * alpha[j];
        }
        res += v * v;
    }
    fm::sqrt(res) <= 1e-9
}

/// Unpenalized maximum-likelihood fit.
///
/// On strictly separated data no finite MLE exists; the returned fit then
/// carries the separation certificate with `separated = true`. On
/// non-separated data the Newton solve is restricted to the span of the
/// samples, where the minimizer is well-defined even if the design is
/// rank-deficient.
pub fn mle_fit(z: &Matrix, tol: f64, max_iter: usize) -> Result<LogisticFit> {
    match separation_check(z)? {
        Separation::Separated {
            certificate,
            margin,
        } => Ok(LogisticFit {
            theta: certificate,
            lambda: 0.0,
            iterations: 0,
            grad_norm: margin,
            separated: true,
        }),
        Separation::NotSeparated => span_restricted_fit(z, None, tol, max_iter),
    }
}

/// Orthonormal basis of the row span (modified Gram-Schmidt).
fn span_basis(rows: impl Iterator<Item = Vec<f64>>, d: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for mut v in rows {
        for q in &basis {
            let c = dot(&v, q);
            axpy(-c, q, &mut v);
        }
        let norm = norm2(&v);
        if norm > 1e-10 {
            for x in &mut v {
                *x /= norm;
            }
            basis.push(v);
            if basis.len() == d {
                break;
            }
        }
    }
    basis
}

/// Newton on the span of the sample for `lambda = 0`: the minimizer along
/// the span is unique whenever the (augmented) sample is not separated, and
/// every predicted value `<theta, z>` for `z` in the span is well-defined.
fn span_restricted_fit(
    z: &Matrix,
    virtual_z: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<LogisticFit> {
    let d = z.cols();
    let rows = z
        .iter_rows()
        .map(<[f64]>::to_vec)
        .chain(virtual_z.map(<[f64]>::to_vec));
    let basis = span_basis(rows, d);
    let r = basis.len();
    if r == d {
        let problem = Problem {
            z,
            virtual_z,
            lambda: 0.0,
        };
        return newton_impl(&problem, &vec![0.0; d], tol, max_iter, |_| {});
    }
    // Project onto span coordinates, solve there, lift back.
    let project = |row: &[f64]| -> Vec<f64> { basis.iter().map(|q| dot(q, row)).collect() };
    let reduced_rows: Vec<Vec<f64>> = z
        .iter_rows()
        .map(project)
        .chain(virtual_z.map(project))
        .collect();
    let reduced = Matrix::from_rows(&reduced_rows, r)?;
    let problem = Problem {
        z: &reduced,
        virtual_z: None,
        lambda: 0.0,
    };
    let fit = newton_impl(&problem, &vec![0.0; r], tol, max_iter, |_| {})?;
    let mut theta = vec![0.0; d];
    for (c, q) in fit.theta.iter().zip(&basis) {
        axpy(*c, q, &mut theta);
    }
    Ok(LogisticFit { theta, ..fit })
}

/// SMP prediction at a query point.
///
/// `lambda > 0` solves the two strongly convex augmented problems by damped
/// Newton and combines the weighted sigmoids in log space. `lambda = 0`
/// first decides separability of each augmented sample: a separated side
/// contributes exactly 1, a non-separated side the sigmoid value of the
/// span-restricted fit. The result is strictly inside (0, 1) by genuine
/// computation; nothing is clipped.
pub fn smp_predict(z: &Matrix, x: &[f64], lambda: f64) -> Result<BernoulliPredictive> {
    smp_predict_warm(z, x, lambda, None)
}

/// [`smp_predict`] with a warm start for the two augmented fits, typically
/// the ridge fit of the base sample. The stability of the regularized
/// minimizer keeps the augmented solutions within `||x|| / (lambda (n+1))`
/// of it, so warm-started Newton usually converges in a few steps.
pub fn smp_predict_warm(
    z: &Matrix,
    x: &[f64],
    lambda: f64,
    warm: Option<&[f64]>,
) -> Result<BernoulliPredictive> {
    if x.len() != z.cols() {
        return Err(Error::DimensionMismatch {
            expected: z.cols(),
            got: x.len(),
        });
    }
    if lambda < 0.0 {
        return Err(Error::NonPositiveLambda(lambda));
    }
    let minus_x: Vec<f64> = x.iter().map(|v| -v).collect();
    if lambda > 0.0 {
        let zero = vec![0.0; x.len()];
        let theta0 = warm.unwrap_or(&zero);
        let plus = newton_impl(
            &Problem {
                z,
                virtual_z: Some(&minus_x),
                lambda,
            },
            theta0,
            NEWTON_TOL,
            NEWTON_MAX_ITER,
            |_| {},
        )?;
        let minus = newton_impl(
            &Problem {
                z,
                virtual_z: Some(x),
                lambda,
            },
            theta0,
            NEWTON_TOL,
            NEWTON_MAX_ITER,
            |_| {},
        )?;
        let log_a = log_sigmoid(dot(&plus.theta, x)) - 0.5 * lambda * dot(&plus.theta, &plus.theta);
        let log_b = log_sigmoid(-dot(&minus.theta, x))
            - 0.5 * lambda * dot(&minus.theta, &minus.theta);
        let p_plus = fm::exp(log_a - log_sum_exp(log_a, log_b));
        return Ok(BernoulliPredictive { p_plus });
    }

    // Unpenalized path: value of each branch through the extended class.
    let branch = |virtual_z: &[f64], sign: f64| -> Result<f64> {
        let mut rows: Vec<Vec<f64>> = z.iter_rows().map(<[f64]>::to_vec).collect();
        rows.push(virtual_z.to_vec());
        let augmented = Matrix::from_rows(&rows, z.cols())?;
        match separation_check(&augmented)? {
            Separation::Separated { .. } => Ok(1.0),
            Separation::NotSeparated => {
                let fit = span_restricted_fit(z, Some(virtual_z), NEWTON_TOL, NEWTON_MAX_ITER)?;
                Ok(sigmoid(sign * dot(&fit.theta, x)))
            }
        }
    };
    let a = branch(&minus_x, 1.0)?;
    let b = branch(x, -1.0)?;
    Ok(BernoulliPredictive {
        p_plus: a / (a + b),
    })
}

/// Default ridge level for the logistic SMP: `2 R^2 / (n+1)`.
pub fn ridge_smp_lambda_default(r: f64, n: usize) -> f64 {
    2.0 * r * r / (n + 1) as f64
}

/// Finite-dimensional excess-risk bound companion for the default ridge
/// level, with respect to the ball of radius `b`:
/// `(e d + b^2 r^2) / denominator`. The natural statement divides by `n`;
/// the sharper route through the proof divides by `n + 1`, so the
/// denominator is explicit here.
pub fn ridge_smp_excess_bound(d: usize, b: f64, r: f64, denominator: usize) -> f64 {
    (core::f64::consts::E * d as f64 + b * b * r * r) / denominator as f64
}

/// Measured stability of the two augmented ridge fits at a query.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub theta_plus: Vec<f64>,
    pub theta_minus: Vec<f64>,
    /// `||theta_plus - theta_minus||` and its bound `||x|| / (lambda (n+1))`.
    pub distance: f64,
    pub distance_bound: f64,
    /// `<theta_plus - theta_minus, x>` and its bound
    /// `min(||x||^2 / (lambda (n+1)), 1/2)`.
    pub inner: f64,
    pub inner_bound: f64,
}

/// Checks the stability inequalities of the two augmented minimizers.
///
/// Requires `lambda >= 2 R^2 / (n+1)` with `R` the largest norm among the
/// samples and the query; under that level the minimizers satisfy
/// `||theta_plus - theta_minus|| <= ||x|| / (lambda (n+1))` and
/// `0 <= <theta_plus - theta_minus, x> <= 1/2`. Violations beyond solver
/// slack are reported as [`Error::StabilityViolation`].
pub fn stability_check(z: &Matrix, x: &[f64], lambda: f64) -> Result<StabilityReport> {
    let n = z.rows();
    let r = z
        .iter_rows()
        .map(norm2)
        .fold(norm2(x), f64::max);
    let required = 2.0 * r * r / (n + 1) as f64;
    if lambda < required * (1.0 - 1e-12) {
        return Err(Error::LambdaTooSmall { lambda, required });
    }
    let minus_x: Vec<f64> = x.iter().map(|v| -v).collect();
    let plus = newton_impl(
        &Problem {
            z,
            virtual_z: Some(&minus_x),
            lambda,
        },
        &vec![0.0; x.len()],
        NEWTON_TOL,
        NEWTON_MAX_ITER,
        |_| {},
    )?;
    let minus = newton_impl(
        &Problem {
            z,
            virtual_z: Some(x),
            lambda,
        },
        &vec![0.0; x.len()],
        NEWTON_TOL,
        NEWTON_MAX_ITER,
        |_| {},
    )?;
    let mut diff = plus.theta.clone();
    axpy(-1.0, &minus.theta, &mut diff);
    let distance = norm2(&diff);
    let x_norm = norm2(x);
    let scale = lambda * (n + 1) as f64;
    let distance_bound = x_norm / scale;
    let inner = dot(&diff, x);
    let inner_bound = (x_norm * x_norm / scale).min(0.5);
    let slack = 1e-7 * (1.0 + distance_bound.max(inner_bound));
    if distance > distance_bound + slack {
        return Err(Error::StabilityViolation(format!(
            "distance {distance:.6e} exceeds bound {distance_bound:.6e}"
        )));
    }
    if inner < -slack || inner > inner_bound + slack {
        return Err(Error::StabilityViolation(format!(
            "inner product {inner:.6e} outside [0, {inner_bound:.6e}]"
        )));
    }
    Ok(StabilityReport {
        theta_plus: plus.theta,
        theta_minus: minus.theta,
        distance,
        distance_bound,
        inner,
        inner_bound,
    })
}

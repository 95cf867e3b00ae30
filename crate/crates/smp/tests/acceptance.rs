//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (run with `--nocapture` to see them all). Tolerances are pinned in code;
//! Monte Carlo checks get three standard errors of slack and fixed seeds, so
//! every outcome is reproducible bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use smp::estimator::{excess_risk_mc, trace_inverse_mc, EstimatorKind, McTask, ModelKind};
use smp::generator::{
    CovSpec, DesignSpec, Generator, GeneratorSpec, LocationShape, MeanSpec, NoiseSpec, ProbSpec,
    ScaleSpec, ThetaSpec,
};
use smp_core::gaussian::{ridge_smp_df_bound, ridge_smp_predict};
use smp_core::logistic::{
    logistic_objective, ridge_smp_excess_bound, separation_check, smp_predict, stability_check,
    Separation,
};
use smp_core::numerics::{degrees_of_freedom, dot, norm2, spd_factorize, Matrix};
use smp_core::risk::RiskEstimate;

fn report(criterion: usize, name: &str, ok: bool, details: &str) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    println!("[acceptance] criterion {criterion:2} ({name}): {verdict} - {details}");
    assert!(ok, "criterion {criterion} ({name}) failed: {details}");
}

fn point_mass_gen(d: usize) -> Generator {
    Generator::resolve(
        &GeneratorSpec::Multinomial {
            probs: ProbSpec::PointMass { index: 0 },
        },
        d,
    )
    .unwrap()
}

fn location_gen(cov: CovSpec, shape: LocationShape) -> Generator {
    Generator::resolve(
        &GeneratorSpec::GaussianLocation {
            mean: MeanSpec::Fill { value: 0.25 },
            covariance: cov,
            shape,
        },
        3,
    )
    .unwrap()
}

fn location_task<'a>(gen: &'a Generator, estimator: EstimatorKind) -> McTask<'a> {
    McTask {
        model: ModelKind::GaussianLocation,
        estimator,
        generator: gen,
        n: 10,
        lambda: 0.0,
        x_eval: 1,
        comparator_theta: None,
    }
}

#[test]
fn criterion_01_multinomial_tightness() {
    // Point-mass source: every replicate's SMP excess equals
    // log((n+d)/(n+1)) exactly, so the Monte Carlo mean matches to 1e-12
    // with zero spread.
    let gen = point_mass_gen(5);
    let mut details = String::new();
    let mut ok = true;
    for n in [10usize, 50] {
        let task = McTask {
            model: ModelKind::Multinomial,
            estimator: EstimatorKind::Smp,
            generator: &gen,
            n,
            lambda: 0.0,
            x_eval: 1,
            comparator_theta: None,
        };
        let est = excess_risk_mc(&task, 1000, 101).unwrap();
        let bound = est.bound.unwrap();
        ok &= (est.mean - bound).abs() <= 1e-12 && est.std_err <= 1e-14;
        details.push_str(&format!(
            "n={n}: mean {:.15e} vs log((n+d)/(n+1)) {:.15e}; ",
            est.mean, bound
        ));
    }
    report(1, "multinomial tightness", ok, &details);
}

#[test]
fn criterion_02_multinomial_uniform() {
    let gen = Generator::resolve(
        &GeneratorSpec::Multinomial {
            probs: ProbSpec::Uniform,
        },
        5,
    )
    .unwrap();
    let task = McTask {
        model: ModelKind::Multinomial,
        estimator: EstimatorKind::Smp,
        generator: &gen,
        n: 20,
        lambda: 0.0,
        x_eval: 1,
        comparator_theta: None,
    };
    let est = excess_risk_mc(&task, 100_000, 102).unwrap();
    let bound = (25.0f64 / 21.0).ln();
    let within_bound = est.mean <= bound + 3.0 * est.std_err;
    let strictly_below = est.mean + 3.0 * est.std_err < 0.2;
    report(
        2,
        "multinomial uniform",
        within_bound && strictly_below,
        &format!(
            "mean {:.6e} (se {:.2e}) vs bound {bound:.6e} and (d-1)/n = 0.2",
            est.mean, est.std_err
        ),
    );
}

#[test]
fn criterion_03_gaussian_location_exact_identity() {
    // Frozen target d ln(1+1/n) - d/(2n) at d=3, n=10; the per-replicate
    // values are exact KL excess risks.
    let gen = location_gen(CovSpec::Identity, LocationShape::Gaussian);
    let est = excess_risk_mc(&location_task(&gen, EstimatorKind::Smp), 100_000, 103).unwrap();
    let target = 3.0 * (1.1f64).ln() - 0.15;
    let exact = 3.0 * (1.1f64).ln() - 3.0 / 22.0;
    let ok = (est.mean - target).abs() <= 3.0 * est.std_err;
    report(
        3,
        "gaussian location well-specified identity",
        ok,
        &format!(
            "measured {:.6e} (se {:.2e}) vs documented closed form d ln(1+1/n) - d/(2n) = {target:.6e}; \
             the estimator's exact risk identity is d ln(1+1/n) - d/(2(n+1)) = {exact:.6e}, \
             which the measurement matches to {:.2} se",
            est.mean,
            est.std_err,
            (est.mean - exact).abs() / est.std_err
        ),
    );
}

#[test]
fn criterion_04_minimax_constant_risk() {
    // Three generators with very different shapes and scales; the minimax
    // predictive must show the same risk (d/2) ln(1+1/n) on each, while the
    // plug-in degrades by tr(Sigma_Y)/(2n) = 0.6 under Sigma_Y = 4 I.
    let target = 1.5 * (1.1f64).ln();
    let generators = [
        ("unit gaussian", location_gen(CovSpec::Identity, LocationShape::Gaussian)),
        (
            "gaussian 4I",
            location_gen(CovSpec::ScaledIdentity { scale: 4.0 }, LocationShape::Gaussian),
        ),
        (
            "student-t(5) unit",
            location_gen(CovSpec::Identity, LocationShape::StudentT { nu: 5.0 }),
        ),
    ];
    let mut ok = true;
    let mut details = String::new();
    for (idx, (name, gen)) in generators.iter().enumerate() {
        let est = excess_risk_mc(
            &location_task(gen, EstimatorKind::MinimaxPosterior),
            100_000,
            104 + idx as u64,
        )
        .unwrap();
        let pass = (est.mean - target).abs() <= 3.0 * est.std_err;
        ok &= pass;
        details.push_str(&format!(
            "{name}: {:.6e} (se {:.2e}, target {target:.6e}); ",
            est.mean, est.std_err
        ));
    }
    let mle = excess_risk_mc(
        &location_task(&generators[1].1, EstimatorKind::Mle),
        100_000,
        107,
    )
    .unwrap();
    let mle_pass = (mle.mean - 0.6).abs() <= 3.0 * mle.std_err;
    ok &= mle_pass;
    details.push_str(&format!(
        "mle under 4I: {:.6e} (se {:.2e}, target 0.6)",
        mle.mean, mle.std_err
    ));
    report(4, "minimax constant risk", ok, &details);
}

fn linear_gen(noise: NoiseSpec) -> Generator {
    Generator::resolve(
        &GeneratorSpec::LinearGaussian {
            theta: ThetaSpec::FillNorm { norm: 1.0 },
            design: DesignSpec::StandardGaussian,
            noise,
        },
        5,
    )
    .unwrap()
}

fn linear_task<'a>(gen: &'a Generator, estimator: EstimatorKind) -> McTask<'a> {
    McTask {
        model: ModelKind::Linear,
        estimator,
        generator: gen,
        n: 50,
        lambda: 0.0,
        x_eval: 256,
        comparator_theta: Some(gen.theta_star().unwrap().to_vec()),
    }
}

#[test]
fn criterion_05_gaussian_design_linear_smp() {
    let replicates = 20_000;
    let gen = linear_gen(NoiseSpec::UnitGaussian);

    // (a) E[tr(rescaled Sigma_hat^{-1})] within 2% of nd/(n-d-1) = 250/44.
    let trace = trace_inverse_mc(&gen, 50, replicates, 105).unwrap();
    let expect_trace = 250.0 / 44.0;
    let trace_ok = (trace.mean - expect_trace).abs() <= 0.02 * expect_trace;

    // (b) SMP excess under the bound log(1 + E tr / n).
    let smp = excess_risk_mc(&linear_task(&gen, EstimatorKind::Smp), replicates, 106).unwrap();
    let bound = (1.0 + expect_trace / 50.0f64).ln();
    let smp_ok = smp.mean <= bound + 3.0 * smp.std_err;

    // (c) Shape misspecification alone (unit-variance student-t) leaves the
    // SMP excess unchanged; scaling the noise to variance 4 multiplies the
    // plug-in OLS excess by 4.
    let gen_t1 = linear_gen(NoiseSpec::StudentT {
        nu: 5.0,
        variance: 1.0,
    });
    let smp_t1 = excess_risk_mc(&linear_task(&gen_t1, EstimatorKind::Smp), replicates, 106).unwrap();
    let joint_se = (smp.std_err.powi(2) + smp_t1.std_err.powi(2)).sqrt();
    let unchanged_ok = (smp.mean - smp_t1.mean).abs() <= 3.0 * joint_se;

    let mle = excess_risk_mc(&linear_task(&gen, EstimatorKind::Mle), replicates, 106).unwrap();
    let gen_t4 = linear_gen(NoiseSpec::StudentT {
        nu: 5.0,
        variance: 4.0,
    });
    let mle_t4 = excess_risk_mc(&linear_task(&gen_t4, EstimatorKind::Mle), replicates, 106).unwrap();
    let ratio = mle_t4.mean / mle.mean;
    let ratio_se =
        ratio * ((mle_t4.std_err / mle_t4.mean).powi(2) + (mle.std_err / mle.mean).powi(2)).sqrt();
    let ratio_ok = (ratio - 4.0).abs() <= 3.0 * ratio_se;

    report(
        5,
        "gaussian-design linear SMP",
        trace_ok && smp_ok && unchanged_ok && ratio_ok,
        &format!(
            "trace {:.4} vs {expect_trace:.4}; smp {:.5e} <= bound {bound:.5e}; \
             smp gaussian vs t(5) diff {:.2e} (3 joint se {:.2e}); ols variance-4 ratio {ratio:.3} (se {ratio_se:.3})",
            trace.mean,
            smp.mean,
            (smp.mean - smp_t1.mean).abs(),
            3.0 * joint_se
        ),
    );
}

#[test]
fn criterion_06_ridge_smp_normalization_oracle() {
    // Independent route to the ridge SMP: refit per response value on a
    // grid, weight by exp(-lambda ||theta||^2 / 2), normalize numerically,
    // and compare densities pointwise at 1e-6 on 400 test points.
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let d = rng.random_range(1..=4usize);
        let n = rng.random_range(1..=10usize);
        let lambda = rng.random_range(0.1..=2.0f64);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let y: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let query: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let x = Matrix::from_rows(&rows, d).unwrap();
        let pred = ridge_smp_predict(&x, &y, lambda, &query).unwrap();
        let sigma = pred.variance.sqrt();

        // Per-y refit through an explicit factorization of the augmented
        // matrix n Sigma_hat + x x^T + lambda (n+1) I.
        let mut aug = x.gram();
        for i in 0..d {
            for j in 0..d {
                aug[i * d + j] += query[i] * query[j];
            }
            aug[i * d + i] += lambda * (n + 1) as f64;
        }
        let factor = spd_factorize(&aug, d).unwrap();
        let n_s_hat = x.weighted_row_sum(&y).unwrap();
        let weight = |yv: f64| -> f64 {
            let mut rhs = n_s_hat.clone();
            for (r, q) in rhs.iter_mut().zip(&query) {
                *r += yv * q;
            }
            let theta = factor.solve(&rhs).unwrap();
            let resid = yv - dot(&theta, &query);
            (-0.5 * resid * resid - 0.5 * lambda * dot(&theta, &theta)).exp()
        };

        // Simpson normalization over +-10 sigma.
        let steps = 4000usize;
        let lo = pred.mean - 10.0 * sigma;
        let hi = pred.mean + 10.0 * sigma;
        let h = (hi - lo) / steps as f64;
        let mut z = weight(lo) + weight(hi);
        for i in 1..steps {
            let c = if i % 2 == 1 { 4.0 } else { 2.0 };
            z += c * weight(lo + i as f64 * h);
        }
        z *= h / 3.0;

        for k in 0..400 {
            let yv = pred.mean + sigma * (-4.0 + 8.0 * k as f64 / 399.0);
            let oracle_density = weight(yv) / z;
            let gauss = (-(yv - pred.mean) * (yv - pred.mean) / (2.0 * pred.variance)).exp()
                / (sigma * (2.0 * std::f64::consts::PI).sqrt());
            worst = worst.max((oracle_density - gauss).abs());
        }
    }
    report(
        6,
        "ridge SMP normalization oracle",
        worst <= 1e-6,
        &format!("worst pointwise density gap {worst:.3e} over 50 instances x 400 grid points"),
    );
}

#[test]
fn criterion_07_ridge_smp_df_bound() {
    // d=20, Sigma = diag(j^-2) via sign design with scales 1/j (norm exactly
    // R), lambda = 2R^2/(n+1), n=100: penalized excess under
    // 1.25 df_lambda(Sigma) / (n+1).
    let d = 20usize;
    let n = 100usize;
    let spec = GeneratorSpec::LinearGaussian {
        theta: ThetaSpec::FillNorm { norm: 2.0 },
        design: DesignSpec::Rademacher {
            scales: Some(ScaleSpec::Power { exponent: -1.0 }),
        },
        noise: NoiseSpec::UnitGaussian,
    };
    let gen = Generator::resolve(&spec, d).unwrap();
    let design = gen.design().unwrap();
    let r = design.radius(d).unwrap();
    let lambda = 2.0 * r * r / (n + 1) as f64;
    let sigma = design.covariance(d);
    let df = degrees_of_freedom(&sigma, d, lambda).unwrap();
    let bound = ridge_smp_df_bound(df, n);

    // Penalized comparator: theta_opt = (Sigma + lambda I)^{-1} Sigma theta*.
    let theta_star = gen.theta_star().unwrap().to_vec();
    let mut shifted = sigma.clone();
    for j in 0..d {
        shifted[j * d + j] += lambda;
    }
    let rhs: Vec<f64> = (0..d)
        .map(|i| dot(&sigma[i * d..(i + 1) * d], &theta_star))
        .collect();
    let theta_opt = spd_factorize(&shifted, d).unwrap().solve(&rhs).unwrap();

    let task = McTask {
        model: ModelKind::RidgeLinear,
        estimator: EstimatorKind::Smp,
        generator: &gen,
        n,
        lambda,
        x_eval: 256,
        comparator_theta: Some(theta_opt),
    };
    let est = excess_risk_mc(&task, 10_000, 107).unwrap();
    let ok = est.mean <= bound + 3.0 * est.std_err;
    report(
        7,
        "ridge SMP df bound",
        ok,
        &format!(
            "penalized excess {:.5e} (se {:.2e}) vs 1.25 df/(n+1) = {bound:.5e} (df {df:.4}, lambda {lambda:.5e})",
            est.mean, est.std_err
        ),
    );
}

#[test]
fn criterion_08_logistic_smp_cone_structure() {
    // Training folded sample Z1 = (-1, 0), Z2 = (0, -1): the generated cone
    // is the closed third quadrant. Outside +-cone the SMP is exactly 1/2;
    // inside the cone it is strictly inside (0, 1/2); the unpenalized MLE
    // saturates on the same queries.
    let z = Matrix::from_rows(&[vec![-1.0, 0.0], vec![0.0, -1.0]], 2).unwrap();
    let mut ok = true;
    let mut details = String::new();

    let outside = [[1.0, -1.0], [-2.0, 0.5], [0.5, -2.0]];
    for q in &outside {
        let p = smp_predict(&z, q, 0.0).unwrap().p_plus;
        ok &= p == 0.5;
        details.push_str(&format!("outside {q:?}: p={p}; "));
    }
    let inside = [[-0.8, -0.6], [-1.0, -1.0], [-0.5, -0.05]];
    for q in &inside {
        let p = smp_predict(&z, q, 0.0).unwrap().p_plus;
        ok &= p > 0.0 && p < 0.5;
        let mirror: Vec<f64> = q.iter().map(|v| -v).collect();
        let pm = smp_predict(&z, &mirror, 0.0).unwrap().p_plus;
        ok &= pm > 0.5 && pm < 1.0;
        details.push_str(&format!("cone {q:?}: p={p:.4}, mirror {pm:.4}; "));
    }

    // Extended-class MLE through the separation certificate: hard labels.
    let Separation::Separated { certificate, .. } = separation_check(&z).unwrap() else {
        panic!("training sample should be separated");
    };
    for q in inside.iter().chain(&outside) {
        let u = dot(&certificate, q);
        if u == 0.0 {
            continue;
        }
        let p: f64 = if u > 0.0 { 1.0 } else { 0.0 };
        ok &= p.max(1.0 - p) >= 1.0 - 1e-6;
    }
    details.push_str("mle saturated on all queries");
    report(8, "logistic SMP cone structure", ok, &details);
}

#[test]
fn criterion_09_logistic_ridge_ball_bound() {
    // Well-specified logistic data on the unit sphere with ||theta*|| = B =
    // 3, n = 200, lambda = 2R^2/(n+1); comparator is the best-in-ball
    // oracle from a large constrained fit. Both the n and n+1
    // normalizations of the bound are reported.
    let d = 3usize;
    let n = 200usize;
    let b = 3.0f64;
    let r = 1.0f64;
    let spec = GeneratorSpec::Logistic {
        theta: ThetaSpec::FillNorm { norm: b },
        design: DesignSpec::BoundedSphere { radius: r },
    };
    let gen = Generator::resolve(&spec, d).unwrap();
    let lambda = smp_core::logistic::ridge_smp_lambda_default(r, n);
    let theta_cmp = smp::estimator::best_in_ball(&gen, b, 1_000_000, 109).unwrap();
    let task = McTask {
        model: ModelKind::LogisticRidge,
        estimator: EstimatorKind::Smp,
        generator: &gen,
        n,
        lambda,
        x_eval: 128,
        comparator_theta: Some(theta_cmp.clone()),
    };
    let est = excess_risk_mc(&task, 5_000, 110).unwrap();
    let bound_n = ridge_smp_excess_bound(d, b, r, n);
    let bound_n1 = ridge_smp_excess_bound(d, b, r, n + 1);
    let ok = est.mean <= bound_n + 3.0 * est.std_err;
    report(
        9,
        "logistic ridge ball bound",
        ok,
        &format!(
            "excess {:.5e} (se {:.2e}) vs (e d + B^2 R^2)/n = {bound_n:.5e} and /(n+1) = {bound_n1:.5e}; \
             oracle norm {:.4}",
            est.mean,
            est.std_err,
            norm2(&theta_cmp)
        ),
    );
}

#[test]
fn criterion_10_property_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut ok = true;
    let mut details = String::new();

    // Sherman-Morrison identities at 1e-10 over 200 random SPD instances.
    let mut worst_sm: f64 = 0.0;
    for _ in 0..200 {
        let d = rng.random_range(1..=8usize);
        let mut a = vec![0.0; d * d];
        let g: Vec<f64> = (0..d * d).map(|_| StandardNormal.sample(&mut rng)).collect();
        for i in 0..d {
            for j in 0..d {
                let mut v = if i == j { 0.1 } else { 0.0 };
                for k in 0..d {
                    v += g[i * d + k] * g[j * d + k];
                }
                a[i * d + j] = v;
            }
        }
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let f = spd_factorize(&a, d).unwrap();
        let (h, gq) = f.sherman_morrison_leverage(&v).unwrap();
        worst_sm = worst_sm.max(((1.0 - h).recip() - (1.0 + gq)).abs() / (1.0 + gq));
    }
    ok &= worst_sm <= 1e-10;
    details.push_str(&format!("sherman-morrison worst rel {worst_sm:.2e}; "));

    // Gradient/Hessian finite differences at 1e-5 relative.
    let rows: Vec<Vec<f64>> = (0..6)
        .map(|_| (0..3).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let z = Matrix::from_rows(&rows, 3).unwrap();
    let theta: Vec<f64> = (0..3).map(|_| StandardNormal.sample(&mut rng)).collect();
    let (_, grad, hess) = logistic_objective(&theta, &z, 0.3);
    let h = 1e-5;
    let mut worst_fd: f64 = 0.0;
    for j in 0..3 {
        let mut tp = theta.clone();
        let mut tm = theta.clone();
        tp[j] += h;
        tm[j] -= h;
        let (vp, gp, _) = logistic_objective(&tp, &z, 0.3);
        let (vm, gm, _) = logistic_objective(&tm, &z, 0.3);
        let fd = (vp - vm) / (2.0 * h);
        worst_fd = worst_fd.max((grad[j] - fd).abs() / (1.0 + fd.abs()));
        for k in 0..3 {
            let fd2 = (gp[k] - gm[k]) / (2.0 * h);
            worst_fd = worst_fd.max((hess[j * 3 + k] - fd2).abs() / (1.0 + fd2.abs()));
        }
    }
    ok &= worst_fd <= 1e-5;
    details.push_str(&format!("finite differences worst rel {worst_fd:.2e}; "));

    // Stability inequalities on random ridge-logistic instances.
    for _ in 0..10 {
        let mut draw = |scale: f64| -> f64 {
            let v: f64 = StandardNormal.sample(&mut rng);
            scale * v
        };
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..4).map(|_| draw(0.5)).collect())
            .collect();
        let x: Vec<f64> = (0..4).map(|_| draw(0.5)).collect();
        let z = Matrix::from_rows(&rows, 4).unwrap();
        let r = z.iter_rows().map(norm2).fold(norm2(&x), f64::max);
        let lambda = 2.0 * r * r / 21.0;
        ok &= stability_check(&z, &x, lambda).is_ok();
    }
    details.push_str("stability inequalities hold; ");

    // Label-flip symmetry.
    for _ in 0..10 {
        let rows: Vec<Vec<f64>> = (0..8)
            .map(|_| (0..3).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let flipped: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
        let x: Vec<f64> = (0..3).map(|_| StandardNormal.sample(&mut rng)).collect();
        let z = Matrix::from_rows(&rows, 3).unwrap();
        let zf = Matrix::from_rows(&flipped, 3).unwrap();
        let p = smp_predict(&z, &x, 0.4).unwrap().p_plus;
        let pf = smp_predict(&zf, &x, 0.4).unwrap().p_plus;
        ok &= (p + pf - 1.0).abs() <= 1e-12;
    }
    details.push_str("label-flip symmetry holds; ");

    // Seed determinism: bit-identical estimates.
    let gen = point_mass_gen(4);
    let task = McTask {
        model: ModelKind::Multinomial,
        estimator: EstimatorKind::Smp,
        generator: &gen,
        n: 7,
        lambda: 0.0,
        x_eval: 1,
        comparator_theta: None,
    };
    let e1 = excess_risk_mc(&task, 200, 42).unwrap();
    let e2 = excess_risk_mc(&task, 200, 42).unwrap();
    let bit_equal = |a: &RiskEstimate, b: &RiskEstimate| {
        a.mean.to_bits() == b.mean.to_bits() && a.std_err.to_bits() == b.std_err.to_bits()
    };
    ok &= bit_equal(&e1, &e2);
    details.push_str("seed determinism bit-exact; ");

    // Degrees-of-freedom identities.
    let mut worst_df: f64 = 0.0;
    for _ in 0..25 {
        let d = rng.random_range(2..=8usize);
        let mut sigma = vec![0.0; d * d];
        let g: Vec<f64> = (0..d * d).map(|_| StandardNormal.sample(&mut rng)).collect();
        for i in 0..d {
            for j in 0..d {
                let mut v = 0.0;
                for k in 0..d {
                    v += g[i * d + k] * g[j * d + k];
                }
                sigma[i * d + j] = v;
            }
        }
        let trace: f64 = (0..d).map(|j| sigma[j * d + j]).sum();
        let mut prev = f64::INFINITY;
        for lambda in [0.1, 0.2, 0.5, 1.0, 2.0, 5.0] {
            let df = degrees_of_freedom(&sigma, d, lambda).unwrap();
            ok &= df <= d as f64 + 1e-10 && df <= trace / lambda + 1e-10 && df <= prev + 1e-10;
            prev = df;
            let quarter: Vec<f64> = sigma.iter().map(|v| v / 4.0).collect();
            let lhs = degrees_of_freedom(&sigma, d, 4.0 * lambda).unwrap();
            let rhs = degrees_of_freedom(&quarter, d, lambda).unwrap();
            worst_df = worst_df.max((lhs - rhs).abs() / (1.0 + lhs.abs()));
        }
    }
    ok &= worst_df <= 1e-10;
    details.push_str(&format!("df identities worst rel {worst_df:.2e}"));

    report(10, "property sweep", ok, &details);
}

//! Data generators with closed-form conditional moments.
//!
//! Every generator exposes the conditional mean and variance of `Y | X = x`
//! (or `P(Y = +1 | x)` for binary responses) analytically, so the Monte
//! Carlo loop never has to sample the response when evaluating risk: only
//! designs and training sets are random. Designs also expose their exact
//! second-moment matrix and, when bounded, their norm radius, which the
//! bound formulas need.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use smp_core::numerics::{dot, norm2, scalar::sigmoid, Matrix};

use crate::{HarnessError, Result};

/// Design (covariate) distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DesignSpec {
    /// Independent standard normal coordinates.
    StandardGaussian,
    /// Independent signs, optionally with per-axis scales. The norm of every
    /// draw is exactly the norm of the scale vector.
    Rademacher {
        #[serde(default)]
        scales: Option<ScaleSpec>,
    },
    /// Uniform on the sphere of the given radius, so `||X|| = radius`
    /// exactly and the covariance is `radius^2 / d` times the identity.
    BoundedSphere { radius: f64 },
    /// Finitely supported design.
    Custom {
        points: Vec<Vec<f64>>,
        weights: Vec<f64>,
    },
}

/// Per-axis scales, explicit or as the power law `scale_j = j^exponent`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScaleSpec {
    Values { values: Vec<f64> },
    Power { exponent: f64 },
}

/// The true parameter vector, explicit or filled as `norm * (1,..,1)/sqrt d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThetaSpec {
    Values { values: Vec<f64> },
    FillNorm { norm: f64 },
}

impl ThetaSpec {
    pub fn resolve(&self, d: usize) -> Result<Vec<f64>> {
        match self {
            Self::Values { values } => {
                if values.len() != d {
                    return Err(HarnessError::Config(format!(
                        "theta has {} entries but d = {d}",
                        values.len()
                    )));
                }
                Ok(values.clone())
            }
            Self::FillNorm { norm } => {
                let c = norm / (d as f64).sqrt();
                Ok(vec![c; d])
            }
        }
    }
}

/// Conditional law of `Y | X` around the linear mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    UnitGaussian,
    ScaledGaussian { variance: f64 },
    /// Student-t with `nu` degrees of freedom, rescaled to the requested
    /// variance (`nu > 2`).
    StudentT { nu: f64, variance: f64 },
    /// Gaussian with variance `base + slope * ||x||^2`.
    Heteroscedastic { base: f64, slope: f64 },
}

/// Probability vector for the multinomial family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProbSpec {
    Uniform,
    PointMass { index: usize },
    Values { values: Vec<f64> },
}

/// Mean vector for the location family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeanSpec {
    Fill { value: f64 },
    Values { values: Vec<f64> },
}

/// True covariance of the location family (the model always uses the
/// identity, so anything else is deliberate misspecification).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CovSpec {
    Identity,
    ScaledIdentity { scale: f64 },
    Diagonal { values: Vec<f64> },
}

/// Shape of the (unit-variance) location noise before covariance scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LocationShape {
    Gaussian,
    /// Student-t rescaled to unit variance (`nu > 2`).
    StudentT { nu: f64 },
}

/// Declarative generator description, the `generator` section of an
/// experiment config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    Multinomial {
        probs: ProbSpec,
    },
    GaussianLocation {
        mean: MeanSpec,
        covariance: CovSpec,
        shape: LocationShape,
    },
    LinearGaussian {
        theta: ThetaSpec,
        design: DesignSpec,
        noise: NoiseSpec,
    },
    Logistic {
        theta: ThetaSpec,
        design: DesignSpec,
    },
    /// Misspecified binary conditional: `P(Y=1|x) = high` on the positive
    /// side of the hyperplane through `theta`, `1 - high` on the other.
    MisLogistic {
        theta: ThetaSpec,
        design: DesignSpec,
        high: f64,
    },
}

#[derive(Debug, Clone)]
pub enum Design {
    StandardGaussian,
    Rademacher { scales: Vec<f64> },
    BoundedSphere { radius: f64 },
    Custom { points: Matrix, cumulative: Vec<f64> },
}

impl Design {
    fn resolve(spec: &DesignSpec, d: usize) -> Result<Self> {
        Ok(match spec {
            DesignSpec::StandardGaussian => Self::StandardGaussian,
            DesignSpec::Rademacher { scales } => {
                let scales = match scales {
                    None => vec![1.0; d],
                    Some(ScaleSpec::Values { values }) => {
                        if values.len() != d {
                            return Err(HarnessError::Config(format!(
                                "design scales have {} entries but d = {d}",
                                values.len()
                            )));
                        }
                        values.clone()
                    }
                    Some(ScaleSpec::Power { exponent }) => {
                        (1..=d).map(|j| (j as f64).powf(*exponent)).collect()
                    }
                };
                Self::Rademacher { scales }
            }
            DesignSpec::BoundedSphere { radius } => {
                if *radius <= 0.0 {
                    return Err(HarnessError::Config("sphere radius must be positive".into()));
                }
                Self::BoundedSphere { radius: *radius }
            }
            DesignSpec::Custom { points, weights } => {
                if points.is_empty() || points.len() != weights.len() {
                    return Err(HarnessError::Config(
                        "custom design needs matching nonempty points and weights".into(),
                    ));
                }
                let total: f64 = weights.iter().sum();
                if total <= 0.0 || weights.iter().any(|&w| w < 0.0) {
                    return Err(HarnessError::Config(
                        "custom design weights must be nonnegative with positive sum".into(),
                    ));
                }
                let points = Matrix::from_rows(points, d)?;
                if points.cols() != d {
                    return Err(HarnessError::Config(format!(
                        "custom design points have {} coordinates but d = {d}",
                        points.cols()
                    )));
                }
                let mut acc = 0.0;
                let cumulative = weights
                    .iter()
                    .map(|w| {
                        acc += w / total;
                        acc
                    })
                    .collect();
                Self::Custom { points, cumulative }
            }
        })
    }

    pub fn sample(&self, d: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            Self::StandardGaussian => (0..d).map(|_| StandardNormal.sample(rng)).collect(),
            Self::Rademacher { scales } => scales
                .iter()
                .map(|s| if rng.random::<bool>() { *s } else { -*s })
                .collect(),
            Self::BoundedSphere { radius } => loop {
                let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
                let norm = norm2(&v);
                if norm > 1e-12 {
                    break v.iter().map(|x| x * radius / norm).collect();
                }
            },
            Self::Custom { points, cumulative } => {
                let u: f64 = rng.random();
                let idx = cumulative.partition_point(|&c| c < u).min(points.rows() - 1);
                points.row(idx).to_vec()
            }
        }
    }

    /// Exact second-moment matrix `E[X X^T]`.
    pub fn covariance(&self, d: usize) -> Vec<f64> {
        let mut sigma = vec![0.0; d * d];
        match self {
            Self::StandardGaussian => {
                for j in 0..d {
                    sigma[j * d + j] = 1.0;
                }
            }
            Self::Rademacher { scales } => {
                for j in 0..d {
                    sigma[j * d + j] = scales[j] * scales[j];
                }
            }
            Self::BoundedSphere { radius } => {
                let v = radius * radius / d as f64;
                for j in 0..d {
                    sigma[j * d + j] = v;
                }
            }
            Self::Custom { points, cumulative } => {
                let mut prev = 0.0;
                for (i, &c) in cumulative.iter().enumerate() {
                    let w = c - prev;
                    prev = c;
                    let x = points.row(i);
                    for a in 0..d {
                        for b in 0..d {
                            sigma[a * d + b] += w * x[a] * x[b];
                        }
                    }
                }
            }
        }
        sigma
    }

    /// Almost-sure norm bound, when one exists.
    pub fn radius(&self, _d: usize) -> Option<f64> {
        match self {
            Self::StandardGaussian => None,
            Self::Rademacher { scales } => Some(norm2(scales)),
            Self::BoundedSphere { radius } => Some(*radius),
            Self::Custom { points, .. } => points
                .iter_rows()
                .map(norm2)
                .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v)))),
        }
    }
}

fn student_t_unit(nu: f64, rng: &mut ChaCha8Rng) -> f64 {
    // Standard t rescaled to unit variance; requires nu > 2.
    let t: f64 = StudentT::new(nu).expect("valid nu").sample(rng);
    t * ((nu - 2.0) / nu).sqrt()
}

#[derive(Debug, Clone)]
enum Kind {
    Multinomial {
        probs: Vec<f64>,
    },
    Location {
        mean: Vec<f64>,
        /// Per-coordinate standard deviations (diagonal true covariance).
        sd: Vec<f64>,
        student_nu: Option<f64>,
    },
    Linear {
        theta: Vec<f64>,
        design: Design,
        noise: NoiseSpec,
    },
    Logistic {
        theta: Vec<f64>,
        design: Design,
        mis_high: Option<f64>,
    },
}

/// A generator spec resolved at a concrete dimension.
#[derive(Debug, Clone)]
pub struct Generator {
    d: usize,
    kind: Kind,
}

impl Generator {
    pub fn resolve(spec: &GeneratorSpec, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(HarnessError::Config("d must be positive".into()));
        }
        let kind = match spec {
            GeneratorSpec::Multinomial { probs } => {
                let probs = match probs {
                    ProbSpec::Uniform => vec![1.0 / d as f64; d],
                    ProbSpec::PointMass { index } => {
                        if *index >= d {
                            return Err(HarnessError::Config(format!(
                                "point mass index {index} out of range for d = {d}"
                            )));
                        }
                        let mut p = vec![0.0; d];
                        p[*index] = 1.0;
                        p
                    }
                    ProbSpec::Values { values } => {
                        if values.len() != d {
                            return Err(HarnessError::Config(format!(
                                "probs have {} entries but d = {d}",
                                values.len()
                            )));
                        }
                        let sum: f64 = values.iter().sum();
                        if values.iter().any(|&p| p < 0.0) || (sum - 1.0).abs() > 1e-9 {
                            return Err(HarnessError::Config(
                                "probs must be nonnegative and sum to 1".into(),
                            ));
                        }
                        values.clone()
                    }
                };
                Kind::Multinomial { probs }
            }
            GeneratorSpec::GaussianLocation {
                mean,
                covariance,
                shape,
            } => {
                let mean = match mean {
                    MeanSpec::Fill { value } => vec![*value; d],
                    MeanSpec::Values { values } => {
                        if values.len() != d {
                            return Err(HarnessError::Config(format!(
                                "mean has {} entries but d = {d}",
                                values.len()
                            )));
                        }
                        values.clone()
                    }
                };
                let var = match covariance {
                    CovSpec::Identity => vec![1.0; d],
                    CovSpec::ScaledIdentity { scale } => vec![*scale; d],
                    CovSpec::Diagonal { values } => {
                        if values.len() != d {
                            return Err(HarnessError::Config(format!(
                                "covariance diagonal has {} entries but d = {d}",
                                values.len()
                            )));
                        }
                        values.clone()
                    }
                };
                if var.iter().any(|&v| v <= 0.0) {
                    return Err(HarnessError::Config("covariance must be positive".into()));
                }
                let student_nu = match shape {
                    LocationShape::Gaussian => None,
                    LocationShape::StudentT { nu } => {
                        if *nu <= 2.0 {
                            return Err(HarnessError::Config(
                                "student-t shape needs nu > 2".into(),
                            ));
                        }
                        Some(*nu)
                    }
                };
                Kind::Location {
                    mean,
                    sd: var.iter().map(|v| v.sqrt()).collect(),
                    student_nu,
                }
            }
            GeneratorSpec::LinearGaussian {
                theta,
                design,
                noise,
            } => {
                if let NoiseSpec::StudentT { nu, .. } = noise {
                    if *nu <= 2.0 {
                        return Err(HarnessError::Config("student-t noise needs nu > 2".into()));
                    }
                }
                Kind::Linear {
                    theta: theta.resolve(d)?,
                    design: Design::resolve(design, d)?,
                    noise: noise.clone(),
                }
            }
            GeneratorSpec::Logistic { theta, design } => Kind::Logistic {
                theta: theta.resolve(d)?,
                design: Design::resolve(design, d)?,
                mis_high: None,
            },
            GeneratorSpec::MisLogistic {
                theta,
                design,
                high,
            } => {
                if !(0.0..=1.0).contains(high) {
                    return Err(HarnessError::Config("high must lie in [0, 1]".into()));
                }
                Kind::Logistic {
                    theta: theta.resolve(d)?,
                    design: Design::resolve(design, d)?,
                    mis_high: Some(*high),
                }
            }
        };
        Ok(Self { d, kind })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn design(&self) -> Option<&Design> {
        match &self.kind {
            Kind::Linear { design, .. } | Kind::Logistic { design, .. } => Some(design),
            _ => None,
        }
    }

    pub fn theta_star(&self) -> Option<&[f64]> {
        match &self.kind {
            Kind::Linear { theta, .. } | Kind::Logistic { theta, .. } => Some(theta),
            _ => None,
        }
    }

    pub fn probs(&self) -> Option<&[f64]> {
        match &self.kind {
            Kind::Multinomial { probs } => Some(probs),
            _ => None,
        }
    }

    /// Per-symbol counts of `n` categorical draws.
    pub fn sample_counts(&self, n: usize, rng: &mut ChaCha8Rng) -> Vec<u64> {
        let Kind::Multinomial { probs } = &self.kind else {
            panic!("sample_counts on a non-multinomial generator");
        };
        let mut counts = vec![0u64; probs.len()];
        for _ in 0..n {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut idx = probs.len() - 1;
            for (j, &p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    idx = j;
                    break;
                }
            }
            counts[idx] += 1;
        }
        counts
    }

    /// Location-family observation: `mean + diag(sd) * xi` with unit-variance
    /// shape `xi`.
    pub fn sample_location(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let Kind::Location {
            mean,
            sd,
            student_nu,
        } = &self.kind
        else {
            panic!("sample_location on a non-location generator");
        };
        mean.iter()
            .zip(sd)
            .map(|(&m, &s)| {
                let xi: f64 = match student_nu {
                    None => StandardNormal.sample(rng),
                    Some(nu) => student_t_unit(*nu, rng),
                };
                m + s * xi
            })
            .collect()
    }

    /// Location mean vector.
    pub fn location_mean(&self) -> &[f64] {
        match &self.kind {
            Kind::Location { mean, .. } => mean,
            _ => panic!("location_mean on a non-location generator"),
        }
    }

    /// `tr(Sigma_Y)` of the location family (the model covariance is the
    /// identity, so this is the misspecification trace term).
    pub fn location_cov_trace(&self) -> f64 {
        match &self.kind {
            Kind::Location { sd, .. } => sd.iter().map(|s| s * s).sum(),
            _ => panic!("location_cov_trace on a non-location generator"),
        }
    }

    pub fn sample_x(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match &self.kind {
            Kind::Linear { design, .. } | Kind::Logistic { design, .. } => {
                design.sample(self.d, rng)
            }
            _ => panic!("sample_x on an unconditional generator"),
        }
    }

    /// Conditional mean `E[Y | X = x]` of the linear family.
    pub fn conditional_mean(&self, x: &[f64]) -> f64 {
        match &self.kind {
            Kind::Linear { theta, .. } => dot(theta, x),
            _ => panic!("conditional_mean on a non-linear generator"),
        }
    }

    /// Conditional variance of `Y | X = x` of the linear family.
    pub fn conditional_var(&self, x: &[f64]) -> f64 {
        match &self.kind {
            Kind::Linear { noise, .. } => match noise {
                NoiseSpec::UnitGaussian => 1.0,
                NoiseSpec::ScaledGaussian { variance } | NoiseSpec::StudentT { variance, .. } => {
                    *variance
                }
                NoiseSpec::Heteroscedastic { base, slope } => base + slope * dot(x, x),
            },
            _ => panic!("conditional_var on a non-linear generator"),
        }
    }

    pub fn sample_y_given(&self, x: &[f64], rng: &mut ChaCha8Rng) -> f64 {
        match &self.kind {
            Kind::Linear { theta, noise, .. } => {
                let mean = dot(theta, x);
                match noise {
                    NoiseSpec::UnitGaussian => {
                        let e: f64 = StandardNormal.sample(rng);
                        mean + e
                    }
                    NoiseSpec::ScaledGaussian { variance } => {
                        let e: f64 = StandardNormal.sample(rng);
                        mean + variance.sqrt() * e
                    }
                    NoiseSpec::StudentT { nu, variance } => {
                        mean + variance.sqrt() * student_t_unit(*nu, rng)
                    }
                    NoiseSpec::Heteroscedastic { base, slope } => {
                        let e: f64 = StandardNormal.sample(rng);
                        mean + (base + slope * dot(x, x)).sqrt() * e
                    }
                }
            }
            _ => panic!("sample_y_given on a non-linear generator"),
        }
    }

    /// `P(Y = +1 | X = x)` of the binary families.
    pub fn eta(&self, x: &[f64]) -> f64 {
        match &self.kind {
            Kind::Logistic {
                theta, mis_high, ..
            } => match mis_high {
                None => sigmoid(dot(theta, x)),
                Some(high) => {
                    if dot(theta, x) > 0.0 {
                        *high
                    } else {
                        1.0 - *high
                    }
                }
            },
            _ => panic!("eta on a non-binary generator"),
        }
    }

    /// Binary label in {-1, +1}.
    pub fn sample_label(&self, x: &[f64], rng: &mut ChaCha8Rng) -> f64 {
        let u: f64 = rng.random();
        if u < self.eta(x) {
            1.0
        } else {
            -1.0
        }
    }
}

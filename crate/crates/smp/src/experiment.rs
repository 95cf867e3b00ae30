//! Experiment configs, the grid runner, and the results format.
//!
//! Configs are strict JSON (unknown fields rejected, `schema` pinned to 1).
//! Results are CSV with a fixed versioned header; every run echoes its fully
//! resolved config into `#`-prefixed comment lines at the top of the output,
//! and floats are serialized with 17 significant digits so the file parses
//! back losslessly.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use smp_core::numerics::{dot, norm2, spd_factorize};

use crate::estimator::{
    best_in_ball, excess_risk_mc, supported, EstimatorKind, McTask, ModelKind,
};
use crate::generator::{Generator, GeneratorSpec};
use crate::mc::derive_seed;
use crate::{HarnessError, Result};

pub const RESULTS_VERSION: &str = "smp-results v1";
pub const RESULTS_HEADER: &str = "model,estimator,n,d,lambda,group,excess_risk_mean,excess_risk_stderr,bound,bound_satisfied,seed,wall_ms";

/// How many Monte Carlo standard errors of slack a bound check gets.
pub const BOUND_SLACK_SE: f64 = 3.0;

fn default_x_eval() -> usize {
    256
}

/// A full experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Config schema version; must be 1.
    pub schema: u32,
    pub model: ModelKind,
    pub estimators: Vec<EstimatorKind>,
    pub generator: GeneratorSpec,
    pub grid: GridSpec,
    pub replicates: usize,
    pub seed: u64,
    /// Output CSV path; stdout-only when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    /// Query points per replicate for conditional-risk evaluation.
    #[serde(default = "default_x_eval")]
    pub x_eval: usize,
    #[serde(default)]
    pub comparator: ComparatorSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: Vec<usize>,
    pub d: Vec<usize>,
    /// Penalty levels, as numbers or tuning-rule names ("cor5.3" is
    /// `2 R^2/(n+1)`, "prop4.4" is `d/(B^2 (n+1))`). Only ridge models take
    /// a lambda grid.
    #[serde(default)]
    pub lambda: Vec<LambdaSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaSpec {
    Value(f64),
    Rule(String),
}

/// Which comparator anchors the excess risk of the conditional models.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ComparatorSpec {
    /// The true parameter, or the penalized population optimum for the
    /// penalized linear model.
    #[default]
    Auto,
    ThetaStar,
    /// Best-in-ball oracle: a constrained logistic fit on a large fresh
    /// sample, cached per configuration.
    BestInBall { b: f64, oracle_samples: usize },
}

/// One results row.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub model: String,
    pub estimator: String,
    pub n: usize,
    pub d: usize,
    pub lambda: Option<f64>,
    pub group: u64,
    pub excess_risk_mean: f64,
    pub excess_risk_stderr: f64,
    pub bound: Option<f64>,
    pub bound_satisfied: Option<bool>,
    pub seed: u64,
    pub wall_ms: u64,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self =
            serde_json::from_str(text).map_err(|e| HarnessError::Config(format!("{e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != 1 {
            return Err(HarnessError::Config(format!(
                "unsupported schema {} (expected 1)",
                self.schema
            )));
        }
        if self.estimators.is_empty() {
            return Err(HarnessError::Config("estimators list is empty".into()));
        }
        for &est in &self.estimators {
            if !supported(self.model, est) {
                return Err(HarnessError::Config(format!(
                    "estimator {} is not defined for model {}",
                    est.label(),
                    self.model.label()
                )));
            }
        }
        if self.grid.n.is_empty() || self.grid.d.is_empty() {
            return Err(HarnessError::Config(
                "grid.n and grid.d must be nonempty".into(),
            ));
        }
        if self.model.needs_lambda() && self.grid.lambda.is_empty() {
            return Err(HarnessError::Config(format!(
                "model {} needs a lambda grid",
                self.model.label()
            )));
        }
        if !self.model.needs_lambda() && !self.grid.lambda.is_empty() {
            return Err(HarnessError::Config(format!(
                "model {} does not take a lambda grid",
                self.model.label()
            )));
        }
        if self.replicates == 0 {
            return Err(HarnessError::Config("replicates must be positive".into()));
        }
        if self.x_eval == 0 {
            return Err(HarnessError::Config("x_eval must be positive".into()));
        }
        Ok(())
    }
}

fn resolve_lambda(spec: &LambdaSpec, gen: &Generator, n: usize, d: usize) -> Result<f64> {
    match spec {
        LambdaSpec::Value(v) => {
            if *v <= 0.0 {
                return Err(HarnessError::Config(format!(
                    "lambda must be positive, got {v}"
                )));
            }
            Ok(*v)
        }
        LambdaSpec::Rule(rule) => match rule.as_str() {
            "cor5.3" => {
                let r = gen
                    .design()
                    .and_then(|design| design.radius(d))
                    .ok_or_else(|| {
                        HarnessError::Config("rule cor5.3 needs a bounded design radius".into())
                    })?;
                Ok(smp_core::logistic::ridge_smp_lambda_default(r, n))
            }
            "prop4.4" => {
                let theta = gen.theta_star().ok_or_else(|| {
                    HarnessError::Config("rule prop4.4 needs a true parameter".into())
                })?;
                let b = norm2(theta);
                if b == 0.0 {
                    return Err(HarnessError::Config(
                        "rule prop4.4 needs a nonzero true parameter".into(),
                    ));
                }
                Ok(smp_core::gaussian::ridge_log_norm_lambda(b, n, d))
            }
            other => Err(HarnessError::Config(format!(
                "unknown lambda rule {other:?} (expected \"cor5.3\" or \"prop4.4\")"
            ))),
        },
    }
}

/// Penalized population optimum `(Sigma + lambda I)^{-1} Sigma theta*` of the
/// ridge linear model.
fn penalized_optimum(gen: &Generator, lambda: f64) -> Result<Vec<f64>> {
    let d = gen.dim();
    let theta = gen
        .theta_star()
        .ok_or_else(|| HarnessError::Config("linear generator required".into()))?;
    let design = gen
        .design()
        .ok_or_else(|| HarnessError::Config("linear generator required".into()))?;
    let sigma = design.covariance(d);
    let mut shifted = sigma.clone();
    for j in 0..d {
        shifted[j * d + j] += lambda;
    }
    let rhs: Vec<f64> = (0..d)
        .map(|i| dot(&sigma[i * d..(i + 1) * d], theta))
        .collect();
    Ok(spd_factorize(&shifted, d)?.solve(&rhs)?)
}

fn resolve_comparator(
    config: &ExperimentConfig,
    gen: &Generator,
    lambda: f64,
    oracle_cache: &mut HashMap<(usize, u64, usize), Vec<f64>>,
) -> Result<Option<Vec<f64>>> {
    let model = config.model;
    if matches!(model, ModelKind::Multinomial | ModelKind::GaussianLocation) {
        return Ok(None);
    }
    match (&config.comparator, model) {
        (ComparatorSpec::Auto, ModelKind::RidgeLinear) => Ok(Some(penalized_optimum(gen, lambda)?)),
        (ComparatorSpec::Auto | ComparatorSpec::ThetaStar, _) => Ok(Some(
            gen.theta_star()
                .ok_or_else(|| HarnessError::Config("generator lacks a true parameter".into()))?
                .to_vec(),
        )),
        (
            ComparatorSpec::BestInBall { b, oracle_samples },
            ModelKind::Logistic | ModelKind::LogisticRidge,
        ) => {
            let key = (gen.dim(), b.to_bits(), *oracle_samples);
            if let Some(theta) = oracle_cache.get(&key) {
                return Ok(Some(theta.clone()));
            }
            let theta = best_in_ball(gen, *b, *oracle_samples, derive_seed(config.seed, 0xC0))?;
            oracle_cache.insert(key, theta.clone());
            Ok(Some(theta))
        }
        (ComparatorSpec::BestInBall { .. }, _) => Err(HarnessError::Config(
            "best_in_ball comparator is only defined for the logistic models".into(),
        )),
    }
}

/// Runs the whole grid. Rows come back in deterministic order with
/// per-group derived seeds, so a fixed config and seed reproduce the same
/// estimates bit for bit.
pub fn run_experiment(
    config: &ExperimentConfig,
    replicates_override: Option<usize>,
) -> Result<Vec<ResultRow>> {
    config.validate()?;
    let replicates = replicates_override.unwrap_or(config.replicates);
    let mut oracle_cache = HashMap::new();
    let mut rows = Vec::new();
    let mut group: u64 = 0;
    for &d in &config.grid.d {
        let gen = Generator::resolve(&config.generator, d)?;
        for &n in &config.grid.n {
            let lambdas: Vec<Option<f64>> = if config.model.needs_lambda() {
                config
                    .grid
                    .lambda
                    .iter()
                    .map(|spec| resolve_lambda(spec, &gen, n, d).map(Some))
                    .collect::<Result<_>>()?
            } else {
                vec![None]
            };
            for lambda in lambdas {
                let lambda_value = lambda.unwrap_or(0.0);
                for &estimator in &config.estimators {
                    let comparator_theta =
                        resolve_comparator(config, &gen, lambda_value, &mut oracle_cache)?;
                    let task = McTask {
                        model: config.model,
                        estimator,
                        generator: &gen,
                        n,
                        lambda: lambda_value,
                        x_eval: config.x_eval,
                        comparator_theta,
                    };
                    let seed = derive_seed(config.seed, group);
                    let start = Instant::now();
                    let estimate = excess_risk_mc(&task, replicates, seed)?;
                    let wall_ms = start.elapsed().as_millis() as u64;
                    rows.push(ResultRow {
                        model: config.model.label().to_string(),
                        estimator: estimator.label().to_string(),
                        n,
                        d,
                        lambda,
                        group,
                        excess_risk_mean: estimate.mean,
                        excess_risk_stderr: estimate.std_err,
                        bound: estimate.bound,
                        bound_satisfied: estimate.satisfies_bound(BOUND_SLACK_SE),
                        seed,
                        wall_ms,
                    });
                    group += 1;
                }
            }
        }
    }
    Ok(rows)
}

/// 17 significant digits: enough for a lossless f64 round trip.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn optional_float(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

/// Renders rows as the versioned CSV, echoing the resolved config into the
/// comment header.
pub fn results_to_csv(config_json: &str, rows: &[ResultRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {RESULTS_VERSION}");
    let _ = writeln!(out, "# config: {config_json}");
    let _ = writeln!(out, "{RESULTS_HEADER}");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.model,
            r.estimator,
            r.n,
            r.d,
            optional_float(r.lambda),
            r.group,
            format_float(r.excess_risk_mean),
            format_float(r.excess_risk_stderr),
            optional_float(r.bound),
            r.bound_satisfied.map(|b| b.to_string()).unwrap_or_default(),
            r.seed,
            r.wall_ms,
        );
    }
    out
}

fn parse_field<T: std::str::FromStr>(field: &str, row: usize, name: &str) -> Result<T> {
    field.parse().map_err(|_| HarnessError::DataParse {
        row,
        msg: format!("bad {name}: {field:?}"),
    })
}

fn parse_optional_f64(field: &str, row: usize, name: &str) -> Result<Option<f64>> {
    if field.is_empty() {
        Ok(None)
    } else {
        parse_field(field, row, name).map(Some)
    }
}

/// Parses a results CSV (comments skipped) back into rows.
pub fn parse_results_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    let mut saw_header = false;
    for (idx, line) in text.lines().enumerate() {
        let row = idx + 1;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !saw_header {
            if line != RESULTS_HEADER {
                return Err(HarnessError::DataParse {
                    row,
                    msg: format!("unexpected results header {line:?}"),
                });
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 12 {
            return Err(HarnessError::DataParse {
                row,
                msg: format!("expected 12 fields, got {}", fields.len()),
            });
        }
        rows.push(ResultRow {
            model: fields[0].to_string(),
            estimator: fields[1].to_string(),
            n: parse_field(fields[2], row, "n")?,
            d: parse_field(fields[3], row, "d")?,
            lambda: parse_optional_f64(fields[4], row, "lambda")?,
            group: parse_field(fields[5], row, "group")?,
            excess_risk_mean: parse_field(fields[6], row, "excess_risk_mean")?,
            excess_risk_stderr: parse_field(fields[7], row, "excess_risk_stderr")?,
            bound: parse_optional_f64(fields[8], row, "bound")?,
            bound_satisfied: match fields[9] {
                "" => None,
                "true" => Some(true),
                "false" => Some(false),
                other => {
                    return Err(HarnessError::DataParse {
                        row,
                        msg: format!("bad bound_satisfied: {other:?}"),
                    })
                }
            },
            seed: parse_field(fields[10], row, "seed")?,
            wall_ms: parse_field(fields[11], row, "wall_ms")?,
        });
    }
    if !saw_header {
        return Err(HarnessError::DataParse {
            row: 0,
            msg: "missing results header".into(),
        });
    }
    Ok(rows)
}

/// Human-readable summary table.
pub fn summary_table(rows: &[ResultRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<16} {:<18} {:>6} {:>4} {:>12} {:>13} {:>10} {:>13} {:>6}",
        "model", "estimator", "n", "d", "lambda", "excess", "stderr", "bound", "ok"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<16} {:<18} {:>6} {:>4} {:>12} {:>13.6e} {:>10.3e} {:>13} {:>6}",
            r.model,
            r.estimator,
            r.n,
            r.d,
            r.lambda
                .map(|l| format!("{l:.6e}"))
                .unwrap_or_else(|| "-".into()),
            r.excess_risk_mean,
            r.excess_risk_stderr,
            r.bound
                .map(|b| format!("{b:.6e}"))
                .unwrap_or_else(|| "-".into()),
            match r.bound_satisfied {
                Some(true) => "yes",
                Some(false) => "NO",
                None => "-",
            },
        );
    }
    out
}

/// Whether any row has a violated bound (beyond the Monte Carlo slack).
pub fn any_bound_violation(rows: &[ResultRow]) -> bool {
    rows.iter().any(|r| r.bound_satisfied == Some(false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::ProbSpec;

    fn tightness_config() -> ExperimentConfig {
        ExperimentConfig {
            schema: 1,
            model: ModelKind::Multinomial,
            estimators: vec![EstimatorKind::Smp],
            generator: GeneratorSpec::Multinomial {
                probs: ProbSpec::PointMass { index: 0 },
            },
            grid: GridSpec {
                n: vec![10, 50],
                d: vec![5],
                lambda: vec![],
            },
            replicates: 40,
            seed: 7,
            out: None,
            x_eval: default_x_eval(),
            comparator: ComparatorSpec::default(),
        }
    }

    #[test]
    fn config_round_trips() {
        let config = tightness_config();
        let text = serde_json::to_string_pretty(&config).unwrap();
        let back = ExperimentConfig::from_json(&text).unwrap();
        assert_eq!(back, config);
        // And the re-serialization agrees too.
        assert_eq!(
            serde_json::to_string(&back).unwrap(),
            serde_json::to_string(&config).unwrap()
        );
    }

    #[test]
    fn unknown_fields_rejected() {
        let mut value: serde_json::Value = serde_json::to_value(tightness_config()).unwrap();
        value["surprise"] = serde_json::json!(1);
        let text = serde_json::to_string(&value).unwrap();
        assert!(matches!(
            ExperimentConfig::from_json(&text),
            Err(HarnessError::Config(_))
        ));
    }

    #[test]
    fn empty_estimators_rejected() {
        let mut config = tightness_config();
        config.estimators.clear();
        assert!(matches!(config.validate(), Err(HarnessError::Config(_))));
    }

    #[test]
    fn lambda_grid_policy() {
        let mut config = tightness_config();
        config.grid.lambda = vec![LambdaSpec::Value(0.5)];
        assert!(matches!(config.validate(), Err(HarnessError::Config(_))));
    }

    #[test]
    fn tightness_rows_hit_the_bound_exactly() {
        let config = tightness_config();
        let rows = run_experiment(&config, None).unwrap();
        assert_eq!(rows.len(), 2);
        for row in &rows {
            let bound = row.bound.unwrap();
            assert!((row.excess_risk_mean - bound).abs() <= 1e-12);
            assert_eq!(row.bound_satisfied, Some(true));
        }
    }

    #[test]
    fn results_csv_round_trips() {
        let config = tightness_config();
        let rows = run_experiment(&config, Some(25)).unwrap();
        let json = serde_json::to_string(&config).unwrap();
        let csv = results_to_csv(&json, &rows);
        let back = parse_results_csv(&csv).unwrap();
        assert_eq!(back, rows);
        // The embedded config parses back too.
        let line = csv
            .lines()
            .find(|l| l.starts_with("# config: "))
            .unwrap()
            .trim_start_matches("# config: ");
        let parsed = ExperimentConfig::from_json(line).unwrap();
        assert_eq!(parsed, config);
    }

    #[test]
    fn lambda_rules_resolve() {
        use crate::generator::{DesignSpec, ThetaSpec};
        let gen = Generator::resolve(
            &GeneratorSpec::Logistic {
                theta: ThetaSpec::FillNorm { norm: 3.0 },
                design: DesignSpec::BoundedSphere { radius: 1.0 },
            },
            3,
        )
        .unwrap();
        let v = resolve_lambda(&LambdaSpec::Rule("cor5.3".into()), &gen, 199, 3).unwrap();
        assert!((v - 0.01).abs() < 1e-15);
        let v = resolve_lambda(&LambdaSpec::Rule("prop4.4".into()), &gen, 99, 3).unwrap();
        assert!((v - 3.0 / (9.0 * 100.0)).abs() < 1e-15);
        assert!(resolve_lambda(&LambdaSpec::Rule("nope".into()), &gen, 10, 3).is_err());
    }
}

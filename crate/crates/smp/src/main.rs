//! `smp`: experiment runner and fit/predict front end.
//!
//! Exit codes: 0 when all checked bounds hold, 2 when a measured excess risk
//! violates its bound beyond the Monte Carlo slack, 1 on operational errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use smp::estimator::ModelKind;
use smp::experiment::{
    any_bound_violation, parse_results_csv, results_to_csv, run_experiment, summary_table,
    ExperimentConfig,
};
use smp::io::{read_params, read_queries_csv, read_xy_csv, write_params, FitDiagnostics, FitParams};
use smp::mc::init_thread_pool;
use smp::{HarnessError, Result};
use smp_core::gaussian::{linear_smp_predict, ols_fit, ridge_fit, ridge_smp_predict_from};
use smp_core::logistic::{mle_fit, newton_fit, smp_predict, NEWTON_MAX_ITER, NEWTON_TOL};
use smp_core::numerics::scalar::sigmoid;
use smp_core::numerics::{dot, Matrix};

#[derive(Parser)]
#[command(name = "smp", version, about = "Sample-minmax predictive density estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run Monte Carlo excess-risk experiments from a JSON config.
    Experiment {
        #[command(subcommand)]
        command: ExperimentCommand,
    },
    /// Fit a conditional model to a training CSV and write parameters JSON.
    Fit(FitArgs),
    /// Predict at query points from fitted parameters (SMP predictions
    /// refit per query and therefore need the training CSV as well).
    Predict(PredictArgs),
}

#[derive(Subcommand)]
enum ExperimentCommand {
    Run {
        /// Experiment config (JSON, schema 1).
        #[arg(long)]
        config: PathBuf,
        /// Override the config's replicate count (e.g. for smoke runs).
        #[arg(long)]
        replicates_override: Option<usize>,
        /// Override the config's output CSV path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct FitArgs {
    /// One of: linear, ridge_linear, logistic, logistic_ridge.
    #[arg(long)]
    model: CliModel,
    /// Ridge penalty; required (positive) for the ridge models, forbidden
    /// otherwise.
    #[arg(long)]
    lambda: Option<f64>,
    /// Training CSV with header x1,..,xd,y.
    #[arg(long)]
    data: PathBuf,
    /// Output parameters JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    /// Parameters JSON produced by `smp fit`.
    #[arg(long)]
    params: PathBuf,
    /// Training CSV; required for SMP predictions.
    #[arg(long)]
    train: Option<PathBuf>,
    /// Query CSV with header x1,..,xd.
    #[arg(long)]
    queries: PathBuf,
    /// Output CSV (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// smp refits per query; plugin uses only the fitted parameter vector.
    #[arg(long, value_enum, default_value_t = PredictMode::Smp)]
    estimator: PredictMode,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum PredictMode {
    Smp,
    Plugin,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum CliModel {
    Linear,
    RidgeLinear,
    Logistic,
    LogisticRidge,
}

impl From<CliModel> for ModelKind {
    fn from(m: CliModel) -> Self {
        match m {
            CliModel::Linear => ModelKind::Linear,
            CliModel::RidgeLinear => ModelKind::RidgeLinear,
            CliModel::Logistic => ModelKind::Logistic,
            CliModel::LogisticRidge => ModelKind::LogisticRidge,
        }
    }
}

fn main() -> ExitCode {
    init_thread_pool();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Experiment {
            command:
                ExperimentCommand::Run {
                    config,
                    replicates_override,
                    out,
                },
        } => experiment_run(&config, replicates_override, out),
        Command::Fit(args) => {
            fit(&args)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Predict(args) => {
            predict(&args)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn experiment_run(
    config_path: &Path,
    replicates_override: Option<usize>,
    out_override: Option<PathBuf>,
) -> Result<ExitCode> {
    let text =
        std::fs::read_to_string(config_path).map_err(|e| HarnessError::io(config_path, e))?;
    let config = ExperimentConfig::from_json(&text)?;
    let rows = run_experiment(&config, replicates_override)?;
    let config_json = serde_json::to_string(&config)?;
    let csv = results_to_csv(&config_json, &rows);
    // Sanity: the results file must parse back.
    debug_assert!(parse_results_csv(&csv).is_ok());
    let out_path = out_override.or_else(|| config.out.clone().map(PathBuf::from));
    if let Some(path) = &out_path {
        std::fs::write(path, &csv).map_err(|e| HarnessError::io(path, e))?;
        println!("results written to {}", path.display());
    } else {
        print!("{csv}");
    }
    print!("{}", summary_table(&rows));
    if any_bound_violation(&rows) {
        eprintln!("bound violation: at least one measured excess exceeds its bound");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn fit(args: &FitArgs) -> Result<()> {
    let model: ModelKind = args.model.into();
    let (x, y) = read_xy_csv(&args.data)?;
    let lambda = match (model.needs_lambda(), args.lambda) {
        (true, Some(l)) if l > 0.0 => l,
        (true, _) => {
            return Err(HarnessError::Config(format!(
                "model {} requires --lambda > 0",
                model.label()
            )))
        }
        (false, None) => 0.0,
        (false, Some(_)) => {
            return Err(HarnessError::Config(format!(
                "model {} does not take --lambda",
                model.label()
            )))
        }
    };
    let params = match model {
        ModelKind::Linear => FitParams {
            schema: 1,
            model,
            lambda,
            theta: Some(ols_fit(&x, &y)?.theta),
            probs: None,
            mean: None,
            diagnostics: None,
        },
        ModelKind::RidgeLinear => FitParams {
            schema: 1,
            model,
            lambda,
            theta: Some(ridge_fit(&x, &y, lambda)?.theta),
            probs: None,
            mean: None,
            diagnostics: None,
        },
        ModelKind::Logistic | ModelKind::LogisticRidge => {
            let z = folded_sample(&x, &y)?;
            let fit = if model == ModelKind::LogisticRidge {
                newton_fit(&z, lambda, &vec![0.0; x.cols()], NEWTON_TOL, NEWTON_MAX_ITER)?
            } else {
                let fit = mle_fit(&z, NEWTON_TOL, NEWTON_MAX_ITER)?;
                if fit.separated {
                    return Err(HarnessError::Separation {
                        certificate: fit.theta,
                    });
                }
                fit
            };
            FitParams {
                schema: 1,
                model,
                lambda,
                theta: Some(fit.theta.clone()),
                probs: None,
                mean: None,
                diagnostics: Some(FitDiagnostics {
                    iterations: fit.iterations,
                    grad_norm: fit.grad_norm,
                    separated: fit.separated,
                }),
            }
        }
        _ => {
            return Err(HarnessError::Config(format!(
                "fit does not support model {}",
                model.label()
            )))
        }
    };
    write_params(&args.out, &params)?;
    println!("parameters written to {}", args.out.display());
    Ok(())
}

/// Folds labels into the sample: rows `z_i = -y_i x_i`, labels in {-1, +1}.
fn folded_sample(x: &Matrix, y: &[f64]) -> Result<Matrix> {
    let mut rows = Vec::with_capacity(x.rows());
    for (row, (xi, &yi)) in x.iter_rows().zip(y).enumerate() {
        if yi != 1.0 && yi != -1.0 {
            return Err(HarnessError::DataParse {
                row: row + 1,
                msg: format!("labels must be -1 or 1, got {yi}"),
            });
        }
        rows.push(xi.iter().map(|v| -yi * v).collect::<Vec<f64>>());
    }
    Ok(Matrix::from_rows(&rows, x.cols())?)
}

fn format_predictions(header: &str, rows: &[Vec<f64>]) -> String {
    use std::fmt::Write as _;
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        let fields: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        let _ = writeln!(out, "{}", fields.join(","));
    }
    out
}

fn predict(args: &PredictArgs) -> Result<()> {
    let params = read_params(&args.params)?;
    let queries = read_queries_csv(&args.queries)?;
    let model = params.model;
    let theta = params
        .theta
        .clone()
        .ok_or_else(|| HarnessError::Config("params carry no parameter vector".into()))?;
    if queries.cols() != theta.len() {
        return Err(HarnessError::Config(format!(
            "queries have {} features but the fit has {}",
            queries.cols(),
            theta.len()
        )));
    }
    let gaussian_output = matches!(model, ModelKind::Linear | ModelKind::RidgeLinear);

    let rows: Vec<Vec<f64>> = match args.estimator {
        PredictMode::Plugin => queries
            .iter_rows()
            .map(|q| {
                if gaussian_output {
                    vec![dot(&theta, q), 1.0]
                } else {
                    vec![sigmoid(dot(&theta, q))]
                }
            })
            .collect(),
        PredictMode::Smp => {
            let train_path = args
                .train
                .as_ref()
                .ok_or(HarnessError::MissingTrainingData)?;
            let (x, y) = read_xy_csv(train_path)?;
            if x.rows() > 0 && x.cols() != queries.cols() {
                return Err(HarnessError::Config(format!(
                    "training data has {} features but queries have {}",
                    x.cols(),
                    queries.cols()
                )));
            }
            match model {
                ModelKind::Linear => {
                    let fit = ols_fit(&x, &y)?;
                    queries
                        .iter_rows()
                        .map(|q| linear_smp_predict(&fit, q).map(|p| vec![p.mean, p.variance]))
                        .collect::<smp_core::Result<_>>()?
                }
                ModelKind::RidgeLinear => {
                    let fit = ridge_fit(&x, &y, params.lambda)?;
                    queries
                        .iter_rows()
                        .map(|q| ridge_smp_predict_from(&fit, q).map(|p| vec![p.mean, p.variance]))
                        .collect::<smp_core::Result<_>>()?
                }
                ModelKind::Logistic | ModelKind::LogisticRidge => {
                    let z = folded_sample(&x, &y)?;
                    queries
                        .iter_rows()
                        .map(|q| smp_predict(&z, q, params.lambda).map(|p| vec![p.p_plus]))
                        .collect::<smp_core::Result<_>>()?
                }
                _ => {
                    return Err(HarnessError::Config(format!(
                        "predict does not support model {}",
                        model.label()
                    )))
                }
            }
        }
    };
    let header = if gaussian_output { "mean,variance" } else { "p_plus" };
    let text = format_predictions(header, &rows);
    match &args.out {
        Some(path) => {
            std::fs::write(path, &text).map_err(|e| HarnessError::io(path, e))?;
            println!("predictions written to {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

//! Experiment harness around `smp-core`: data generators with closed-form
//! conditional moments, a deterministic seeded parallel Monte Carlo loop for
//! excess-risk estimation, and the JSON-config / CSV-results machinery the
//! `smp` binary is built on.

use std::path::PathBuf;

pub mod estimator;
pub mod experiment;
pub mod generator;
pub mod io;
pub mod mc;

pub use estimator::{EstimatorKind, ModelKind};
pub use generator::{Generator, GeneratorSpec};
pub use mc::{derive_seed, replicate_rng};

/// Errors of the harness and CLI layers.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] smp_core::Error),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("parse error at data row {row}: {msg}")]
    DataParse { row: usize, msg: String },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("no replicates requested")]
    EmptyEstimate,

    #[error("{failures} of {replicates} replicates failed (more than 1%); first failure: {first}")]
    TooManyFailures {
        failures: usize,
        replicates: usize,
        first: String,
    },

    #[error("SMP predictions need the training sample, not just the parameters; pass --train")]
    MissingTrainingData,

    #[error("refusing unpenalized logistic fit: sample is strictly linearly separated (certificate {certificate:?}); no finite MLE exists, use a ridge penalty")]
    Separation { certificate: Vec<f64> },
}

pub type Result<T> = std::result::Result<T, HarnessError>;

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}

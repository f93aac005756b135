//! Experiment runner for the k-cut simulator: configuration, seeded
//! parallel execution and result files.

// `!(x > 0.0)` rejects NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;

use thiserror::Error;

pub mod config;
pub mod output;
pub mod runner;

pub use config::{load_config, parse_config, Experiment, ExperimentConfig};
pub use runner::{run_experiment, RunOutput, Summary};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid config at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("json: {0}")]
    Json(String),

    #[error(transparent)]
    Core(#[from] kcut_core::Error),
}

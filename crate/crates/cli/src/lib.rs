//! Scenario runner: builds regions and sources from JSON configs, runs
//! sweeps and property checks, and writes results, CSV tables and a
//! manifest.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod builtin;
pub mod output;
pub mod refine;
pub mod runner;
pub mod scenario;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("solver failure in experiment {experiment}: {source}")]
    Solver {
        experiment: String,
        #[source]
        source: potentia::Error,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver { .. } => 3,
            CliError::Io { .. } => 4,
        }
    }

    /// Classifies a library error raised while running `experiment`.
    pub fn from_core(experiment: &str, e: potentia::Error) -> Self {
        if e.is_solver_failure() {
            CliError::Solver {
                experiment: experiment.to_string(),
                source: e,
            }
        } else {
            CliError::Config(format!("experiment {experiment}: {e}"))
        }
    }
}

//! Batch front end for the Mallows-distance lab: experiment configs,
//! deterministic runs with an ensemble cache, CSV/TSV artifacts and a
//! self-verification suite.

pub mod cache;
pub mod config;
pub mod runner;
pub mod verify;

use std::io;
use std::path::PathBuf;

use mallows_lab::LabError;
use thiserror::Error;

pub use config::{ConfigError, ExperimentConfig};
pub use runner::{run_experiment, RunOptions, RunSummary};
pub use verify::{verify_suite, Fixture, VerifyReport};

/// Build identifier, `v<version>-<git describe>`.
pub const BUILD_ID: &str = env!("MALLOWS_LAB_BUILD_ID");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Config {
        path: PathBuf,
        #[source]
        source: ConfigError,
    },

    #[error("{path}: cannot read config: {source}")]
    ConfigRead {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("invalid setting: {0}")]
    Setting(String),

    /// A model-level guard tripped: coupling tail mass, zero variance, or a
    /// non-finite local field.
    #[error("model guard: {0}")]
    Guard(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },

    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::ConfigRead { .. } | CliError::Setting(_) => 2,
            CliError::Guard(_) => 3,
            CliError::Io { .. } | CliError::Internal(_) => 1,
        }
    }

    pub fn io(context: impl Into<String>) -> impl FnOnce(io::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Io { context, source }
    }
}

impl From<LabError> for CliError {
    fn from(e: LabError) -> Self {
        match e {
            LabError::TailMass { .. } | LabError::ZeroVariance(_) | LabError::NonFiniteField { .. } => {
                CliError::Guard(e.to_string())
            }
            LabError::InvalidParameter(_)
            | LabError::Unsupported(_)
            | LabError::Domain(_)
            | LabError::VolumeTooLarge { .. } => CliError::Setting(e.to_string()),
            LabError::EmptySample | LabError::NonFinite { .. } => CliError::Internal(e.to_string()),
        }
    }
}

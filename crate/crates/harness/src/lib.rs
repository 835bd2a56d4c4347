//! Seeded simulation harness for probabilistic factorial designs.
//!
//! Each experiment turns a [`RunConfig`] into a list of [`ResultRow`]s, one
//! per fitted estimate. [`output::write_report`] stores them as CSV next to a
//! per-cell summary and a manifest of the resolved configuration.

pub mod config;
pub mod experiments;
pub mod output;
pub mod seeds;

pub use config::{Experiment, RunConfig, Strategy};
pub use experiments::{run, EmulateReport, Report};
pub use output::{ResultRow, SummaryRow};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Design(#[from] pfdesign::Error),

    #[error("configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    ConfigFile {
        path: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

pub(crate) fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(HarnessError::Config(msg.into()))
}

//! Experiment harness for `cart-core`: configuration, the sparsity
//! sweeps, the verification suites and CSV output.

pub mod checks;
pub mod config;
pub mod experiments;
pub mod models;
pub mod output;

pub use config::{ExperimentConfig, ExperimentKind};
pub use output::{Assertion, Report, Table};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] cart_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

//! Configuration, experiment orchestration and report output around `skl-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod lab;
pub mod output;
pub mod suite;

pub use config::ExperimentConfig;
pub use error::{RunError, RunResult};
pub use lab::Lab;
pub use output::{Artifacts, Criterion, Summary};
pub use suite::Subcommand;

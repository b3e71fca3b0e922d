//! Files, configuration, experiment orchestration and the command line for
//! [`relabel_core`].

pub mod benchmark;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod formats;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};

//! Batch drivers for the jtiv solvers: the synthetic benchmarks, dataset
//! fitting, masking, ablation and parameter sweeps.

pub mod commands;
pub mod config;
pub mod error;

pub use config::RunConfig;
pub use error::{CliError, CliResult};

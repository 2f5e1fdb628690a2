//! Config-driven experiments and their on-disk artifacts.

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{cmd_compare, cmd_diagnose, cmd_optimize, DiagnoseOptions};
pub use config::{ExperimentConfig, Overrides};

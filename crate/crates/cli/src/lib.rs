//! Experiment driver: configuration, training/certification/benchmark
//! commands, and the CSV formats they emit.

pub mod commands;
pub mod config;
pub mod curve;

pub use commands::{cmd_ablate, cmd_bench, cmd_certify, cmd_train};
pub use config::ExperimentConfig;

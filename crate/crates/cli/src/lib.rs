//! Experiment runner: flat configs, command implementations, the acceptance suite.

pub mod commands;
pub mod config;
pub mod output;
pub mod suite;
pub mod trials;

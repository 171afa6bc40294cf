//! Experiment driver for `scorelaw`: config parsing, replica orchestration,
//! artifact output and the acceptance suite.

pub mod artifacts;
pub mod config;
pub mod error;
pub mod experiment;

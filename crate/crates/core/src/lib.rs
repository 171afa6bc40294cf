//! Score-based population evolution and the N-interactions clique graph.
//!
//! The crate simulates a preferential-attachment population in which each
//! individual carries an integer score, together with a random graph whose
//! clique weights evolve the same way, and checks the resulting scale-free
//! limit laws against closed forms and exact expectation recursions.

pub mod acceptance;
pub mod analytic;
pub mod error;
pub mod graph;
pub mod histogram;
pub mod model_s;
pub mod sampler;
pub mod seed;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
pub use histogram::Histogram;

//! Branching random walks in random environment on Z^d: environment
//! model, return kernels, spectral radius, finite-horizon Bellman
//! iteration, Monte Carlo simulation and transience classification.

// Index loops read closer to the matrix algebra; negated float comparisons
// deliberately send NaN to the error branch.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod bellman;
pub mod classify;
pub mod cli;
pub mod config;
pub mod environment;
pub mod error;
pub mod kernel;
pub mod lattice;
mod linalg;
pub mod presets;
pub mod simulator;
pub mod spectral;

pub use error::Error;

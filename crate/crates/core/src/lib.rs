//! Random fields driven by coalescing ancestral lines on Z^d, their exact
//! second-order structure, and the operator-scaling Gaussian fields that
//! arise as their scaling limits.

pub mod cli;
pub mod error;
pub mod graph_field;
pub mod limit_field;
pub mod montecarlo;
pub mod q_engine;
pub mod quadrature;
pub mod regime;
pub mod rng;
pub mod special;
pub mod spectral_models;
pub mod stats;

pub use error::{Error, Result};
pub use spectral_models::{ExponentMatrix, SpectralModel};

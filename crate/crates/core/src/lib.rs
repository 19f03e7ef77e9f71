//! Stochastic unravellings of the free-particle spatial-decoherence master
//! equation.

// `!(a <= b)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod cli;
pub mod density;
pub mod ensemble;
pub mod error;
pub mod rng;
pub mod state;
pub mod stats;
pub mod transforms;
pub mod unravel;

pub use density::DensityMatrix;
pub use error::{Error, Result};

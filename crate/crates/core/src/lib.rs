//! Sampling-aware evaluation of gridded extreme precipitation.

// `!(x > 0.0)` deliberately rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod covariate;
pub mod error;
pub mod extremes;
pub mod field;
pub mod grid;
pub mod io;
pub mod metrics;
pub mod region;
pub mod remap;
pub mod rng;
pub mod sampling;
pub mod seasonal;
pub mod synth;
pub mod uncertainty;

pub use error::{Error, Result};

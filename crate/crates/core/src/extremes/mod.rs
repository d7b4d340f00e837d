//! Nonstationary GEV likelihood, maximum-likelihood fitting and return values.

mod fit;
mod gev;
mod optim;

pub use fit::{cell_observations, fit_cell, fit_cell_from, fit_field, FieldFit, FitOptions, FitStatus, GevFit};
pub use gev::{neg_loglik, return_value, GevParams, Observation, XI_EPS};

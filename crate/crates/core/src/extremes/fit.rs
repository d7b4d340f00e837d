//! Cellwise maximum-likelihood fitting of the trend GEV.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gev::{nll_grad, return_value, GevParams, Observation};
use super::optim::{minimize, BfgsOptions};
use crate::covariate::CovariateSeries;
use crate::error::{Error, Result};
use crate::rng::job_rng;
use crate::seasonal::YearSample;

const EULER_GAMMA: f64 = 0.5772;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    /// Minimum number of non-missing (year, replicate) observations.
    pub min_obs: usize,
    /// Jittered restarts tried after a non-converged first attempt.
    pub max_restarts: usize,
    /// Per-observation gradient tolerance on the standardized parameters.
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Seed for restart jitter.
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { min_obs: 10, max_restarts: 3, grad_tol: 1e-6, max_iter: 400, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Converged,
    NotConverged,
    /// Zero spread in the data; the likelihood is unbounded as sigma -> 0.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GevFit {
    pub params: GevParams,
    pub neg_loglik: f64,
    pub status: FitStatus,
    pub iterations: usize,
    pub n_effective: usize,
    /// Max-norm of the gradient over standardized parameters, per observation.
    pub grad_norm: f64,
}

impl GevFit {
    pub fn converged(&self) -> bool {
        self.status == FitStatus::Converged
    }
}

/// Location/scale used to standardize a cell's data before optimizing.
#[derive(Debug, Clone, Copy)]
struct Standardizer {
    y_mean: f64,
    y_sd: f64,
    x_mean: f64,
}

impl Standardizer {
    fn to_theta(self, p: &GevParams) -> [f64; 4] {
        let a1 = p.mu1 / self.y_sd;
        let a0 = (p.mu0 + p.mu1 * self.x_mean - self.y_mean) / self.y_sd;
        [a0, a1, (p.sigma / self.y_sd).ln(), p.xi]
    }

    fn to_params(self, t: &[f64; 4]) -> GevParams {
        let mu1 = self.y_sd * t[1];
        GevParams {
            mu0: self.y_mean + self.y_sd * t[0] - mu1 * self.x_mean,
            mu1,
            sigma: self.y_sd * t[2].exp(),
            xi: t[3],
        }
    }
}

/// Fit one cell, starting from Gumbel moment estimates.
pub fn fit_cell(obs: &[Observation], opts: &FitOptions) -> Result<GevFit> {
    fit_cell_from(obs, None, opts)
}

/// Fit one cell, optionally warm-started from `start` (falls back to the
/// moment start when `start` is infeasible for this sample).
pub fn fit_cell_from(obs: &[Observation], start: Option<&GevParams>, opts: &FitOptions) -> Result<GevFit> {
    let n = obs.len();
    if n < opts.min_obs.max(1) {
        return Err(Error::InsufficientData { got: n, need: opts.min_obs.max(1) });
    }
    let nf = n as f64;
    let y_mean = obs.iter().map(|o| o.y).sum::<f64>() / nf;
    let x_mean = obs.iter().map(|o| o.x).sum::<f64>() / nf;
    let y_sd = (obs.iter().map(|o| (o.y - y_mean).powi(2)).sum::<f64>() / nf).sqrt();
    if !(y_sd > 1e-12 * y_mean.abs().max(1e-300)) {
        return Ok(GevFit {
            params: GevParams { mu0: y_mean, mu1: 0.0, sigma: f64::MIN_POSITIVE, xi: 0.0 },
            neg_loglik: f64::NEG_INFINITY,
            status: FitStatus::Degenerate,
            iterations: 0,
            n_effective: n,
            grad_norm: f64::NAN,
        });
    }
    let st = Standardizer { y_mean, y_sd, x_mean };
    let scaled: Vec<Observation> = obs
        .iter()
        .map(|o| Observation { x: o.x - x_mean, y: (o.y - y_mean) / y_sd })
        .collect();
    let objective = |t: &[f64; 4]| nll_grad(t, &scaled);
    let bfgs = BfgsOptions { max_iter: opts.max_iter, grad_tol: opts.grad_tol * nf, max_step: 1.0 };

    let sigma0 = 6f64.sqrt() / std::f64::consts::PI;
    let moment_start = [-EULER_GAMMA * sigma0, 0.0, sigma0.ln(), 0.05];
    let first = start
        .map(|p| st.to_theta(p))
        .filter(|t| t.iter().all(|v| v.is_finite()) && objective(t).0.is_finite())
        .unwrap_or(moment_start);

    let mut best = minimize(objective, first, &bfgs);
    let mut iterations = best.iterations;
    if !best.converged {
        let mut rng = job_rng(opts.seed, &[0x5245_5354]);
        for _ in 0..opts.max_restarts {
            let jitter = [
                moment_start[0] + rng.random_range(-0.5..0.5),
                0.0,
                moment_start[2] + rng.random_range(-0.4..0.4),
                rng.random_range(-0.2..0.3),
            ];
            let r = minimize(objective, jitter, &bfgs);
            iterations += r.iterations;
            let better = match (r.converged, best.converged) {
                (true, false) => true,
                (false, true) => false,
                _ => r.f < best.f,
            };
            if better {
                best = r;
            }
            if best.converged {
                break;
            }
        }
    }
    Ok(GevFit {
        params: st.to_params(&best.x),
        neg_loglik: best.f + nf * y_sd.ln(),
        status: if best.converged { FitStatus::Converged } else { FitStatus::NotConverged },
        iterations,
        n_effective: n,
        grad_norm: best.grad_norm / nf,
    })
}

/// Non-missing observations of one cell, paired with their covariate values.
pub fn cell_observations(sample: &YearSample<'_>, cell: usize, covariate: &CovariateSeries) -> Result<Vec<Observation>> {
    sample
        .cell_values(cell)
        .map(|(year, y)| {
            covariate
                .value(year)
                .map(|x| Observation { x, y })
                .ok_or_else(|| Error::Input(format!("covariate has no value for season-year {year}")))
        })
        .collect()
}

/// Per-cell fits and return values for a whole field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldFit {
    /// `None` where the cell failed the data floor.
    pub fits: Vec<Option<GevFit>>,
    /// Return value per cell; `NaN` unless the fit converged.
    pub return_values: Vec<f64>,
    pub return_period: f64,
    pub xbar: f64,
}

impl FieldFit {
    pub fn n_converged(&self) -> usize {
        self.fits.iter().flatten().filter(|f| f.converged()).count()
    }

    pub fn n_failed(&self) -> usize {
        self.fits.iter().flatten().filter(|f| !f.converged()).count()
    }
}

/// Fit every cell independently and evaluate the `r`-year return value at
/// the covariate's baseline mean. `warm` optionally supplies per-cell starts.
pub fn fit_field(
    sample: &YearSample<'_>,
    covariate: &CovariateSeries,
    r: f64,
    opts: &FitOptions,
    warm: Option<&[Option<GevFit>]>,
) -> Result<FieldFit> {
    if !(r.is_finite() && r > 1.0) {
        return Err(Error::Input(format!("return period must exceed 1, got {r}")));
    }
    let n_cells = sample.series().grid().n_cells();
    if let Some(w) = warm {
        if w.len() != n_cells {
            return Err(Error::Alignment("warm-start fits do not match the grid".into()));
        }
    }
    let obs: Vec<Vec<Observation>> = (0..n_cells)
        .map(|c| cell_observations(sample, c, covariate))
        .collect::<Result<_>>()?;
    let xbar = covariate.xbar();
    let fits: Vec<Option<GevFit>> = obs
        .par_iter()
        .enumerate()
        .map(|(cell, o)| {
            let cell_opts = FitOptions { seed: crate::rng::derive_seed(opts.seed, &[cell as u64]), ..*opts };
            let start = warm.and_then(|w| w[cell].as_ref()).filter(|f| f.converged()).map(|f| f.params);
            fit_cell_from(o, start.as_ref(), &cell_opts).ok()
        })
        .collect();
    let return_values = fits
        .iter()
        .map(|f| match f {
            Some(f) if f.converged() => return_value(&f.params, r, xbar).unwrap_or(f64::NAN),
            _ => f64::NAN,
        })
        .collect();
    Ok(FieldFit { fits, return_values, return_period: r, xbar })
}

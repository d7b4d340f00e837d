//! GEV distribution with a linear location trend in a covariate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape values with `|xi| < XI_EPS` use the Gumbel limit.
pub const XI_EPS: f64 = 1e-6;

/// Climatological coefficients: location `mu0 + mu1 * x`, scale `sigma`, shape `xi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GevParams {
    pub mu0: f64,
    pub mu1: f64,
    pub sigma: f64,
    pub xi: f64,
}

/// One block maximum with the covariate value of its season.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub x: f64,
    pub y: f64,
}

impl GevParams {
    pub fn new(mu0: f64, mu1: f64, sigma: f64, xi: f64) -> Result<Self> {
        if !(mu0.is_finite() && mu1.is_finite() && xi.is_finite()) {
            return Err(Error::Input("GEV parameters must be finite".into()));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::Input(format!("GEV scale must be positive, got {sigma}")));
        }
        Ok(Self { mu0, mu1, sigma, xi })
    }

    /// Stationary GEV (no trend).
    pub fn stationary(mu: f64, sigma: f64, xi: f64) -> Result<Self> {
        Self::new(mu, 0.0, sigma, xi)
    }

    pub fn location(&self, x: f64) -> f64 {
        self.mu0 + self.mu1 * x
    }

    pub fn is_gumbel(&self) -> bool {
        self.xi.abs() < XI_EPS
    }

    /// `P(Y <= y)` at covariate value `x`.
    pub fn cdf(&self, y: f64, x: f64) -> f64 {
        let u = (y - self.location(x)) / self.sigma;
        if self.is_gumbel() {
            return (-(-u).exp()).exp();
        }
        let t = 1.0 + self.xi * u;
        if t <= 0.0 {
            return if self.xi > 0.0 { 0.0 } else { 1.0 };
        }
        (-(-t.ln() / self.xi).exp()).exp()
    }

    /// Inverse CDF at probability `p` in (0, 1), covariate value `x`.
    pub fn quantile(&self, p: f64, x: f64) -> f64 {
        let c = -p.ln();
        let mu = self.location(x);
        if self.is_gumbel() {
            mu - self.sigma * c.ln()
        } else {
            // mu - (sigma/xi) * (1 - c^-xi), written with expm1 for small xi
            mu + self.sigma * (-self.xi * c.ln()).exp_m1() / self.xi
        }
    }

    /// Upper end of the support (finite only for `xi < 0`).
    pub fn upper_bound(&self, x: f64) -> f64 {
        if self.is_gumbel() || self.xi > 0.0 {
            f64::INFINITY
        } else {
            self.location(x) - self.sigma / self.xi
        }
    }
}

/// The `r`-year return value at covariate level `xbar`: the `1 - 1/r` quantile.
pub fn return_value(params: &GevParams, r: f64, xbar: f64) -> Result<f64> {
    if !(r.is_finite() && r > 1.0) {
        return Err(Error::Input(format!("return period must exceed 1, got {r}")));
    }
    if !(params.sigma > 0.0) {
        return Err(Error::Input("GEV scale must be positive".into()));
    }
    Ok(params.quantile(1.0 - 1.0 / r, xbar))
}

/// Negative log-likelihood of the trend GEV; `+inf` outside the support.
pub fn neg_loglik(params: &GevParams, obs: &[Observation]) -> Result<f64> {
    if obs.is_empty() {
        return Err(Error::Input("no observations".into()));
    }
    if !(params.sigma > 0.0) {
        return Ok(f64::INFINITY);
    }
    let theta = [params.mu0, params.mu1, params.sigma.ln(), params.xi];
    Ok(nll_value(&theta, obs))
}

/// `(u/z - log1p(a)/xi) / xi` with `a = xi*u`, `z = 1 + a`, accurate as `xi -> 0`.
fn shape_term(xi: f64, u: f64, a: f64, z: f64, l: f64) -> f64 {
    if a.abs() < 0.05 {
        // u^2 * sum_{k>=1} (-1)^k k/(k+1) a^(k-1)
        let mut acc = 0.0;
        let mut pow = 1.0;
        for k in 1..=16 {
            let kf = k as f64;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * kf / (kf + 1.0) * pow;
            pow *= a;
        }
        u * u * acc
    } else {
        (u / z - l / xi) / xi
    }
}

/// Objective over `theta = (mu0, mu1, ln sigma, xi)`.
pub(crate) fn nll_value(theta: &[f64; 4], obs: &[Observation]) -> f64 {
    let [m0, m1, ls, xi] = *theta;
    let sigma = ls.exp();
    let mut total = 0.0;
    if xi.abs() < XI_EPS {
        for o in obs {
            let u = (o.y - m0 - m1 * o.x) / sigma;
            total += ls + u + (-u).exp();
        }
    } else {
        for o in obs {
            let a = xi * (o.y - m0 - m1 * o.x) / sigma;
            if a <= -1.0 {
                return f64::INFINITY;
            }
            let l = a.ln_1p();
            total += ls + (1.0 + 1.0 / xi) * l + (-l / xi).exp();
        }
    }
    if total.is_nan() { f64::INFINITY } else { total }
}

/// Objective and analytic gradient over `theta = (mu0, mu1, ln sigma, xi)`.
pub(crate) fn nll_grad(theta: &[f64; 4], obs: &[Observation]) -> (f64, [f64; 4]) {
    let [m0, m1, ls, xi] = *theta;
    let sigma = ls.exp();
    let gumbel = xi.abs() < XI_EPS;
    let mut f = 0.0;
    let mut g = [0.0; 4];
    for o in obs {
        let u = (o.y - m0 - m1 * o.x) / sigma;
        let (term, d_u, d_xi) = if gumbel {
            let e = (-u).exp();
            (ls + u + e, 1.0 - e, u - 0.5 * u * u * (1.0 - e))
        } else {
            let a = xi * u;
            if a <= -1.0 {
                return (f64::INFINITY, [f64::NAN; 4]);
            }
            let z = 1.0 + a;
            let l = a.ln_1p();
            let t = (-l / xi).exp();
            let h = shape_term(xi, u, a, z, l);
            (ls + (1.0 + 1.0 / xi) * l + t, (1.0 + xi - t) / z, h * (1.0 - t) + u / z)
        };
        f += term;
        g[0] -= d_u / sigma;
        g[1] -= d_u * o.x / sigma;
        g[2] += 1.0 - d_u * u;
        g[3] += d_xi;
    }
    if f.is_nan() || g.iter().any(|v| v.is_nan()) {
        return (f64::INFINITY, [f64::NAN; 4]);
    }
    (f, g)
}

//! Small dense BFGS minimizer with backtracking line search.

#[derive(Debug, Clone, Copy)]
pub(crate) struct BfgsOptions {
    pub max_iter: usize,
    /// Converged once the max-norm of the gradient drops to this value.
    pub grad_tol: f64,
    /// Largest allowed change of any coordinate in one step.
    pub max_step: f64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct BfgsResult<const N: usize> {
    pub x: [f64; N],
    pub f: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn max_norm<const N: usize>(v: &[f64; N]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot<const N: usize>(a: &[f64; N], b: &[f64; N]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn identity<const N: usize>() -> [[f64; N]; N] {
    let mut h = [[0.0; N]; N];
    for (i, row) in h.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    h
}

/// Minimize `f` (returning value and gradient) from `x0`. A start with a
/// non-finite objective returns immediately, unconverged.
pub(crate) fn minimize<const N: usize>(
    f: impl Fn(&[f64; N]) -> (f64, [f64; N]),
    x0: [f64; N],
    opts: &BfgsOptions,
) -> BfgsResult<N> {
    let mut x = x0;
    let (mut fx, mut g) = f(&x);
    if !fx.is_finite() {
        return BfgsResult { x, f: fx, grad_norm: f64::INFINITY, iterations: 0, converged: false };
    }
    let mut h = identity::<N>();
    let mut fresh = true;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        if max_norm(&g) <= opts.grad_tol {
            break;
        }
        iterations += 1;
        let mut d = [0.0; N];
        for i in 0..N {
            d[i] = -dot(&h[i], &g);
        }
        let mut slope = dot(&d, &g);
        if !(slope < 0.0) {
            // lost descent: fall back to steepest descent
            h = identity();
            for i in 0..N {
                d[i] = -g[i];
            }
            slope = dot(&d, &g);
            fresh = true;
        }
        let dn = max_norm(&d);
        let mut step = if dn > opts.max_step { opts.max_step / dn } else { 1.0 };
        let mut accepted = None;
        for _ in 0..60 {
            let mut xn = x;
            for i in 0..N {
                xn[i] += step * d[i];
            }
            let (fn_, gn) = f(&xn);
            if fn_.is_finite() && fn_ <= fx + 1e-4 * step * slope {
                accepted = Some((xn, fn_, gn));
                break;
            }
            step *= 0.5;
        }
        let Some((xn, fn_, gn)) = accepted else {
            if fresh {
                break;
            }
            h = identity();
            fresh = true;
            continue;
        };
        let mut s = [0.0; N];
        let mut y = [0.0; N];
        for i in 0..N {
            s[i] = xn[i] - x[i];
            y[i] = gn[i] - g[i];
        }
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if fresh {
                // scale the initial inverse Hessian to the observed curvature
                let scale = sy / dot(&y, &y);
                for (i, row) in h.iter_mut().enumerate() {
                    for (j, v) in row.iter_mut().enumerate() {
                        *v = if i == j { scale } else { 0.0 };
                    }
                }
            }
            let rho = 1.0 / sy;
            let mut hy = [0.0; N];
            for i in 0..N {
                hy[i] = dot(&h[i], &y);
            }
            let yhy = dot(&y, &hy);
            for i in 0..N {
                for j in 0..N {
                    h[i][j] += rho * ((1.0 + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
                }
            }
            fresh = false;
        }
        x = xn;
        fx = fn_;
        g = gn;
    }
    let grad_norm = max_norm(&g);
    BfgsResult { x, f: fx, grad_norm, iterations, converged: grad_norm <= opts.grad_tol }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |p: &[f64; 2]| {
            let (a, b) = (p[0], p[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = [-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            (v, g)
        };
        let r = minimize(f, [-1.2, 1.0], &BfgsOptions { max_iter: 500, grad_tol: 1e-9, max_step: 1.0 });
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn infinite_start_is_not_converged() {
        let f = |_: &[f64; 1]| (f64::INFINITY, [0.0]);
        let r = minimize(f, [0.0], &BfgsOptions { max_iter: 10, grad_tol: 1e-9, max_step: 1.0 });
        assert!(!r.converged);
    }
}

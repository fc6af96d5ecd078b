//! Quasi-Newton minimization with BFGS inverse-Hessian updates and an Armijo
//! backtracking line search.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub(crate) struct BfgsOptions {
    pub max_iterations: usize,
    pub rel_tol: f64,
    /// Converged once `|grad|_inf <= grad_tol * (1 + |f|)`.
    pub grad_tol: f64,
    pub max_resets: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct BfgsOutcome {
    pub x: DVector<f64>,
    /// Objective at the start and after every accepted step.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
/// A stalled line search is accepted as convergence below this scaled
/// gradient norm.
const STALL_GRAD_TOL: f64 = 1e-4;

pub(crate) fn minimize<F, G>(
    f: F,
    grad: G,
    x0: DVector<f64>,
    opts: BfgsOptions,
) -> Result<BfgsOutcome>
where
    F: Fn(&DVector<f64>) -> f64,
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    let n = x0.len();
    let mut x = x0;
    let mut fx = f(&x);
    if !fx.is_finite() {
        return Err(Error::InvalidInput(
            "objective is not finite at the start".into(),
        ));
    }
    let mut g = grad(&x);
    let mut h = DMatrix::<f64>::identity(n, n);
    let mut fresh = true;
    let mut trace = vec![fx];
    let mut resets = 0;
    let mut small_steps = 0;
    let scaled_norm = |g: &DVector<f64>, fx: f64| g.amax() / (1.0 + fx.abs());

    for iter in 0..opts.max_iterations {
        if scaled_norm(&g, fx) <= opts.grad_tol {
            return Ok(BfgsOutcome {
                x,
                trace,
                iterations: iter,
                converged: true,
            });
        }
        let mut d = -(&h * &g);
        let mut slope = g.dot(&d);
        if !(slope < 0.0) {
            h = DMatrix::identity(n, n);
            fresh = true;
            d = -g.clone();
            slope = g.dot(&d);
        }
        // keep the first step of a fresh approximation modest
        let mut step = if fresh {
            (1.0 / d.amax()).min(1.0)
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial = &x + &d * step;
            let ft = f(&trial);
            if ft.is_finite() && ft <= fx + ARMIJO_C1 * step * slope {
                accepted = Some((trial, ft));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            if scaled_norm(&g, fx) <= STALL_GRAD_TOL {
                return Ok(BfgsOutcome {
                    x,
                    trace,
                    iterations: iter,
                    converged: true,
                });
            }
            if fresh || resets >= opts.max_resets {
                return Err(Error::NonConvergence {
                    iterations: iter,
                    best_objective: fx,
                    best_point: x.iter().copied().collect(),
                });
            }
            resets += 1;
            h = DMatrix::identity(n, n);
            fresh = true;
            continue;
        };
        let g_new = grad(&x_new);
        let s = &x_new - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if fresh {
                h = DMatrix::identity(n, n) * (sy / y.dot(&y));
            }
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            // H+ = H - rho (H y s^T + s y^T H) + (rho^2 y^T H y + rho) s s^T
            h -= (&hy * s.transpose() + &s * hy.transpose()) * rho;
            h += (&s * s.transpose()) * (rho * rho * yhy + rho);
            fresh = false;
        }
        let rel = (fx - f_new).abs() / fx.abs().max(f64::MIN_POSITIVE);
        small_steps = if rel < opts.rel_tol {
            small_steps + 1
        } else {
            0
        };
        x = x_new;
        fx = f_new;
        g = g_new;
        trace.push(fx);
        if small_steps >= 5 && scaled_norm(&g, fx) <= STALL_GRAD_TOL {
            return Ok(BfgsOutcome {
                x,
                trace,
                iterations: iter + 1,
                converged: true,
            });
        }
    }
    let converged = scaled_norm(&g, fx) <= opts.grad_tol;
    Ok(BfgsOutcome {
        x,
        trace,
        iterations: opts.max_iterations,
        converged,
    })
}

/// Central finite-difference gradient with step `h_rel * (1 + |x_i|)`.
pub(crate) fn central_gradient<F>(f: &F, x: &DVector<f64>, h_rel: f64) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> f64,
{
    let mut g = DVector::zeros(x.len());
    let mut probe = x.clone();
    for i in 0..x.len() {
        let h = h_rel * (1.0 + x[i].abs());
        probe[i] = x[i] + h;
        let up = f(&probe);
        probe[i] = x[i] - h;
        let down = f(&probe);
        probe[i] = x[i];
        g[i] = (up - down) / (2.0 * h);
    }
    g
}

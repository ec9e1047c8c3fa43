//! Polak–Ribière conjugate gradient with a three-point quadratic line search,
//! shared by the DIA and full maximum-likelihood estimators.

use super::StopReason;

#[derive(Debug, Clone, Copy)]
pub(crate) struct CgSettings {
    /// First trial step as a fraction of ‖x‖ along the search direction;
    /// the second trial is twice as far.
    pub eta_prime: f64,
    pub xi: f64,
    pub max_iter: usize,
    /// Stop when the stationarity measure drops to this value.
    pub tol: f64,
    /// Stop when the relative cost change stays below this for
    /// [`STALL_WINDOW`] iterations.
    pub rel_tol: f64,
}

const STALL_WINDOW: usize = 5;
const MAX_HALVINGS: usize = 20;

/// Cost, gradient and stationarity at a point.
pub(crate) struct Eval {
    pub cost: f64,
    pub grad: Vec<f64>,
    pub stationarity: f64,
}

/// Per-iteration callback: (iteration, x, cost, step length, stationarity).
pub(crate) type Observer<'a> = &'a mut dyn FnMut(usize, &[f64], f64, f64, f64);

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(x: &[f64], t: f64, h: &[f64]) -> Vec<f64> {
    x.iter().zip(h).map(|(a, b)| a + t * b).collect()
}

/// Quadratic through (0, c0), (τ, c1), (2τ, c2); returns its minimizer when
/// the curvature is positive.
fn quadratic_minimizer(tau: f64, c0: f64, c1: f64, c2: f64) -> Option<f64> {
    let a = (c2 - 2.0 * c1 + c0) / (2.0 * tau * tau);
    let b = (4.0 * c1 - c2 - 3.0 * c0) / (2.0 * tau);
    (a > 0.0).then(|| -b / (2.0 * a))
}

/// Returns (step, cost) of an accepted point with cost below `c0`.
fn line_search(
    x: &[f64],
    h: &[f64],
    c0: f64,
    mut tau: f64,
    cost: &mut dyn FnMut(&[f64]) -> f64,
) -> Option<(f64, f64)> {
    for _ in 0..=MAX_HALVINGS {
        let c1 = cost(&axpy(x, tau, h));
        let c2 = cost(&axpy(x, 2.0 * tau, h));
        let mut best = (0.0, c0);
        for cand in [(tau, c1), (2.0 * tau, c2)] {
            if cand.1 < best.1 {
                best = cand;
            }
        }
        if let Some(eta) = quadratic_minimizer(tau, c0, c1, c2) {
            // Extrapolate at most to twice the far trial point.
            if eta > 0.0 && eta <= 4.0 * tau && eta != tau && eta != 2.0 * tau {
                let c = cost(&axpy(x, eta, h));
                if c < best.1 {
                    best = (eta, c);
                }
            }
        }
        if best.0 > 0.0 && best.1.is_finite() {
            return Some(best);
        }
        tau *= 0.5;
    }
    None
}

/// Minimizes from `x0`; returns the final point, stop reason and the number
/// of iterations taken.
pub(crate) fn conjugate_gradient(
    x0: Vec<f64>,
    settings: CgSettings,
    cost: &mut dyn FnMut(&[f64]) -> f64,
    eval: &mut dyn FnMut(&[f64]) -> Eval,
    observe: Observer<'_>,
) -> (Vec<f64>, StopReason, usize) {
    let mut x = x0;
    let mut e = eval(&x);
    observe(0, &x, e.cost, 0.0, e.stationarity);
    if e.stationarity <= settings.tol {
        return (x, StopReason::Converged, 0);
    }
    let mut h: Vec<f64> = e.grad.iter().map(|g| -g).collect();
    let mut last_move: Option<f64> = None;
    let mut stalled = 0usize;
    for n in 1..=settings.max_iter {
        let h_norm = norm(&h);
        if h_norm == 0.0 {
            return (x, StopReason::Converged, n - 1);
        }
        // First trial: a fraction of ‖x‖, or the last accepted move length.
        let scale = norm(&x).max(1e-12);
        let mut tau = settings.eta_prime * scale / h_norm;
        if let Some(len) = last_move {
            tau = tau.min(len / h_norm);
        }
        let Some((step, c_new)) = line_search(&x, &h, e.cost, tau, cost) else {
            return (x, StopReason::LineSearchFailed, n - 1);
        };
        x = axpy(&x, step, &h);
        last_move = Some(step * h_norm);
        let c_old = e.cost;
        let g_old = std::mem::take(&mut e.grad);
        e = eval(&x);
        debug_assert!((e.cost - c_new).abs() <= 1e-9 * c_new.abs().max(1.0));
        observe(n, &x, e.cost, step * h_norm, e.stationarity);
        if e.stationarity <= settings.tol {
            return (x, StopReason::Converged, n);
        }
        if (c_old - e.cost).abs() <= settings.rel_tol * c_old.abs().max(1.0) {
            stalled += 1;
            if stalled >= STALL_WINDOW {
                return (x, StopReason::CostStalled, n);
            }
        } else {
            stalled = 0;
        }
        let denom = dot(&g_old, &g_old);
        let num: f64 = e.grad.iter().zip(&g_old).map(|(g, go)| g * (g - settings.xi * go)).sum();
        let gamma = if denom > 0.0 { (num / denom).max(0.0) } else { 0.0 };
        let mut h_new: Vec<f64> = e.grad.iter().zip(&h).map(|(g, hp)| -g + gamma * hp).collect();
        if dot(&h_new, &e.grad) >= 0.0 {
            // Not a descent direction: restart along the gradient.
            h_new = e.grad.iter().map(|g| -g).collect();
        }
        h = h_new;
    }
    (x, StopReason::MaxIterations, settings.max_iter)
}

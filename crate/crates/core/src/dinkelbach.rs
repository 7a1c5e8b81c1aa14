//! Dinkelbach's method for `min a(x)/b(x)` with `a` convex and `b` positive concave.
//!
//! Each outer step fixes `θ_k = a(x_k)/b(x_k)` and asks a parametric solver
//! for the global minimizer of `a(x) − θ_k·b(x)`. The iteration stops once
//! that minimum is (numerically) zero.

use crate::error::Result;

pub const DEFAULT_TOL: f64 = 1e-7;
pub const DEFAULT_MAX_ITER: usize = 100;

#[derive(Debug, Clone)]
pub struct DinkelbachState<X> {
    /// `a(iterate)/b(iterate)`
    pub theta: f64,
    pub iterate: X,
    /// `a(x_{k+1}) − θ_k·b(x_{k+1})` of the last parametric solve.
    pub residual: f64,
    /// Parametric solves performed.
    pub iter: usize,
    pub converged: bool,
    /// `θ_k` for every outer step, starting with the initial point.
    pub thetas: Vec<f64>,
}

/// Runs Dinkelbach iterations from `x0`.
///
/// `parametric(θ, x_k)` must return a global minimizer of `a − θ·b`;
/// `ratio_parts(x)` returns `(a(x), b(x))` with `b(x) > 0`. The returned
/// iterate is never worse than `x0`. Hitting `max_iter` is reported through
/// `converged = false` rather than an error.
pub fn dinkelbach<X, P, E>(
    mut parametric: P,
    ratio_parts: E,
    x0: X,
    tol: f64,
    max_iter: usize,
) -> Result<DinkelbachState<X>>
where
    P: FnMut(f64, &X) -> Result<X>,
    E: Fn(&X) -> Result<(f64, f64)>,
{
    let (a0, b0) = ratio_parts(&x0)?;
    let mut state = DinkelbachState {
        theta: a0 / b0,
        iterate: x0,
        residual: f64::NAN,
        iter: 0,
        converged: false,
        thetas: vec![a0 / b0],
    };
    while state.iter < max_iter {
        let candidate = parametric(state.theta, &state.iterate)?;
        state.iter += 1;
        let (a, b) = ratio_parts(&candidate)?;
        let residual = a - state.theta * b;
        state.residual = residual;
        if residual.abs() <= tol || residual >= 0.0 {
            if residual < 0.0 {
                state.theta = a / b;
                state.iterate = candidate;
                state.thetas.push(state.theta);
            }
            state.converged = true;
            break;
        }
        state.theta = a / b;
        state.iterate = candidate;
        state.thetas.push(state.theta);
    }
    Ok(state)
}

use web_time::Instant;

use super::krylov::{norm, SolveReport};
use super::{solve_linear, LinearSolverConfig};
use crate::error::{invalid, Result};
use crate::operators::DgOperator;

/// Consecutive residual increases after which Newton gives up.
const GROWTH_LIMIT: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub linear: LinearSolverConfig,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 20,
            linear: LinearSolverConfig {
                tol: 1e-12,
                ..LinearSolverConfig::default()
            },
        }
    }
}

/// A nonlinear residual together with a solver for its linearization.
pub(crate) trait NewtonProblem {
    /// `A(u)`.
    fn evaluate(&mut self, u: &[f64]) -> Result<Vec<f64>>;
    /// Solves `A'(u) du = r`.
    fn correction(&mut self, u: &[f64], r: &[f64]) -> Result<Vec<f64>>;
}

struct Discrete<'a> {
    op: &'a mut DgOperator,
    linear: LinearSolverConfig,
}

impl NewtonProblem for Discrete<'_> {
    fn evaluate(&mut self, u: &[f64]) -> Result<Vec<f64>> {
        self.op.apply_nonlinear(u)
    }

    fn correction(&mut self, u: &[f64], r: &[f64]) -> Result<Vec<f64>> {
        self.op.set_linearization_point(u)?;
        Ok(solve_linear(self.op, r, &self.linear)?.0)
    }
}

/// Undamped Newton-Raphson for `A(u) = b`, where `A` includes nonlinear
/// sources and boundary data. The residual is measured relative to `‖b‖`,
/// or to the initial residual when `b = 0`. On return the linearization
/// point is the final iterate.
pub fn solve_newton(
    op: &mut DgOperator,
    b: &[f64],
    u0: &[f64],
    config: &NewtonConfig,
) -> Result<(Vec<f64>, SolveReport)> {
    let n = op.n_primal_dofs();
    if b.len() != n || u0.len() != n {
        return invalid(format!("Newton needs vectors of length {n}"));
    }
    let mut problem = Discrete {
        op,
        linear: config.linear,
    };
    let (u, report) = newton(&mut problem, b, u0, config.tol, config.max_iter)?;
    problem.op.set_linearization_point(&u)?;
    Ok((u, report))
}

pub(crate) fn newton(
    problem: &mut dyn NewtonProblem,
    b: &[f64],
    u0: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    if b.len() != u0.len() {
        return invalid("Newton right-hand side and guess differ in length");
    }
    if !(tol > 0.0) {
        return invalid(format!("Newton tolerance must be positive, got {tol}"));
    }
    let start = Instant::now();
    let residual = |a: Vec<f64>| -> Vec<f64> { b.iter().zip(&a).map(|(b, a)| b - a).collect() };
    let mut u = u0.to_vec();
    let mut r = residual(problem.evaluate(&u)?);
    let r0 = norm(&r);
    let b_norm = norm(b);
    let scale = if b_norm > 0.0 {
        b_norm
    } else if r0 > 0.0 {
        r0
    } else {
        1.0
    };
    let mut history = vec![r0 / scale];
    let mut iterations = 0;
    let mut growth = 0;
    while history[iterations] > tol && iterations < max_iter && growth < GROWTH_LIMIT {
        let du = problem.correction(&u, &r)?;
        for (u, d) in u.iter_mut().zip(&du) {
            *u += d;
        }
        r = residual(problem.evaluate(&u)?);
        iterations += 1;
        let rel = norm(&r) / scale;
        growth = if rel > history[iterations - 1] { growth + 1 } else { 0 };
        history.push(rel);
    }
    let residual = history[iterations];
    Ok((
        u,
        SolveReport {
            iterations,
            residual,
            converged: residual <= tol,
            wall_time: start.elapsed(),
            history,
        },
    ))
}

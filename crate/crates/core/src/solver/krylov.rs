use std::time::Duration;

use web_time::Instant;

use crate::error::{invalid, Result};

/// A square linear map given only through its action.
pub trait LinearOperator: Sync {
    fn size(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>>;
}

/// Approximate inverse applied to a residual.
pub trait Preconditioner: Sync {
    fn apply(&self, r: &[f64]) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        Ok(r.to_vec())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Final residual, relative to the right-hand side norm.
    pub residual: f64,
    pub converged: bool,
    pub wall_time: Duration,
    /// Relative residual after each iteration, starting with the initial one.
    pub history: Vec<f64>,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (y, x) in y.iter_mut().zip(x) {
        *y += alpha * x;
    }
}

fn residual(op: &dyn LinearOperator, x: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let ax = op.apply(x)?;
    Ok(b.iter().zip(&ax).map(|(b, a)| b - a).collect())
}

fn check(op: &dyn LinearOperator, b: &[f64], x0: &[f64], tol: f64) -> Result<()> {
    if b.len() != op.size() || x0.len() != op.size() {
        return invalid(format!(
            "operator of size {} applied to vectors of length {} and {}",
            op.size(),
            b.len(),
            x0.len()
        ));
    }
    if !(tol > 0.0) {
        return invalid(format!("tolerance must be positive, got {tol}"));
    }
    Ok(())
}

/// Restarted GMRES with modified Gram-Schmidt, Givens rotations and right
/// preconditioning. Converges when `‖b − A x‖ ≤ tol ‖b‖`.
pub fn gmres(
    op: &dyn LinearOperator,
    b: &[f64],
    x0: &[f64],
    tol: f64,
    max_iter: usize,
    restart: usize,
    preconditioner: &dyn Preconditioner,
) -> Result<(Vec<f64>, SolveReport)> {
    check(op, b, x0, tol)?;
    if restart == 0 {
        return invalid("GMRES restart length must be positive");
    }
    let start = Instant::now();
    let b_norm = norm(b);
    let mut x = x0.to_vec();
    if b_norm == 0.0 && x.iter().all(|&v| v == 0.0) {
        return Ok((
            x,
            SolveReport {
                iterations: 0,
                residual: 0.0,
                converged: true,
                wall_time: start.elapsed(),
                history: vec![0.0],
            },
        ));
    }
    let scale = if b_norm > 0.0 { b_norm } else { 1.0 };
    let mut r = residual(op, &x, b)?;
    let mut beta = norm(&r);
    let mut history = vec![beta / scale];
    let mut iterations = 0;
    while beta / scale > tol && iterations < max_iter {
        let m = restart.min(max_iter - iterations);
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut z_store: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut k = 0;
        while k < m {
            let z = preconditioner.apply(&basis[k])?;
            let mut w = op.apply(&z)?;
            z_store.push(z);
            for (j, q) in basis.iter().enumerate() {
                h[j][k] = dot(&w, q);
                axpy(-h[j][k], q, &mut w);
            }
            let next_norm = norm(&w);
            h[k + 1][k] = next_norm;
            for j in 0..k {
                let t = cs[j] * h[j][k] + sn[j] * h[j + 1][k];
                h[j + 1][k] = -sn[j] * h[j][k] + cs[j] * h[j + 1][k];
                h[j][k] = t;
            }
            let denom = h[k][k].hypot(h[k + 1][k]);
            if denom == 0.0 {
                break;
            }
            cs[k] = h[k][k] / denom;
            sn[k] = h[k + 1][k] / denom;
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            // an invariant Krylov space means the solution is exact
            let lucky = next_norm <= 1e-14 * denom;
            if !lucky {
                basis.push(w.iter().map(|v| v / next_norm).collect());
            }
            k += 1;
            iterations += 1;
            history.push(g[k].abs() / scale);
            if g[k].abs() / scale <= tol || lucky {
                break;
            }
        }
        // back substitution on the k×k triangle
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        for (yi, z) in y.iter().zip(&z_store) {
            axpy(*yi, z, &mut x);
        }
        r = residual(op, &x, b)?;
        let new_beta = norm(&r);
        let stagnated = new_beta >= beta;
        beta = new_beta;
        if let Some(last) = history.last_mut() {
            *last = beta / scale;
        }
        if stagnated {
            break;
        }
    }
    let residual = beta / scale;
    Ok((
        x,
        SolveReport {
            iterations,
            residual,
            converged: residual <= tol,
            wall_time: start.elapsed(),
            history,
        },
    ))
}

/// Conjugate gradients for symmetric positive-definite operators.
pub fn cg(
    op: &dyn LinearOperator,
    b: &[f64],
    x0: &[f64],
    tol: f64,
    max_iter: usize,
    preconditioner: &dyn Preconditioner,
) -> Result<(Vec<f64>, SolveReport)> {
    check(op, b, x0, tol)?;
    let start = Instant::now();
    let b_norm = norm(b);
    let scale = if b_norm > 0.0 { b_norm } else { 1.0 };
    let mut x = x0.to_vec();
    let mut r = residual(op, &x, b)?;
    let mut history = vec![norm(&r) / scale];
    let mut z = preconditioner.apply(&r)?;
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut iterations = 0;
    while history[iterations] > tol && iterations < max_iter {
        let ap = op.apply(&p)?;
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        iterations += 1;
        history.push(norm(&r) / scale);
        z = preconditioner.apply(&r)?;
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (p, z) in p.iter_mut().zip(&z) {
            *p = z + beta * *p;
        }
    }
    // report the true residual rather than the recursive one
    let residual = norm(&residual(op, &x, b)?) / scale;
    Ok((
        x,
        SolveReport {
            iterations,
            residual,
            converged: residual <= tol,
            wall_time: start.elapsed(),
            history,
        },
    ))
}

//! Matrix-free Krylov solves, explicit assembly, Schur elimination and
//! Newton-Raphson iteration.

mod assembly;
mod krylov;
mod newton;
mod precondition;


pub use assembly::{
    assemble_explicit, color_elements, schur_eliminate, DofOrdering, ExplicitMatrix, DEFAULT_ASSEMBLY_CAP,
};
pub use krylov::{cg, gmres, IdentityPreconditioner, LinearOperator, Preconditioner, SolveReport};
pub use newton::{solve_newton, NewtonConfig};
pub use precondition::BlockJacobi;

use crate::error::{DgError, Result};
use crate::operators::{DgOperator, Form};

impl LinearOperator for DgOperator {
    fn size(&self) -> usize {
        self.n_primal_dofs()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        DgOperator::apply(self, x)
    }
}

/// The first-order operator over `(v, u)` as a linear map.
pub struct FirstOrder<'a>(pub &'a DgOperator);

impl LinearOperator for FirstOrder<'_> {
    fn size(&self) -> usize {
        self.0.n_auxiliary_dofs() + self.0.n_primal_dofs()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.0.apply_first_order(x)
    }
}

impl LinearOperator for ExplicitMatrix {
    fn size(&self) -> usize {
        self.rows
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.matvec(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LinearMethod {
    #[default]
    Gmres,
    Cg,
}

/// Right preconditioner for the Krylov solvers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PreconditionerKind {
    #[default]
    Identity,
    BlockJacobi,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSolverConfig {
    pub method: LinearMethod,
    pub tol: f64,
    pub max_iter: usize,
    pub restart: usize,
    pub preconditioner: PreconditionerKind,
}

impl Default for LinearSolverConfig {
    fn default() -> Self {
        Self {
            method: LinearMethod::Gmres,
            tol: 1e-10,
            max_iter: 5000,
            restart: 50,
            preconditioner: PreconditionerKind::Identity,
        }
    }
}

/// Checks that conjugate gradients may be used with this operator.
pub fn check_cg_eligible(op: &DgOperator) -> Result<()> {
    if op.config().form != Form::StrongWeak {
        return Err(DgError::Configuration(
            "conjugate gradients need the strong-weak form".into(),
        ));
    }
    if !op.system().is_symmetric() {
        return Err(DgError::Configuration(format!(
            "system {} does not give a symmetric operator",
            op.system().name()
        )));
    }
    Ok(())
}

/// Solves `apply(u) = b` from a zero initial guess. Non-convergence is
/// reported, not raised.
pub fn solve_linear(op: &DgOperator, b: &[f64], config: &LinearSolverConfig) -> Result<(Vec<f64>, SolveReport)> {
    solve_linear_from(op, b, &vec![0.0; op.n_primal_dofs()], config)
}

pub fn solve_linear_from(
    op: &DgOperator,
    b: &[f64],
    x0: &[f64],
    config: &LinearSolverConfig,
) -> Result<(Vec<f64>, SolveReport)> {
    if config.method == LinearMethod::Cg {
        check_cg_eligible(op)?;
    }
    let block_jacobi;
    let precond: &dyn Preconditioner = match config.preconditioner {
        PreconditionerKind::Identity => &IdentityPreconditioner,
        PreconditionerKind::BlockJacobi => {
            if krylov::norm(b) == 0.0 && x0.iter().all(|&v| v == 0.0) {
                &IdentityPreconditioner
            } else {
                block_jacobi = BlockJacobi::new(op)?;
                &block_jacobi
            }
        }
    };
    match config.method {
        LinearMethod::Gmres => gmres(op, b, x0, config.tol, config.max_iter, config.restart, precond),
        LinearMethod::Cg => cg(op, b, x0, config.tol, config.max_iter, precond),
    }
}

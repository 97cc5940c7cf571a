//! Elliptic systems in first-order flux form
//! `−∂_i F^i_α + S_α = f_α` with primal variables `u` and auxiliary
//! variables `v`. Auxiliary fluxes depend only on `u`, and auxiliary sources
//! have the form `S_v = v + S̃_v(u)`.

mod analytic;
mod elasticity;
mod poisson;
mod puncture;

pub use analytic::{AnalyticField, AnalyticSolution, Jet, Wave};
pub use elasticity::Elasticity;
pub use poisson::{CurvedPoisson, FlatPoisson};
pub use puncture::{Puncture, PunctureBackground, PunctureEquation};

use std::sync::Arc;

use crate::background::Background;
use crate::error::{DgError, Result};
use crate::tensor::{Mat3, Vec3, IDENTITY};

/// Background quantities a system may need at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointGeometry {
    pub x: Vec3,
    pub inverse_metric: Mat3,
    /// `Γ^j_ji`
    pub christoffel_contraction: Vec3,
    /// `∂_i g^{ij}`
    pub inverse_metric_divergence: Vec3,
    /// System-specific per-point parameters, filled by
    /// [`EllipticSystem::point_parameters`].
    pub params: [f64; 2],
}

impl PointGeometry {
    pub fn flat(x: Vec3) -> Self {
        Self {
            x,
            inverse_metric: IDENTITY,
            christoffel_contraction: [0.0; 3],
            inverse_metric_divergence: [0.0; 3],
            params: [0.0; 2],
        }
    }

    pub fn new(system: &dyn EllipticSystem, background: &Background, x: Vec3) -> Result<Self> {
        Ok(Self {
            x,
            inverse_metric: background.metric_at(&x)?.inverse,
            christoffel_contraction: background.christoffel_at(&x)?.contraction,
            inverse_metric_divergence: background.inverse_metric_divergence(&x)?,
            params: system.point_parameters(&x)?,
        })
    }
}

/// Flux and source evaluators. Flux outputs are laid out flux-index major:
/// `out[i * n + c]` holds component `c` of `F^i`.
pub trait EllipticSystem: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    /// Components of the primal variable.
    fn n_primal(&self) -> usize;
    /// Components of the auxiliary variable.
    fn n_auxiliary(&self) -> usize;
    fn is_linear(&self) -> bool;
    /// Whether the strong-weak operator is symmetric, so CG applies.
    fn is_symmetric(&self) -> bool {
        true
    }

    /// Rejects backgrounds the system cannot use; `None` means flat.
    fn check_background(&self, background: Option<&Background>) -> Result<()> {
        match background {
            Some(bg) if !bg.is_flat() => Err(DgError::Configuration(format!(
                "system {} is formulated on a flat background",
                self.name()
            ))),
            _ => Ok(()),
        }
    }

    /// Per-point parameters cached by the operator, e.g. analytic background
    /// fields. Errors reject the collocation point.
    fn point_parameters(&self, _x: &Vec3) -> Result<[f64; 2]> {
        Ok([0.0; 2])
    }

    /// `F^i_v(u)`, length `dim * n_auxiliary`.
    fn auxiliary_fluxes(&self, u: &[f64], out: &mut [f64]);

    /// `F^i_u(v)`, length `dim * n_primal`; linear in `v`.
    fn primal_fluxes(&self, v: &[f64], pt: &PointGeometry, out: &mut [f64]);

    /// `S̃_v(u)`; zero for every system provided here.
    fn auxiliary_sources(&self, _u: &[f64], _pt: &PointGeometry, out: &mut [f64]) {
        out.fill(0.0);
    }

    /// `S_u(u, v)`.
    fn primal_sources(&self, u: &[f64], v: &[f64], pt: &PointGeometry, out: &mut [f64]);

    /// Fréchet derivative of `S̃_v` at `u0` applied to `du`.
    fn linearized_auxiliary_sources(&self, _u0: &[f64], du: &[f64], pt: &PointGeometry, out: &mut [f64]) {
        self.auxiliary_sources(du, pt, out);
    }

    /// Fréchet derivative of `S_u` at `(u0, v0)` applied to `(du, dv)`.
    fn linearized_primal_sources(
        &self,
        u0: &[f64],
        v0: &[f64],
        du: &[f64],
        dv: &[f64],
        pt: &PointGeometry,
        out: &mut [f64],
    );

    /// Pointwise `−∂_i F^i_u + S_u` for `u` given with two derivatives.
    fn continuum_residual(&self, u: &Jet, pt: &PointGeometry) -> Vec<f64>;

    /// Continuum auxiliary variable `v = ∂_i F^i_v(u) − S̃_v(u)`.
    fn continuum_auxiliary(&self, u: &Jet, pt: &PointGeometry) -> Vec<f64> {
        let (d, na) = (self.dim(), self.n_auxiliary());
        let mut v = vec![0.0; na];
        let mut flux = vec![0.0; d * na];
        let mut du = vec![0.0; self.n_primal()];
        for i in 0..d {
            for (c, x) in du.iter_mut().enumerate() {
                *x = u.gradient[c * d + i];
            }
            self.auxiliary_fluxes(&du, &mut flux);
            for a in 0..na {
                v[a] += flux[i * na + a];
            }
        }
        let mut s = vec![0.0; na];
        self.auxiliary_sources(&u.value, pt, &mut s);
        for a in 0..na {
            v[a] -= s[a];
        }
        v
    }
}

/// Builds a system from its configuration name.
pub fn system_by_name(
    name: &str,
    dim: usize,
    elasticity: Option<(f64, f64)>,
    punctures: Option<PunctureBackground>,
) -> Result<Arc<dyn EllipticSystem>> {
    match name {
        "poisson-flat" => Ok(Arc::new(FlatPoisson::new(dim)?)),
        "poisson-curved" => Ok(Arc::new(CurvedPoisson::new(dim)?)),
        "elasticity" => {
            let (lambda, mu) = elasticity.unwrap_or((1.0, 1.0));
            Ok(Arc::new(Elasticity::new(dim, lambda, mu)?))
        }
        "puncture" => {
            let bg = punctures.ok_or_else(|| {
                DgError::Configuration("the puncture system needs a puncture configuration".into())
            })?;
            Ok(Arc::new(PunctureEquation::new(bg)?))
        }
        other => Err(DgError::Configuration(format!("unknown system {other:?}"))),
    }
}

#[cfg(test)]
mod tests;

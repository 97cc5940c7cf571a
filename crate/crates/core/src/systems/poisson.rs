use super::{EllipticSystem, Jet, PointGeometry};
use crate::background::Background;
use crate::error::{invalid, DgError, Result};

fn check_dim(dim: usize) -> Result<()> {
    if (1..=3).contains(&dim) {
        Ok(())
    } else {
        invalid(format!("dimension must be 1, 2 or 3, got {dim}"))
    }
}

fn scalar_aux_fluxes(dim: usize, u: &[f64], out: &mut [f64]) {
    out.fill(0.0);
    for i in 0..dim {
        out[i * dim + i] = u[0];
    }
}

/// `−Δu = f` on a flat background.
#[derive(Debug, Clone)]
pub struct FlatPoisson {
    dim: usize,
}

impl FlatPoisson {
    pub fn new(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self { dim })
    }
}

impl EllipticSystem for FlatPoisson {
    fn name(&self) -> &str {
        "poisson-flat"
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn n_primal(&self) -> usize {
        1
    }
    fn n_auxiliary(&self) -> usize {
        self.dim
    }
    fn is_linear(&self) -> bool {
        true
    }

    fn auxiliary_fluxes(&self, u: &[f64], out: &mut [f64]) {
        scalar_aux_fluxes(self.dim, u, out);
    }

    fn primal_fluxes(&self, v: &[f64], _pt: &PointGeometry, out: &mut [f64]) {
        out[..self.dim].copy_from_slice(&v[..self.dim]);
    }

    fn primal_sources(&self, _u: &[f64], _v: &[f64], _pt: &PointGeometry, out: &mut [f64]) {
        out[0] = 0.0;
    }

    fn linearized_primal_sources(
        &self,
        _u0: &[f64],
        _v0: &[f64],
        _du: &[f64],
        _dv: &[f64],
        _pt: &PointGeometry,
        out: &mut [f64],
    ) {
        out[0] = 0.0;
    }

    fn continuum_residual(&self, u: &Jet, _pt: &PointGeometry) -> Vec<f64> {
        let d = self.dim;
        vec![-(0..d).map(|i| u.hessian[i * d + i]).sum::<f64>()]
    }
}

/// `−∇_i ∇^i u = f` on a curved background, with
/// `F^i_u = g^{ij} v_j` and `S_u = −Γ^i_ij g^{jk} v_k`.
#[derive(Debug, Clone)]
pub struct CurvedPoisson {
    dim: usize,
}

impl CurvedPoisson {
    pub fn new(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self { dim })
    }

    fn raised(&self, v: &[f64], pt: &PointGeometry) -> [f64; 3] {
        let mut out = [0.0; 3];
        for i in 0..self.dim {
            out[i] = (0..self.dim).map(|j| pt.inverse_metric[i][j] * v[j]).sum();
        }
        out
    }
}

impl EllipticSystem for CurvedPoisson {
    fn name(&self) -> &str {
        "poisson-curved"
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn n_primal(&self) -> usize {
        1
    }
    fn n_auxiliary(&self) -> usize {
        self.dim
    }
    fn is_linear(&self) -> bool {
        true
    }

    fn check_background(&self, background: Option<&Background>) -> Result<()> {
        match background {
            None => Err(DgError::Configuration(
                "poisson-curved needs an explicit background".into(),
            )),
            Some(bg) if bg.dim() != self.dim => Err(DgError::Configuration(
                "background dimension does not match the system".into(),
            )),
            Some(_) => Ok(()),
        }
    }

    fn auxiliary_fluxes(&self, u: &[f64], out: &mut [f64]) {
        scalar_aux_fluxes(self.dim, u, out);
    }

    fn primal_fluxes(&self, v: &[f64], pt: &PointGeometry, out: &mut [f64]) {
        let up = self.raised(v, pt);
        out[..self.dim].copy_from_slice(&up[..self.dim]);
    }

    fn primal_sources(&self, _u: &[f64], v: &[f64], pt: &PointGeometry, out: &mut [f64]) {
        let up = self.raised(v, pt);
        out[0] = -(0..self.dim).map(|j| pt.christoffel_contraction[j] * up[j]).sum::<f64>();
    }

    fn linearized_primal_sources(
        &self,
        _u0: &[f64],
        _v0: &[f64],
        du: &[f64],
        dv: &[f64],
        pt: &PointGeometry,
        out: &mut [f64],
    ) {
        self.primal_sources(du, dv, pt, out);
    }

    fn continuum_residual(&self, u: &Jet, pt: &PointGeometry) -> Vec<f64> {
        let d = self.dim;
        let g = &pt.inverse_metric;
        let mut r = 0.0;
        for i in 0..d {
            for j in 0..d {
                r -= g[i][j] * u.hessian[i * d + j];
            }
            r -= pt.inverse_metric_divergence[i] * u.gradient[i];
        }
        let up = self.raised(&u.gradient, pt);
        r -= (0..d).map(|j| pt.christoffel_contraction[j] * up[j]).sum::<f64>();
        vec![r]
    }
}

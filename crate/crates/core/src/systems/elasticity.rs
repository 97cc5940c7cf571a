use super::{EllipticSystem, Jet, PointGeometry};
use crate::error::{invalid, Result};

/// Linear elasticity `−∂_i (Y^{ijkl} S_kl) = f^j` for an isotropic and
/// homogeneous material with Lamé parameters `λ` and `μ`. The auxiliary
/// strain is stored as a full `d × d` tensor.
#[derive(Debug, Clone)]
pub struct Elasticity {
    dim: usize,
    lambda: f64,
    mu: f64,
}

impl Elasticity {
    pub fn new(dim: usize, lambda: f64, mu: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return invalid(format!("dimension must be 1, 2 or 3, got {dim}"));
        }
        if !(mu > 0.0) || !lambda.is_finite() || !mu.is_finite() {
            return invalid("elasticity needs finite λ and μ > 0");
        }
        Ok(Self { dim, lambda, mu })
    }

    pub fn lame(&self) -> (f64, f64) {
        (self.lambda, self.mu)
    }

    /// `T^{ij} = λ δ^{ij} S_kk + μ (S_ij + S_ji)`, row-major.
    pub fn stress(&self, strain: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let trace: f64 = (0..d).map(|k| strain[k * d + k]).sum();
        for i in 0..d {
            for j in 0..d {
                let iso = if i == j { self.lambda * trace } else { 0.0 };
                out[i * d + j] = iso + self.mu * (strain[i * d + j] + strain[j * d + i]);
            }
        }
    }
}

impl EllipticSystem for Elasticity {
    fn name(&self) -> &str {
        "elasticity"
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn n_primal(&self) -> usize {
        self.dim
    }
    fn n_auxiliary(&self) -> usize {
        self.dim * self.dim
    }
    fn is_linear(&self) -> bool {
        true
    }

    /// `F^i_{S jk} = ½ (δ^i_j ξ_k + δ^i_k ξ_j)`.
    fn auxiliary_fluxes(&self, u: &[f64], out: &mut [f64]) {
        let d = self.dim;
        out.fill(0.0);
        for i in 0..d {
            for k in 0..d {
                out[i * d * d + i * d + k] += 0.5 * u[k];
                out[i * d * d + k * d + i] += 0.5 * u[k];
            }
        }
    }

    fn primal_fluxes(&self, v: &[f64], _pt: &PointGeometry, out: &mut [f64]) {
        self.stress(v, out);
    }

    fn primal_sources(&self, _u: &[f64], _v: &[f64], _pt: &PointGeometry, out: &mut [f64]) {
        out.fill(0.0);
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
        out.fill(0.0);
    }

    fn continuum_residual(&self, u: &Jet, _pt: &PointGeometry) -> Vec<f64> {
        let d = self.dim;
        let h = |c: usize, i: usize, j: usize| u.hessian[c * d * d + i * d + j];
        (0..d)
            .map(|j| {
                let grad_div: f64 = (0..d).map(|k| h(k, k, j)).sum();
                let laplace: f64 = (0..d).map(|i| h(j, i, i)).sum();
                -(self.lambda + self.mu) * grad_div - self.mu * laplace
            })
            .collect()
    }
}

use super::{EllipticSystem, Jet, PointGeometry};
use crate::error::{invalid, DgError, Result};
use crate::tensor::{Mat3, Vec3};

/// Collocation points closer than this to a puncture are rejected.
pub const SINGULAR_DISTANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Puncture {
    pub mass: f64,
    pub position: Vec3,
    pub momentum: Vec3,
    pub spin: Vec3,
}

/// Analytic Bowen-York background fields of a set of punctures.
#[derive(Debug, Clone, PartialEq)]
pub struct PunctureBackground {
    punctures: Vec<Puncture>,
}

fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

impl PunctureBackground {
    pub fn new(punctures: Vec<Puncture>) -> Result<Self> {
        if punctures.is_empty() {
            return invalid("at least one puncture is required");
        }
        for (a, p) in punctures.iter().enumerate() {
            if !(p.mass > 0.0) {
                return invalid(format!("puncture {a} has non-positive mass"));
            }
            for q in &punctures[..a] {
                if p.position == q.position {
                    return invalid("puncture positions must be distinct");
                }
            }
        }
        Ok(Self { punctures })
    }

    pub fn punctures(&self) -> &[Puncture] {
        &self.punctures
    }

    /// `(α, β, Ā^{ij})` at `x`.
    pub fn evaluate(&self, x: &Vec3) -> Result<(f64, f64, Mat3)> {
        let mut inv_alpha = 0.0;
        let mut a = [[0.0; 3]; 3];
        for p in &self.punctures {
            let d = [x[0] - p.position[0], x[1] - p.position[1], x[2] - p.position[2]];
            let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            if r < SINGULAR_DISTANCE {
                return Err(DgError::SingularPoint(format!(
                    "point {x:?} coincides with a puncture"
                )));
            }
            inv_alpha += p.mass / r;
            let n = [d[0] / r, d[1] / r, d[2] / r];
            let p_dot_n: f64 = (0..3).map(|k| p.momentum[k] * n[k]).sum();
            // ε^{jkl} S_k n_l for each j
            let mut eps_sn = [0.0; 3];
            for (j, e) in eps_sn.iter_mut().enumerate() {
                for k in 0..3 {
                    for l in 0..3 {
                        *e += levi_civita(j, k, l) * p.spin[k] * n[l];
                    }
                }
            }
            for i in 0..3 {
                for j in 0..3 {
                    let delta = if i == j { 1.0 } else { 0.0 };
                    let momentum_term = p.momentum[i] * n[j] + p.momentum[j] * n[i]
                        - (delta - n[i] * n[j]) * p_dot_n;
                    let spin_term = (4.0 / r) * 0.5 * (n[i] * eps_sn[j] + n[j] * eps_sn[i]);
                    a[i][j] += 1.5 / (r * r) * (momentum_term + spin_term);
                }
            }
        }
        let alpha = 1.0 / inv_alpha;
        let aa: f64 = a.iter().flatten().map(|v| v * v).sum();
        let beta = alpha.powi(7) * aa / 8.0;
        Ok((alpha, beta, a))
    }
}

/// `−Δu = β (α (1 + u) + 1)^{−7}` in three dimensions, written with
/// `S_u = −β (α (1 + u) + 1)^{−7}`.
#[derive(Debug, Clone)]
pub struct PunctureEquation {
    background: PunctureBackground,
}

impl PunctureEquation {
    pub fn new(background: PunctureBackground) -> Result<Self> {
        Ok(Self { background })
    }

    pub fn background(&self) -> &PunctureBackground {
        &self.background
    }

    pub fn source(alpha: f64, beta: f64, u: f64) -> f64 {
        -beta * (alpha * (1.0 + u) + 1.0).powi(-7)
    }

    pub fn source_derivative(alpha: f64, beta: f64, u: f64) -> f64 {
        7.0 * alpha * beta * (alpha * (1.0 + u) + 1.0).powi(-8)
    }
}

impl EllipticSystem for PunctureEquation {
    fn name(&self) -> &str {
        "puncture"
    }
    fn dim(&self) -> usize {
        3
    }
    fn n_primal(&self) -> usize {
        1
    }
    fn n_auxiliary(&self) -> usize {
        3
    }
    fn is_linear(&self) -> bool {
        false
    }

    fn point_parameters(&self, x: &Vec3) -> Result<[f64; 2]> {
        let (alpha, beta, _) = self.background.evaluate(x)?;
        Ok([alpha, beta])
    }

    fn auxiliary_fluxes(&self, u: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for i in 0..3 {
            out[i * 3 + i] = u[0];
        }
    }

    fn primal_fluxes(&self, v: &[f64], _pt: &PointGeometry, out: &mut [f64]) {
        out[..3].copy_from_slice(&v[..3]);
    }

    fn primal_sources(&self, u: &[f64], _v: &[f64], pt: &PointGeometry, out: &mut [f64]) {
        out[0] = Self::source(pt.params[0], pt.params[1], u[0]);
    }

    fn linearized_primal_sources(
        &self,
        u0: &[f64],
        _v0: &[f64],
        du: &[f64],
        _dv: &[f64],
        pt: &PointGeometry,
        out: &mut [f64],
    ) {
        out[0] = Self::source_derivative(pt.params[0], pt.params[1], u0[0]) * du[0];
    }

    fn continuum_residual(&self, u: &Jet, pt: &PointGeometry) -> Vec<f64> {
        let laplace: f64 = (0..3).map(|i| u.hessian[i * 3 + i]).sum();
        vec![-laplace + Self::source(pt.params[0], pt.params[1], u.value[0])]
    }
}

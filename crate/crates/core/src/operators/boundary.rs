//! Boundary conditions imposed through exterior ghost data,
//! `(n F)^ext = (n F)^int − 2 (n F)^b`.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{DgError, Result};
use crate::tensor::Vec3;

/// Boundary data as a function of position and outward normal.
pub type BoundaryField = Arc<dyn Fn(&Vec3, &Vec3) -> Vec<f64> + Send + Sync>;
/// Boundary data as a function of position, outward normal and the
/// interior trace of the primal variable.
pub type TraceMap = Arc<dyn Fn(&Vec3, &Vec3, &[f64]) -> Vec<f64> + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcKind {
    /// Prescribes the primal variable `u^b`.
    Dirichlet,
    /// Prescribes the normal primal flux `(n_i F^i_u)^b`.
    Neumann,
}

#[derive(Clone)]
pub enum BoundaryCondition {
    Dirichlet(BoundaryField),
    Neumann(BoundaryField),
    /// `a u + b n_i F^i_u = g`.
    Robin { a: f64, b: f64, g: BoundaryField },
    /// Dirichlet- or Neumann-type data that depends on the interior trace,
    /// possibly nonlinearly.
    TraceDependent { kind: BcKind, map: TraceMap },
}

impl fmt::Debug for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryCondition::Dirichlet(_) => f.write_str("Dirichlet"),
            BoundaryCondition::Neumann(_) => f.write_str("Neumann"),
            BoundaryCondition::Robin { a, b, .. } => write!(f, "Robin(a={a}, b={b})"),
            BoundaryCondition::TraceDependent { kind, .. } => write!(f, "TraceDependent({kind:?})"),
        }
    }
}

/// Step of the central finite difference used to linearize trace maps.
fn fd_step(trace: f64) -> f64 {
    1e-7 * (1.0 + trace.abs())
}

impl BoundaryCondition {
    pub fn dirichlet(g: impl Fn(&Vec3, &Vec3) -> Vec<f64> + Send + Sync + 'static) -> Self {
        BoundaryCondition::Dirichlet(Arc::new(g))
    }

    pub fn neumann(g: impl Fn(&Vec3, &Vec3) -> Vec<f64> + Send + Sync + 'static) -> Self {
        BoundaryCondition::Neumann(Arc::new(g))
    }

    pub fn robin(a: f64, b: f64, g: impl Fn(&Vec3, &Vec3) -> Vec<f64> + Send + Sync + 'static) -> Self {
        BoundaryCondition::Robin { a, b, g: Arc::new(g) }
    }

    pub fn trace_dependent(kind: BcKind, map: impl Fn(&Vec3, &Vec3, &[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        BoundaryCondition::TraceDependent { kind, map: Arc::new(map) }
    }

    /// Homogeneous Dirichlet data with `n` components.
    pub fn zero_dirichlet(n: usize) -> Self {
        Self::dirichlet(move |_, _| vec![0.0; n])
    }

    pub fn validate(&self) -> Result<()> {
        if let BoundaryCondition::Robin { a, b, .. } = self {
            if !a.is_finite() || !b.is_finite() || (*a == 0.0 && *b == 0.0) {
                return Err(DgError::Configuration(
                    "Robin coefficients must be finite and not both zero".into(),
                ));
            }
        }
        Ok(())
    }

    /// Whether the linearization differs between trace values.
    pub(crate) fn is_trace_linearized(&self) -> bool {
        matches!(self, BoundaryCondition::TraceDependent { .. })
    }

    /// Boundary data for the full, possibly inhomogeneous problem.
    pub fn resolve(&self, x: &Vec3, n: &Vec3, trace: &[f64]) -> (BcKind, Vec<f64>) {
        match self {
            BoundaryCondition::Dirichlet(g) => (BcKind::Dirichlet, g(x, n)),
            BoundaryCondition::Neumann(g) => (BcKind::Neumann, g(x, n)),
            BoundaryCondition::Robin { a, b, g } => {
                let g = g(x, n);
                if *b == 0.0 {
                    (BcKind::Dirichlet, g.iter().map(|g| g / a).collect())
                } else {
                    let flux = g.iter().zip(trace).map(|(g, u)| (g - a * u) / b).collect();
                    (BcKind::Neumann, flux)
                }
            }
            BoundaryCondition::TraceDependent { kind, map } => (*kind, map(x, n, trace)),
        }
    }

    /// Linearized boundary data for a trace perturbation `dtrace` about
    /// `trace0`. Fixed data drops out; trace maps are differentiated by
    /// central differences componentwise.
    pub fn linearize(&self, x: &Vec3, n: &Vec3, trace0: &[f64], dtrace: &[f64]) -> (BcKind, Vec<f64>) {
        match self {
            BoundaryCondition::Dirichlet(_) => (BcKind::Dirichlet, vec![0.0; dtrace.len()]),
            BoundaryCondition::Neumann(_) => (BcKind::Neumann, vec![0.0; dtrace.len()]),
            BoundaryCondition::Robin { a, b, .. } => {
                if *b == 0.0 {
                    (BcKind::Dirichlet, vec![0.0; dtrace.len()])
                } else {
                    (BcKind::Neumann, dtrace.iter().map(|du| -a * du / b).collect())
                }
            }
            BoundaryCondition::TraceDependent { kind, map } => {
                let mut out = vec![0.0; dtrace.len()];
                let mut shifted = trace0.to_vec();
                for c in 0..trace0.len() {
                    if dtrace[c] == 0.0 {
                        continue;
                    }
                    let h = fd_step(trace0[c]);
                    shifted[c] = trace0[c] + h;
                    let plus = map(x, n, &shifted);
                    shifted[c] = trace0[c] - h;
                    let minus = map(x, n, &shifted);
                    shifted[c] = trace0[c];
                    for (o, (p, m)) in out.iter_mut().zip(plus.iter().zip(&minus)) {
                        *o += (p - m) / (2.0 * h) * dtrace[c];
                    }
                }
                (*kind, out)
            }
        }
    }
}

/// Boundary conditions per boundary tag.
#[derive(Debug, Clone, Default)]
pub struct BoundaryConditions {
    by_tag: BTreeMap<String, BoundaryCondition>,
}

impl BoundaryConditions {
    pub fn new() -> Self {
        Self::default()
    }

    /// The same condition on every listed tag.
    pub fn uniform<S: AsRef<str>>(tags: &[S], bc: BoundaryCondition) -> Self {
        let mut out = Self::new();
        for t in tags {
            out.by_tag.insert(t.as_ref().to_string(), bc.clone());
        }
        out
    }

    pub fn with(mut self, tag: impl Into<String>, bc: BoundaryCondition) -> Self {
        self.by_tag.insert(tag.into(), bc);
        self
    }

    pub fn insert(&mut self, tag: impl Into<String>, bc: BoundaryCondition) {
        self.by_tag.insert(tag.into(), bc);
    }

    pub fn get(&self, tag: &str) -> Result<&BoundaryCondition> {
        self.by_tag
            .get(tag)
            .ok_or_else(|| DgError::Configuration(format!("no boundary condition for tag {tag:?}")))
    }

    pub fn tags(&self) -> impl Iterator<Item = &str> {
        self.by_tag.keys().map(|s| s.as_str())
    }
}

/// Interior or exterior boundary data at the points of one face or mortar,
/// component-major: `nfv[a * nq + q]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    /// `n_i F^i_v(u)`
    pub nfv: Vec<f64>,
    /// `n_i F^i_u(∂_j F^j_v(u) − S̃_v(u))`
    pub derivative: Vec<f64>,
    /// `n_i F^i_u(n_j F^j_v(u))`
    pub penalty: Vec<f64>,
}

/// Exterior ghost data on an external face.
///
/// `boundary[q]` holds the resolved condition at face point `q`;
/// `dirichlet_nfv(q, u_b)` evaluates `n^int_i F^i_v(u_b)` and
/// `flip_penalty(q, nfv)` evaluates `(−n^int)_i F^i_u(nfv)`.
pub fn exterior_ghost_data(
    interior: &BoundaryData,
    boundary: &[(BcKind, Vec<f64>)],
    n_aux: usize,
    n_primal: usize,
    mut dirichlet_nfv: impl FnMut(usize, &[f64]) -> Vec<f64>,
    mut flip_penalty: impl FnMut(usize, &[f64]) -> Vec<f64>,
) -> BoundaryData {
    let nq = boundary.len();
    let mut b_nfv = interior.nfv.clone();
    let mut b_deriv = interior.derivative.clone();
    for (q, (kind, values)) in boundary.iter().enumerate() {
        match kind {
            BcKind::Dirichlet => {
                let f = dirichlet_nfv(q, values);
                for a in 0..n_aux {
                    b_nfv[a * nq + q] = f[a];
                }
            }
            BcKind::Neumann => {
                for c in 0..n_primal {
                    b_deriv[c * nq + q] = values[c];
                }
            }
        }
    }
    let nfv: Vec<f64> = interior.nfv.iter().zip(&b_nfv).map(|(i, b)| i - 2.0 * b).collect();
    let derivative = interior.derivative.iter().zip(&b_deriv).map(|(i, b)| i - 2.0 * b).collect();
    let mut penalty = vec![0.0; n_primal * nq];
    let mut point = vec![0.0; n_aux];
    for q in 0..nq {
        for a in 0..n_aux {
            point[a] = nfv[a * nq + q];
        }
        let p = flip_penalty(q, &point);
        for c in 0..n_primal {
            penalty[c * nq + q] = p[c];
        }
    }
    BoundaryData {
        nfv,
        derivative,
        penalty,
    }
}

use std::fmt;
use std::sync::Arc;

use super::{EllipticSystem, PointGeometry};
use crate::background::Background;
use crate::error::Result;
use crate::operators::BoundaryCondition;
use crate::tensor::Vec3;

/// Values and first two derivatives of a field at one point.
/// `gradient[c * d + i] = ∂_i u_c`, `hessian[(c * d + i) * d + j] = ∂_i ∂_j u_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub value: Vec<f64>,
    pub gradient: Vec<f64>,
    pub hessian: Vec<f64>,
}

type JetFn = Arc<dyn Fn(&Vec3) -> Jet + Send + Sync>;

/// A field with analytic first and second derivatives.
#[derive(Clone)]
pub struct AnalyticField {
    dim: usize,
    components: usize,
    jet: JetFn,
}

impl fmt::Debug for AnalyticField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalyticField")
            .field("dim", &self.dim)
            .field("components", &self.components)
            .finish()
    }
}

/// One factor `sin(k x + phase)` of a separable field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wave {
    pub wavenumber: f64,
    pub phase: f64,
}

impl AnalyticField {
    pub fn new(dim: usize, components: usize, jet: impl Fn(&Vec3) -> Jet + Send + Sync + 'static) -> Self {
        Self {
            dim,
            components,
            jet: Arc::new(jet),
        }
    }

    /// `u_c = amplitude_c ∏_i sin(k_ci x_i + phase_ci)`.
    pub fn separable(dim: usize, components: Vec<(f64, Vec<Wave>)>) -> Self {
        let n = components.len();
        Self::new(dim, n, move |x| {
            let mut jet = Jet {
                value: vec![0.0; n],
                gradient: vec![0.0; n * dim],
                hessian: vec![0.0; n * dim * dim],
            };
            for (c, (amplitude, waves)) in components.iter().enumerate() {
                let s: Vec<f64> = (0..dim).map(|i| (waves[i].wavenumber * x[i] + waves[i].phase).sin()).collect();
                let ds: Vec<f64> = (0..dim)
                    .map(|i| waves[i].wavenumber * (waves[i].wavenumber * x[i] + waves[i].phase).cos())
                    .collect();
                let dds: Vec<f64> = (0..dim).map(|i| -waves[i].wavenumber.powi(2) * s[i]).collect();
                let product = |f: &dyn Fn(usize) -> f64| (0..dim).map(f).product::<f64>() * amplitude;
                jet.value[c] = product(&|k| s[k]);
                for i in 0..dim {
                    jet.gradient[c * dim + i] = product(&|k| if k == i { ds[k] } else { s[k] });
                    for j in 0..dim {
                        jet.hessian[(c * dim + i) * dim + j] = product(&|k| {
                            if i == j && k == i {
                                dds[k]
                            } else if k == i || k == j {
                                ds[k]
                            } else {
                                s[k]
                            }
                        });
                    }
                }
            }
            jet
        })
    }

    /// `∏_i sin(π x_i)`.
    pub fn sine_product(dim: usize) -> Self {
        let wave = Wave {
            wavenumber: std::f64::consts::PI,
            phase: 0.0,
        };
        Self::separable(dim, vec![(1.0, vec![wave; dim])])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn jet(&self, x: &Vec3) -> Jet {
        (self.jet)(x)
    }

    pub fn value(&self, x: &Vec3) -> Vec<f64> {
        (self.jet)(x).value
    }
}

/// A field together with the fixed source that makes it an exact solution.
#[derive(Clone)]
pub struct AnalyticSolution {
    pub name: String,
    field: AnalyticField,
    system: Arc<dyn EllipticSystem>,
    background: Background,
}

impl fmt::Debug for AnalyticSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AnalyticSolution")
            .field("name", &self.name)
            .field("system", &self.system.name())
            .finish()
    }
}

impl AnalyticSolution {
    /// Manufactures the fixed source `f = −∂_i F^i_u + S_u` for `field`.
    pub fn manufactured(
        name: impl Into<String>,
        system: Arc<dyn EllipticSystem>,
        field: AnalyticField,
        background: Option<Background>,
    ) -> Result<Self> {
        system.check_background(background.as_ref())?;
        if field.components() != system.n_primal() || field.dim() != system.dim() {
            return crate::error::invalid("analytic field shape does not match the system");
        }
        let background = background.unwrap_or_else(|| Background::flat(system.dim()));
        Ok(Self {
            name: name.into(),
            field,
            system,
            background,
        })
    }

    pub fn field(&self) -> &AnalyticField {
        &self.field
    }

    pub fn value(&self, x: &Vec3) -> Vec<f64> {
        self.field.value(x)
    }

    pub fn fixed_source(&self, x: &Vec3) -> Result<Vec<f64>> {
        let pt = PointGeometry::new(self.system.as_ref(), &self.background, *x)?;
        Ok(self.system.continuum_residual(&self.field.jet(x), &pt))
    }

    /// `n_i F^i_u(v)` of the exact solution for a normalized normal `n`.
    pub fn normal_flux(&self, x: &Vec3, n: &Vec3) -> Vec<f64> {
        let sys = self.system.as_ref();
        let (d, np) = (sys.dim(), sys.n_primal());
        let pt = PointGeometry::new(sys, &self.background, *x).unwrap_or(PointGeometry::flat(*x));
        let v = sys.continuum_auxiliary(&self.field.jet(x), &pt);
        let mut flux = vec![0.0; d * np];
        sys.primal_fluxes(&v, &pt, &mut flux);
        (0..np).map(|c| (0..d).map(|i| n[i] * flux[i * np + c]).sum()).collect()
    }

    pub fn dirichlet(&self) -> BoundaryCondition {
        let me = self.clone();
        BoundaryCondition::dirichlet(move |x, _| me.value(x))
    }

    pub fn neumann(&self) -> BoundaryCondition {
        let me = self.clone();
        BoundaryCondition::neumann(move |x, n| me.normal_flux(x, n))
    }

    /// Robin data `a u + b n_i F^i_u = g` consistent with the solution.
    pub fn robin(&self, a: f64, b: f64) -> BoundaryCondition {
        let me = self.clone();
        BoundaryCondition::robin(a, b, move |x, n| {
            let u = me.value(x);
            let flux = me.normal_flux(x, n);
            u.iter().zip(&flux).map(|(u, f)| a * u + b * f).collect()
        })
    }
}

//! Metric backgrounds: flat space, or a conformally flat metric
//! `g_ij = e^{2φ} δ_ij` with a closed-form conformal factor.

use std::fmt;
use std::sync::Arc;

use crate::error::{DgError, Result};
use crate::mesh::{Element, Side};
use crate::tensor::{inverse, Mat3, Vec3, IDENTITY};

type ScalarFn = Arc<dyn Fn(&Vec3) -> f64 + Send + Sync>;
type GradientFn = Arc<dyn Fn(&Vec3) -> Vec3 + Send + Sync>;

/// Scalar field `φ` together with its gradient.
#[derive(Clone)]
pub struct ConformalFactor {
    value: ScalarFn,
    gradient: GradientFn,
}

impl fmt::Debug for ConformalFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ConformalFactor")
    }
}

impl ConformalFactor {
    pub fn new(
        value: impl Fn(&Vec3) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&Vec3) -> Vec3 + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Arc::new(value),
            gradient: Arc::new(gradient),
        }
    }

    /// `φ(x) = offset + slope · x`.
    pub fn linear(slope: Vec3, offset: f64) -> Self {
        Self::new(
            move |x| offset + slope[0] * x[0] + slope[1] * x[1] + slope[2] * x[2],
            move |_| slope,
        )
    }

    pub fn value(&self, x: &Vec3) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &Vec3) -> Vec3 {
        (self.gradient)(x)
    }
}

#[derive(Debug, Clone)]
pub enum Background {
    Flat { dim: usize },
    ConformallyFlat { dim: usize, phi: ConformalFactor },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricData {
    pub metric: Mat3,
    pub inverse: Mat3,
    pub sqrt_det: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Christoffel {
    /// `symbols[i][j][k] = Γ^i_jk`
    pub symbols: [[[f64; 3]; 3]; 3],
    /// `contraction[i] = Γ^j_ji`
    pub contraction: Vec3,
}

/// Normalized face normals, normal magnitudes `|ñ|` and surface measure
/// `√ḡ J̄` at each face point.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceGeometry {
    pub normals: Vec<Vec3>,
    pub magnitudes: Vec<f64>,
    pub surface_measure: Vec<f64>,
}

impl Background {
    pub fn flat(dim: usize) -> Self {
        Background::Flat { dim }
    }

    pub fn conformally_flat(dim: usize, phi: ConformalFactor) -> Self {
        Background::ConformallyFlat { dim, phi }
    }

    pub fn dim(&self) -> usize {
        match self {
            Background::Flat { dim } | Background::ConformallyFlat { dim, .. } => *dim,
        }
    }

    pub fn is_flat(&self) -> bool {
        matches!(self, Background::Flat { .. })
    }

    pub fn metric_at(&self, x: &Vec3) -> Result<MetricData> {
        let dim = self.dim();
        let mut metric = IDENTITY;
        if let Background::ConformallyFlat { phi, .. } = self {
            let factor = (2.0 * phi.value(x)).exp();
            for d in 0..dim {
                metric[d][d] = factor;
            }
        }
        match inverse(&metric, dim) {
            Some((inv, det)) if det > 0.0 => Ok(MetricData {
                metric,
                inverse: inv,
                sqrt_det: det.sqrt(),
            }),
            _ => Err(DgError::DegenerateGeometry(format!(
                "metric is not positive definite at {:?}",
                &x[..dim]
            ))),
        }
    }

    pub fn christoffel_at(&self, x: &Vec3) -> Result<Christoffel> {
        let dim = self.dim();
        let mut out = Christoffel {
            symbols: [[[0.0; 3]; 3]; 3],
            contraction: [0.0; 3],
        };
        if let Background::ConformallyFlat { phi, .. } = self {
            let grad = phi.gradient(x);
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(DgError::DegenerateGeometry(format!(
                    "conformal factor gradient is not finite at {:?}",
                    &x[..dim]
                )));
            }
            let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
            for i in 0..dim {
                for j in 0..dim {
                    for k in 0..dim {
                        out.symbols[i][j][k] =
                            delta(i, j) * grad[k] + delta(i, k) * grad[j] - delta(j, k) * grad[i];
                    }
                }
                out.contraction[i] = dim as f64 * grad[i];
            }
        }
        Ok(out)
    }

    /// `∂_i g^{ij}` for each `j`.
    pub fn inverse_metric_divergence(&self, x: &Vec3) -> Result<Vec3> {
        let mut out = [0.0; 3];
        if let Background::ConformallyFlat { dim, phi } = self {
            let factor = (-2.0 * phi.value(x)).exp();
            let grad = phi.gradient(x);
            for d in 0..*dim {
                out[d] = -2.0 * factor * grad[d];
            }
        }
        Ok(out)
    }

    /// `|ñ| = √(ñ_i ñ_j g^{ij})` and `n_i = ñ_i / |ñ|`.
    pub fn normalize(&self, unnormalized: &Vec3, x: &Vec3) -> Result<(Vec3, f64)> {
        let metric = self.metric_at(x)?;
        let dim = self.dim();
        let mut sq = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                sq += unnormalized[i] * unnormalized[j] * metric.inverse[i][j];
            }
        }
        let magnitude = sq.sqrt();
        if !(magnitude > 0.0) || !magnitude.is_finite() {
            return Err(DgError::DegenerateGeometry(format!(
                "face normal has zero magnitude at {:?}",
                &x[..dim]
            )));
        }
        let mut n = [0.0; 3];
        for i in 0..dim {
            n[i] = unnormalized[i] / magnitude;
        }
        Ok((n, magnitude))
    }

    /// Geometry at the given logical points of one element face.
    pub fn face_geometry(
        &self,
        element: &Element,
        direction: usize,
        side: Side,
        points: &[Vec3],
    ) -> Result<FaceGeometry> {
        let mut out = FaceGeometry {
            normals: Vec::with_capacity(points.len()),
            magnitudes: Vec::with_capacity(points.len()),
            surface_measure: Vec::with_capacity(points.len()),
        };
        for xi in points {
            let x = element.map.to_physical(xi);
            let unnormalized = element.unnormalized_face_normal(direction, side, xi)?;
            let (n, magnitude) = self.normalize(&unnormalized, &x)?;
            let jac = element.jacobian_at(xi)?;
            let sqrt_g = self.metric_at(&x)?.sqrt_det;
            out.normals.push(n);
            out.magnitudes.push(magnitude);
            out.surface_measure.push(magnitude * sqrt_g * jac.determinant);
        }
        Ok(out)
    }
}

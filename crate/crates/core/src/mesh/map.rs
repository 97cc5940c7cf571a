use crate::error::{DgError, Result};
use crate::tensor::{inverse, matmul, Mat3, Vec3, IDENTITY};

/// Axis-aligned map from the reference cube onto `[lower, upper]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap {
    pub dim: usize,
    pub lower: Vec3,
    pub upper: Vec3,
}

impl AffineMap {
    pub fn new(lower: &[f64], upper: &[f64]) -> Self {
        let dim = lower.len();
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        lo[..dim].copy_from_slice(lower);
        hi[..dim].copy_from_slice(&upper[..dim]);
        Self {
            dim,
            lower: lo,
            upper: hi,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(&vec![-1.0; dim], &vec![1.0; dim])
    }

    pub fn apply(&self, xi: &Vec3) -> Vec3 {
        let mut x = [0.0; 3];
        for d in 0..self.dim {
            x[d] = self.lower[d] + 0.5 * (xi[d] + 1.0) * (self.upper[d] - self.lower[d]);
        }
        x
    }

    pub fn jacobian(&self) -> Mat3 {
        let mut j = IDENTITY;
        for d in 0..self.dim {
            j[d][d] = 0.5 * (self.upper[d] - self.lower[d]);
        }
        j
    }

    pub fn invert(&self, x: &Vec3) -> Vec3 {
        let mut xi = [0.0; 3];
        for d in 0..self.dim {
            xi[d] = 2.0 * (x[d] - self.lower[d]) / (self.upper[d] - self.lower[d]) - 1.0;
        }
        xi
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &AffineMap) -> AffineMap {
        AffineMap {
            dim: self.dim,
            lower: self.apply(&inner.lower),
            upper: self.apply(&inner.upper),
        }
    }
}

/// Two-dimensional annular wedge: the radius is linear in `ξ` and the polar
/// angle is linear in `η`.
#[derive(Debug, Clone, PartialEq)]
pub struct WedgeMap {
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub start_angle: f64,
    pub end_angle: f64,
}

impl WedgeMap {
    fn radius(&self, xi: f64) -> f64 {
        self.inner_radius + 0.5 * (xi + 1.0) * (self.outer_radius - self.inner_radius)
    }

    fn angle(&self, eta: f64) -> f64 {
        self.start_angle + 0.5 * (eta + 1.0) * (self.end_angle - self.start_angle)
    }

    fn apply(&self, xi: &Vec3) -> Vec3 {
        let r = self.radius(xi[0]);
        let t = self.angle(xi[1]);
        [r * t.cos(), r * t.sin(), 0.0]
    }

    fn jacobian(&self, xi: &Vec3) -> Mat3 {
        let r = self.radius(xi[0]);
        let t = self.angle(xi[1]);
        let dr = 0.5 * (self.outer_radius - self.inner_radius);
        let dt = 0.5 * (self.end_angle - self.start_angle);
        [
            [t.cos() * dr, -r * t.sin() * dt, 0.0],
            [t.sin() * dr, r * t.cos() * dt, 0.0],
            [0.0, 0.0, 1.0],
        ]
    }

    fn invert(&self, x: &Vec3) -> Vec3 {
        let r = x[0].hypot(x[1]);
        let mid = 0.5 * (self.start_angle + self.end_angle);
        // unwrap the angle into the branch centred on this wedge
        let mut t = x[1].atan2(x[0]);
        while t - mid > std::f64::consts::PI {
            t -= 2.0 * std::f64::consts::PI;
        }
        while mid - t > std::f64::consts::PI {
            t += 2.0 * std::f64::consts::PI;
        }
        [
            2.0 * (r - self.inner_radius) / (self.outer_radius - self.inner_radius) - 1.0,
            2.0 * (t - self.start_angle) / (self.end_angle - self.start_angle) - 1.0,
            0.0,
        ]
    }
}

/// Invertible map `x(ξ)` from the reference cube onto an element.
#[derive(Debug, Clone, PartialEq)]
pub enum CoordinateMap {
    Affine(AffineMap),
    AnnulusWedge(WedgeMap),
    /// `outer(logical(ξ))`
    Composed {
        logical: AffineMap,
        outer: Box<CoordinateMap>,
    },
}

impl CoordinateMap {
    pub fn dim(&self) -> usize {
        match self {
            CoordinateMap::Affine(a) => a.dim,
            CoordinateMap::AnnulusWedge(_) => 2,
            CoordinateMap::Composed { outer, .. } => outer.dim(),
        }
    }

    pub fn to_physical(&self, xi: &Vec3) -> Vec3 {
        match self {
            CoordinateMap::Affine(a) => a.apply(xi),
            CoordinateMap::AnnulusWedge(w) => w.apply(xi),
            CoordinateMap::Composed { logical, outer } => outer.to_physical(&logical.apply(xi)),
        }
    }

    /// `J[i][j] = ∂x^i/∂ξ^j`.
    pub fn jacobian(&self, xi: &Vec3) -> Mat3 {
        match self {
            CoordinateMap::Affine(a) => a.jacobian(),
            CoordinateMap::AnnulusWedge(w) => w.jacobian(xi),
            CoordinateMap::Composed { logical, outer } => {
                matmul(&outer.jacobian(&logical.apply(xi)), &logical.jacobian())
            }
        }
    }

    pub fn to_logical(&self, x: &Vec3) -> Vec3 {
        match self {
            CoordinateMap::Affine(a) => a.invert(x),
            CoordinateMap::AnnulusWedge(w) => w.invert(x),
            CoordinateMap::Composed { logical, outer } => logical.invert(&outer.to_logical(x)),
        }
    }

    /// `self ∘ inner`, merging consecutive affine factors.
    pub fn compose_logical(&self, inner: &AffineMap) -> CoordinateMap {
        match self {
            CoordinateMap::Affine(a) => CoordinateMap::Affine(a.compose(inner)),
            CoordinateMap::Composed { logical, outer } => CoordinateMap::Composed {
                logical: logical.compose(inner),
                outer: outer.clone(),
            },
            other => CoordinateMap::Composed {
                logical: inner.clone(),
                outer: Box::new(other.clone()),
            },
        }
    }

    /// Jacobian, its determinant and inverse at `xi`.
    pub fn jacobian_data(&self, xi: &Vec3) -> Result<JacobianData> {
        let dim = self.dim();
        let jacobian = self.jacobian(xi);
        match inverse(&jacobian, dim) {
            Some((inv, det)) if det > 0.0 => Ok(JacobianData {
                jacobian,
                determinant: det,
                inverse: inv,
            }),
            _ => Err(DgError::DegenerateGeometry(format!(
                "non-positive Jacobian determinant at logical point {:?}",
                &xi[..dim]
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobianData {
    pub jacobian: Mat3,
    pub determinant: f64,
    /// `inverse[j][i] = ∂ξ^j/∂x^i`
    pub inverse: Mat3,
}

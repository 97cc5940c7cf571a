//! Projections between element faces and mortars.
//!
//! Prolongation interpolates face data onto the mortar grid. Restriction is
//! its mass-conservative adjoint `R = M⁻¹ PᵀM̃` with exact (consistent)
//! one-dimensional masses, the mortar mass measured in face coordinates.
//! Summed over the mortars covering a face this gives `Σ R P = 1` exactly.
//! Lumped masses cannot provide this once the mortar is finer than the
//! face, because the lumped face mass no longer equals `PᵀM̃P`.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::basis::{gauss_nodes_weights, interpolation_matrix, lgl, Matrix1D, Memo};
use crate::error::{invalid, DgError, Result};
use crate::mesh::Coverage;

fn coverage_key(c: Coverage) -> u8 {
    match c {
        Coverage::Full => 0,
        Coverage::LowerHalf => 1,
        Coverage::UpperHalf => 2,
    }
}

/// Face coordinate of a mortar coordinate `ζ`.
pub fn face_coordinate(zeta: f64, coverage: Coverage) -> f64 {
    match coverage {
        Coverage::Full => zeta,
        Coverage::LowerHalf => 0.5 * (zeta - 1.0),
        Coverage::UpperHalf => 0.5 * (zeta + 1.0),
    }
}

fn to_dense(m: &Matrix1D) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows, m.cols, &m.entries)
}

fn from_dense(m: &DMatrix<f64>) -> Matrix1D {
    let mut out = Matrix1D::zeros(m.nrows(), m.ncols());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out[(r, c)] = m[(r, c)];
        }
    }
    out
}

static MASS: Memo<usize, Matrix1D> = Memo::new();
static PROLONG: Memo<(usize, usize, u8), Matrix1D> = Memo::new();
static RESTRICT: Memo<(usize, usize, u8), Matrix1D> = Memo::new();

/// Exact mass matrix `∫ ℓ_a ℓ_b dξ` of the `n`-point LGL Lagrange basis.
pub fn consistent_mass(n: usize) -> Result<Arc<Matrix1D>> {
    MASS.get_or_try(n, || {
        let basis = lgl(n)?;
        let quad = gauss_nodes_weights(n + 1)?;
        let values = interpolation_matrix(&basis, &quad.nodes);
        let mut m = Matrix1D::zeros(n, n);
        for a in 0..n {
            for b in 0..n {
                m[(a, b)] = (0..quad.len())
                    .map(|q| quad.weights[q] * values[(q, a)] * values[(q, b)])
                    .sum();
            }
        }
        Ok(m)
    })
}

fn check_sizes(face_n: usize, mortar_n: usize) -> Result<()> {
    if face_n < 2 {
        return invalid("faces need at least two points per dimension");
    }
    if mortar_n < face_n {
        return invalid(format!(
            "mortar with {mortar_n} points is coarser than its face with {face_n}"
        ));
    }
    Ok(())
}

/// Mortar points × face points.
pub fn prolongation_matrix(face_n: usize, mortar_n: usize, coverage: Coverage) -> Result<Arc<Matrix1D>> {
    check_sizes(face_n, mortar_n)?;
    PROLONG.get_or_try((face_n, mortar_n, coverage_key(coverage)), || {
        if face_n == mortar_n && coverage == Coverage::Full {
            return Ok(Matrix1D::identity(face_n));
        }
        let face = lgl(face_n)?;
        let mortar = lgl(mortar_n)?;
        let targets: Vec<f64> = mortar.nodes.iter().map(|&z| face_coordinate(z, coverage)).collect();
        Ok(interpolation_matrix(&face, &targets))
    })
}

/// `R = M⁻¹ PᵀM̃`: face points × mortar points. `M̃` is measured in face
/// coordinates, so it is halved for half coverage. For full coverage
/// `RP = 1`; for the two halves of a face `R_lo P_lo + R_up P_up = 1`.
pub fn restriction_matrix(face_n: usize, mortar_n: usize, coverage: Coverage) -> Result<Arc<Matrix1D>> {
    check_sizes(face_n, mortar_n)?;
    RESTRICT.get_or_try((face_n, mortar_n, coverage_key(coverage)), || {
        if face_n == mortar_n && coverage == Coverage::Full {
            return Ok(Matrix1D::identity(face_n));
        }
        let p = to_dense(&*prolongation_matrix(face_n, mortar_n, coverage)?);
        let mut mm = to_dense(&*consistent_mass(mortar_n)?);
        if coverage != Coverage::Full {
            mm *= 0.5;
        }
        let mf = to_dense(&*consistent_mass(face_n)?);
        let rhs = p.transpose() * mm;
        let r = mf.cholesky().ok_or_else(|| DgError::Numeric {
            element: usize::MAX,
            message: "face mass matrix is not positive definite".into(),
        })?;
        Ok(from_dense(&r.solve(&rhs)))
    })
}

/// Applies a 1D matrix along each face dimension of a tensor-product grid,
/// first dimension fastest.
fn apply_tensor(ops: &[Arc<Matrix1D>], n_dims: usize, data: &[f64]) -> Vec<f64> {
    match n_dims {
        0 => data.to_vec(),
        1 => ops[0].apply(data),
        _ => {
            let (a, b) = (&ops[0], &ops[1]);
            let (in0, in1) = (a.cols, b.cols);
            let (out0, out1) = (a.rows, b.rows);
            let mut tmp = vec![0.0; out0 * in1];
            for j in 0..in1 {
                for r in 0..out0 {
                    tmp[j * out0 + r] = (0..in0).map(|c| a[(r, c)] * data[j * in0 + c]).sum();
                }
            }
            let mut out = vec![0.0; out0 * out1];
            for r in 0..out1 {
                for i in 0..out0 {
                    out[r * out0 + i] = (0..in1).map(|c| b[(r, c)] * tmp[c * out0 + i]).sum();
                }
            }
            out
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionDirection {
    ToMortar,
    FromMortar,
}

/// Projection operators between one element face and one mortar.
#[derive(Debug, Clone)]
pub struct FaceProjection {
    n_dims: usize,
    face_extents: [usize; 2],
    mortar_extents: [usize; 2],
    identity: bool,
    prolong: Vec<Arc<Matrix1D>>,
    restrict: Vec<Arc<Matrix1D>>,
}

impl FaceProjection {
    /// `n_dims` is the face dimension (`d − 1`).
    pub fn new(n_dims: usize, face_extents: [usize; 2], mortar_extents: [usize; 2], coverage: [Coverage; 2]) -> Result<Self> {
        let mut prolong = Vec::new();
        let mut restrict = Vec::new();
        let mut identity = true;
        for d in 0..n_dims {
            let (f, m, c) = (face_extents[d], mortar_extents[d], coverage[d]);
            identity &= f == m && c == Coverage::Full;
            prolong.push(prolongation_matrix(f, m, c)?);
            restrict.push(restriction_matrix(f, m, c)?);
        }
        Ok(Self {
            n_dims,
            face_extents,
            mortar_extents,
            identity,
            prolong,
            restrict,
        })
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    pub fn face_len(&self) -> usize {
        self.face_extents[..self.n_dims].iter().product()
    }

    pub fn mortar_len(&self) -> usize {
        self.mortar_extents[..self.n_dims].iter().product()
    }

    pub fn prolong(&self, face: &[f64]) -> Vec<f64> {
        if self.identity {
            return face.to_vec();
        }
        apply_tensor(&self.prolong, self.n_dims, face)
    }

    /// Contribution of this mortar to the face data. Contributions of all
    /// mortars covering a face sum to the face projection.
    pub fn restrict(&self, mortar: &[f64]) -> Vec<f64> {
        if self.identity {
            return mortar.to_vec();
        }
        apply_tensor(&self.restrict, self.n_dims, mortar)
    }
}

pub fn project_between(data: &[f64], projection: &FaceProjection, direction: ProjectionDirection) -> Result<Vec<f64>> {
    let expected = match direction {
        ProjectionDirection::ToMortar => projection.face_len(),
        ProjectionDirection::FromMortar => projection.mortar_len(),
    };
    if data.len() != expected {
        return invalid(format!("expected {expected} values, got {}", data.len()));
    }
    Ok(match direction {
        ProjectionDirection::ToMortar => projection.prolong(data),
        ProjectionDirection::FromMortar => projection.restrict(data),
    })
}

//! Per-element building blocks: lumped mass, stiffness, lifting, penalty and
//! numerical fluxes.

use crate::background::Background;
use crate::basis::{lgl, lgl_differentiation, Matrix1D, NodeKind};
use crate::error::{invalid, DgError, Result};
use crate::mesh::{unflatten, Element, Side};
use crate::tensor::Mat3;

/// Stride and length of the grid line along dimension `d`.
fn line(ext: &[usize; 3], d: usize) -> (usize, usize) {
    (ext[..d].iter().product(), ext[d])
}

/// `out[p] = Σ_q D[p_d][q] f[p with p_d → q]`.
pub(crate) fn logical_derivative(ext: &[usize; 3], d: usize, diff: &Matrix1D, f: &[f64], out: &mut [f64]) {
    let (stride, n) = line(ext, d);
    for p in 0..f.len() {
        let i = (p / stride) % n;
        let base = p - i * stride;
        let row = diff.row(i);
        out[p] = (0..n).map(|q| row[q] * f[base + q * stride]).sum();
    }
}

/// `out[p] = Σ_q D[q][p_d] g[p with p_d → q]`.
pub(crate) fn logical_derivative_transpose(ext: &[usize; 3], d: usize, diff: &Matrix1D, g: &[f64], out: &mut [f64]) {
    let (stride, n) = line(ext, d);
    for p in 0..g.len() {
        let i = (p / stride) % n;
        let base = p - i * stride;
        out[p] = (0..n).map(|q| diff[(q, i)] * g[base + q * stride]).sum();
    }
}

/// Volume indices of the grid points on one face, first face dimension
/// fastest.
pub fn face_point_indices(ext: &[usize; 3], dim: usize, direction: usize, side: Side) -> Vec<usize> {
    debug_assert!(direction < dim && ext[dim..].iter().all(|&e| e == 1));
    let fixed = match side {
        Side::Lower => 0,
        Side::Upper => ext[direction] - 1,
    };
    let total: usize = ext.iter().product();
    (0..total).filter(|&p| unflatten(ext, p)[direction] == fixed).collect()
}

fn check_lgl(element: &Element) -> Result<()> {
    if element.node_kind != NodeKind::GaussLobatto {
        return Err(DgError::UnsupportedFeature(
            "mass-lumped lifting needs Gauss-Lobatto element grids".into(),
        ));
    }
    Ok(())
}

/// `M_pp = √g J ∏_i w_{p_i}`.
pub fn lumped_mass_diag(element: &Element, background: &Background) -> Result<Vec<f64>> {
    let dim = element.dim();
    let ext = element.extents();
    let sets = (0..dim).map(|d| lgl(ext[d])).collect::<Result<Vec<_>>>()?;
    let points = element.logical_points()?;
    let mut out = Vec::with_capacity(points.len());
    for (p, xi) in points.iter().enumerate() {
        let idx = unflatten(&ext, p);
        let w: f64 = (0..dim).map(|d| sets[d].weights[idx[d]]).product();
        let jac = element.jacobian_at(xi)?;
        let sqrt_g = background.metric_at(&element.map.to_physical(xi))?.sqrt_det;
        let m = sqrt_g * jac.determinant * w;
        if !(m > 0.0) {
            return Err(DgError::DegenerateGeometry("non-positive mass".into()));
        }
        out.push(m);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StiffnessForm {
    Strong,
    Weak,
}

/// Physical divergence `Σ_i Σ_j (J⁻¹)^j_i ∂_ξj F^i` of nodal fluxes, where
/// `fluxes[i]` holds `F^i` at every point.
pub(crate) fn divergence(ext: &[usize; 3], dim: usize, diff: &[&Matrix1D], inv_jac: &[Mat3], fluxes: &[&[f64]], out: &mut [f64]) {
    out.fill(0.0);
    let mut tmp = vec![0.0; out.len()];
    for (i, f) in fluxes.iter().enumerate().take(dim) {
        for j in 0..dim {
            logical_derivative(ext, j, diff[j], f, &mut tmp);
            for p in 0..out.len() {
                out[p] += inv_jac[p][j][i] * tmp[p];
            }
        }
    }
}

/// `Σ_j D_jᵀ (M Σ_i (J⁻¹)^j_i F^i)`: the stiffness transpose applied to fluxes.
pub(crate) fn weak_divergence(
    ext: &[usize; 3],
    dim: usize,
    diff: &[&Matrix1D],
    inv_jac: &[Mat3],
    mass: &[f64],
    fluxes: &[&[f64]],
    out: &mut [f64],
) {
    out.fill(0.0);
    let n = out.len();
    let mut g = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    for j in 0..dim {
        for p in 0..n {
            g[p] = mass[p] * (0..dim).map(|i| inv_jac[p][j][i] * fluxes[i][p]).sum::<f64>();
        }
        logical_derivative_transpose(ext, j, diff[j], &g, &mut tmp);
        for p in 0..n {
            out[p] += tmp[p];
        }
    }
}

/// Strong form: `M D_i F^i`. Weak form: `−(M D_i)ᵀ F^i`, so the two differ
/// by the boundary term of the discrete Gauss identity.
pub fn apply_stiffness(element: &Element, background: &Background, fluxes: &[Vec<f64>], form: StiffnessForm) -> Result<Vec<f64>> {
    let dim = element.dim();
    let n = element.num_points();
    if fluxes.len() != dim || fluxes.iter().any(|f| f.len() != n) {
        return invalid(format!("expected {dim} fluxes with {n} values each"));
    }
    let ext = element.extents();
    let diffs = (0..dim).map(|d| lgl_differentiation(ext[d])).collect::<Result<Vec<_>>>()?;
    let diff: Vec<&Matrix1D> = diffs.iter().map(|d| d.as_ref()).collect();
    let inv_jac = element
        .logical_points()?
        .iter()
        .map(|xi| element.jacobian_at(xi).map(|j| j.inverse))
        .collect::<Result<Vec<_>>>()?;
    let mass = lumped_mass_diag(element, background)?;
    let refs: Vec<&[f64]> = fluxes.iter().map(|f| f.as_slice()).collect();
    let mut out = vec![0.0; n];
    match form {
        StiffnessForm::Strong => {
            divergence(&ext, dim, &diff, &inv_jac, &refs, &mut out);
            for p in 0..n {
                out[p] *= mass[p];
            }
        }
        StiffnessForm::Weak => {
            weak_divergence(&ext, dim, &diff, &inv_jac, &mass, &refs, &mut out);
            for v in out.iter_mut() {
                *v = -*v;
            }
        }
    }
    Ok(out)
}

/// Massless lifting factor `|ñ| / w_end` at each face point.
pub(crate) fn lifting_factors(element: &Element, direction: usize, magnitudes: &[f64]) -> Result<Vec<f64>> {
    let n = element.extents()[direction];
    let w_end = lgl(n)?.weights[0];
    Ok(magnitudes.iter().map(|m| m / w_end).collect())
}

/// Lifts face values into the volume: nonzero only at the face's grid
/// points, `value · |ñ| / w_end`, multiplied by the lumped mass if `massive`.
pub fn apply_lifting(
    element: &Element,
    direction: usize,
    side: Side,
    background: &Background,
    face_values: &[f64],
    massive: bool,
) -> Result<Vec<f64>> {
    check_lgl(element)?;
    let dim = element.dim();
    let ext = element.extents();
    let indices = face_point_indices(&ext, dim, direction, side);
    if face_values.len() != indices.len() {
        return invalid(format!("expected {} face values, got {}", indices.len(), face_values.len()));
    }
    let points = element.logical_points()?;
    let face_points: Vec<_> = indices.iter().map(|&p| points[p]).collect();
    let fg = background.face_geometry(element, direction, side, &face_points)?;
    let factors = lifting_factors(element, direction, &fg.magnitudes)?;
    let mass = if massive {
        Some(lumped_mass_diag(element, background)?)
    } else {
        None
    };
    let mut out = vec![0.0; element.num_points()];
    for (q, &p) in indices.iter().enumerate() {
        let m = mass.as_ref().map_or(1.0, |m| m[p]);
        out[p] = face_values[q] * factors[q] * m;
    }
    Ok(out)
}

/// `σ = C (max(p) + 1)² / min(h)` pointwise.
pub fn penalty_sigma(p_int: usize, p_ext: usize, h_int: &[f64], h_ext: &[f64], penalty: f64) -> Result<Vec<f64>> {
    if !(penalty >= 1.0) {
        return invalid(format!("penalty parameter must be at least 1, got {penalty}"));
    }
    sigma_unchecked(p_int, p_ext, h_int, h_ext, penalty)
}

pub(crate) fn sigma_unchecked(p_int: usize, p_ext: usize, h_int: &[f64], h_ext: &[f64], penalty: f64) -> Result<Vec<f64>> {
    if h_int.len() != h_ext.len() {
        return Err(DgError::Topology("penalty sizes sampled on different grids".into()));
    }
    let p = p_int.max(p_ext) as f64 + 1.0;
    h_int
        .iter()
        .zip(h_ext)
        .map(|(&a, &b)| {
            let h = a.min(b);
            if h > 0.0 && h.is_finite() {
                Ok(penalty * p * p / h)
            } else {
                Err(DgError::DegenerateGeometry(format!("non-positive element size {h}")))
            }
        })
        .collect()
}

fn check_same(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(DgError::Topology("boundary data sampled on different grids".into()));
    }
    Ok(())
}

/// `½ [n^int F_v(u^int) − n^ext F_v(u^ext)]`.
pub fn auxiliary_numerical_flux(interior: &[f64], exterior: &[f64]) -> Result<Vec<f64>> {
    check_same(interior, exterior)?;
    Ok(interior.iter().zip(exterior).map(|(i, e)| 0.5 * (i - e)).collect())
}

/// `½ [deriv^int − deriv^ext] − σ [pen^int − pen^ext]`, per component with
/// `σ` shared by all components at a point.
pub fn primal_numerical_flux(
    derivative_int: &[f64],
    derivative_ext: &[f64],
    penalty_int: &[f64],
    penalty_ext: &[f64],
    sigma: &[f64],
) -> Result<Vec<f64>> {
    check_same(derivative_int, derivative_ext)?;
    check_same(penalty_int, penalty_ext)?;
    check_same(derivative_int, penalty_int)?;
    let nq = sigma.len();
    if nq == 0 || derivative_int.len() % nq != 0 {
        return Err(DgError::Topology("penalty does not match the boundary data".into()));
    }
    Ok((0..derivative_int.len())
        .map(|k| {
            0.5 * (derivative_int[k] - derivative_ext[k]) - sigma[k % nq] * (penalty_int[k] - penalty_ext[k])
        })
        .collect())
}

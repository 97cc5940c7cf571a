//! The compact DG operator with a generalized internal-penalty flux.
//!
//! Application runs in two element-parallel phases. Phase one computes the
//! auxiliary fluxes of `u` and projects boundary data onto each face. All of
//! that data depends on `u` alone, so a single exchange suffices. Phase two
//! reconstructs the auxiliary variable, evaluates primal fluxes and sources
//! and combines them with the numerical flux on every face or mortar.

mod boundary;
mod kernels;

pub use boundary::{
    exterior_ghost_data, BcKind, BoundaryCondition, BoundaryConditions, BoundaryData, BoundaryField, TraceMap,
};
pub use kernels::{
    apply_lifting, apply_stiffness, auxiliary_numerical_flux, face_point_indices, lumped_mass_diag, penalty_sigma,
    primal_numerical_flux, StiffnessForm,
};

use std::sync::Arc;

use rayon::prelude::*;

use crate::background::Background;
use crate::basis::{lgl_differentiation, Matrix1D};
use crate::error::{invalid, DgError, Result};
use crate::mesh::{face_from_index, face_index, FaceNeighbors, Mesh};
use crate::mortars::FaceProjection;
use crate::systems::{EllipticSystem, PointGeometry};
use crate::tensor::{Mat3, Vec3};
use kernels::{divergence, lifting_factors, sigma_unchecked, weak_divergence};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Form {
    /// Strong form in both equations.
    Strong,
    /// Strong auxiliary equation, weak primal equation.
    StrongWeak,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorConfig {
    pub form: Form,
    pub massive: bool,
    /// Penalty parameter `C`. Values below 1 are accepted only so the role
    /// of the penalty can be studied.
    pub penalty: f64,
}

impl Default for OperatorConfig {
    fn default() -> Self {
        Self {
            form: Form::Strong,
            massive: true,
            penalty: 1.0,
        }
    }
}

struct FaceGeom {
    direction: usize,
    indices: Vec<usize>,
    normals: Vec<Vec3>,
    sizes: Vec<f64>,
    lift: Vec<f64>,
}

struct ElementGeom {
    ext: [usize; 3],
    n: usize,
    points: Vec<PointGeometry>,
    inv_jac: Vec<Mat3>,
    mass: Vec<f64>,
    diff: Vec<Arc<Matrix1D>>,
    faces: Vec<FaceGeom>,
}

struct MortarOps {
    /// Projection for each side of the mortar.
    proj: [FaceProjection; 2],
    sigma: Vec<f64>,
}

struct Linearization {
    u0: Vec<f64>,
    v0: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    /// Nonlinear sources and inhomogeneous boundary data.
    Full,
    /// Linearized sources and boundary data.
    Linearized,
}

/// Phase-one results of one element.
struct Local {
    u: Vec<f64>,
    /// `∂_i F^i_v(u) − S̃_v(u)`
    w: Vec<f64>,
    faces: Vec<BoundaryData>,
}

struct ElementOut {
    primal: Vec<f64>,
    auxiliary: Option<Vec<f64>>,
    v: Vec<f64>,
}

pub struct DgOperator {
    mesh: Mesh,
    system: Arc<dyn EllipticSystem>,
    background: Background,
    bcs: BoundaryConditions,
    config: OperatorConfig,
    elements: Vec<ElementGeom>,
    mortars: Vec<MortarOps>,
    linearization: Option<Linearization>,
}

fn read_point(local: &[f64], ncomp: usize, n: usize, p: usize, out: &mut [f64]) {
    for c in 0..ncomp {
        out[c] = local[c * n + p];
    }
}

impl DgOperator {
    pub fn new(
        mesh: Mesh,
        system: Arc<dyn EllipticSystem>,
        background: Option<Background>,
        bcs: BoundaryConditions,
        config: OperatorConfig,
    ) -> Result<Self> {
        system.check_background(background.as_ref())?;
        if system.dim() != mesh.dim() {
            return Err(DgError::Configuration(format!(
                "system {} is {}-dimensional but the mesh is {}-dimensional",
                system.name(),
                system.dim(),
                mesh.dim()
            )));
        }
        if !(config.penalty >= 0.0) || !config.penalty.is_finite() {
            return invalid(format!("invalid penalty parameter {}", config.penalty));
        }
        let background = background.unwrap_or_else(|| Background::flat(mesh.dim()));
        for (_, _, _, tag) in mesh.external_faces() {
            bcs.get(tag)?.validate()?;
        }
        let elements = (0..mesh.elements().len())
            .into_par_iter()
            .map(|k| Self::element_geometry(&mesh, k, system.as_ref(), &background))
            .collect::<Result<Vec<_>>>()?;
        let mut mortars = Vec::with_capacity(mesh.mortar_topology().len());
        let fdim = mesh.dim() - 1;
        for m in mesh.mortar_topology() {
            let mut proj = Vec::with_capacity(2);
            let mut sizes = Vec::with_capacity(2);
            let mut degrees = Vec::with_capacity(2);
            for s in &m.sides {
                let e = &mesh.elements()[s.element];
                let ext = e.extents();
                let mut face_ext = [1; 2];
                let mut slot = 0;
                for d in (0..mesh.dim()).filter(|&d| d != s.direction) {
                    face_ext[slot] = ext[d];
                    slot += 1;
                }
                let p = FaceProjection::new(fdim, face_ext, m.extents, s.coverage)?;
                let face = &elements[s.element].faces[face_index(s.direction, s.side)];
                sizes.push(p.prolong(&face.sizes));
                degrees.push(e.degrees[s.direction]);
                proj.push(p);
            }
            let sigma = sigma_unchecked(degrees[0], degrees[1], &sizes[0], &sizes[1], config.penalty)?;
            let p1 = proj.pop().expect("two sides");
            let p0 = proj.pop().expect("two sides");
            mortars.push(MortarOps { proj: [p0, p1], sigma });
        }
        Ok(Self {
            mesh,
            system,
            background,
            bcs,
            config,
            elements,
            mortars,
            linearization: None,
        })
    }

    fn element_geometry(mesh: &Mesh, k: usize, system: &dyn EllipticSystem, bg: &Background) -> Result<ElementGeom> {
        let e = &mesh.elements()[k];
        let dim = mesh.dim();
        let ext = e.extents();
        let logical = e.logical_points()?;
        let mut points = Vec::with_capacity(logical.len());
        let mut inv_jac = Vec::with_capacity(logical.len());
        for xi in &logical {
            let x = e.map.to_physical(xi);
            points.push(PointGeometry::new(system, bg, x)?);
            inv_jac.push(e.jacobian_at(xi)?.inverse);
        }
        let mass = lumped_mass_diag(e, bg)?;
        let diff = (0..dim).map(|d| lgl_differentiation(ext[d])).collect::<Result<Vec<_>>>()?;
        let mut faces = Vec::with_capacity(2 * dim);
        for f in 0..2 * dim {
            let (direction, side) = face_from_index(f);
            let indices = face_point_indices(&ext, dim, direction, side);
            let fpts: Vec<Vec3> = indices.iter().map(|&p| logical[p]).collect();
            let fg = bg.face_geometry(e, direction, side, &fpts)?;
            let lift = lifting_factors(e, direction, &fg.magnitudes)?;
            faces.push(FaceGeom {
                direction,
                indices,
                normals: fg.normals,
                sizes: fg.magnitudes.iter().map(|m| 2.0 / m).collect(),
                lift,
            });
        }
        Ok(ElementGeom {
            ext,
            n: logical.len(),
            points,
            inv_jac,
            mass,
            diff,
            faces,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn system(&self) -> &Arc<dyn EllipticSystem> {
        &self.system
    }

    pub fn background(&self) -> &Background {
        &self.background
    }

    pub fn config(&self) -> &OperatorConfig {
        &self.config
    }

    pub fn boundary_conditions(&self) -> &BoundaryConditions {
        &self.bcs
    }

    /// Length of a primal field vector.
    pub fn n_primal_dofs(&self) -> usize {
        self.system.n_primal() * self.mesh.num_points()
    }

    /// Length of an auxiliary field vector.
    pub fn n_auxiliary_dofs(&self) -> usize {
        self.system.n_auxiliary() * self.mesh.num_points()
    }

    /// Lumped mass at every collocation point, in mesh order.
    pub fn mass(&self) -> Vec<f64> {
        self.elements.iter().flat_map(|g| g.mass.iter().copied()).collect()
    }

    pub fn collocation_points(&self) -> Vec<Vec3> {
        self.elements.iter().flat_map(|g| g.points.iter().map(|p| p.x)).collect()
    }

    /// Samples a field with `ncomp` components at the collocation points.
    pub fn sample(&self, ncomp: usize, f: impl Fn(&Vec3) -> Vec<f64>) -> Vec<f64> {
        let pts = self.collocation_points();
        let n = pts.len();
        let mut out = vec![0.0; ncomp * n];
        for (p, x) in pts.iter().enumerate() {
            let v = f(x);
            for c in 0..ncomp {
                out[c * n + p] = v[c];
            }
        }
        out
    }

    pub fn has_linearization_point(&self) -> bool {
        self.linearization.is_some()
    }

    /// Fixes the point about which [`DgOperator::apply`] linearizes.
    pub fn set_linearization_point(&mut self, u0: &[f64]) -> Result<()> {
        self.check_len(u0, self.n_primal_dofs())?;
        let v0 = self.reconstruct_auxiliary(u0)?;
        self.linearization = Some(Linearization { u0: u0.to_vec(), v0 });
        Ok(())
    }

    pub fn clear_linearization_point(&mut self) {
        self.linearization = None;
    }

    fn check_len(&self, x: &[f64], n: usize) -> Result<()> {
        if x.len() != n {
            return invalid(format!("expected a field of length {n}, got {}", x.len()));
        }
        Ok(())
    }

    fn check_linearizable(&self) -> Result<()> {
        if !self.system.is_linear() && self.linearization.is_none() {
            return Err(DgError::Sequencing(
                "a nonlinear system needs a linearization point before linearized application".into(),
            ));
        }
        Ok(())
    }

    /// Linear (or linearized) operator with homogeneous boundary data.
    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_len(u, self.n_primal_dofs())?;
        self.check_linearizable()?;
        Ok(self.evaluate(u, None, Mode::Linearized)?.0)
    }

    /// Full operator `A(u)` including nonlinear sources and inhomogeneous
    /// boundary data.
    pub fn apply_nonlinear(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_len(u, self.n_primal_dofs())?;
        Ok(self.evaluate(u, None, Mode::Full)?.0)
    }

    /// First-order operator over `(v, u)`, auxiliary block first, with
    /// linearized boundary data. Its Schur complement on the primal block
    /// is the compact operator.
    pub fn apply_first_order(&self, vu: &[f64]) -> Result<Vec<f64>> {
        let na = self.n_auxiliary_dofs();
        self.check_len(vu, na + self.n_primal_dofs())?;
        self.check_linearizable()?;
        let (v, u) = vu.split_at(na);
        let (primal, aux, _) = self.evaluate(u, Some(v), Mode::Linearized)?;
        let mut out = aux.expect("auxiliary rows requested");
        out.extend(primal);
        Ok(out)
    }

    /// Auxiliary variable reconstructed from `u` with full boundary data.
    pub fn reconstruct_auxiliary(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_len(u, self.n_primal_dofs())?;
        Ok(self.evaluate(u, None, Mode::Full)?.2)
    }

    /// `M f` in massive mode, `f` otherwise.
    pub fn fixed_source_term(&self, f: impl Fn(&Vec3) -> Result<Vec<f64>>) -> Result<Vec<f64>> {
        let np = self.system.n_primal();
        let n = self.mesh.num_points();
        let mut out = vec![0.0; np * n];
        let mut p = 0;
        for g in &self.elements {
            for (q, pt) in g.points.iter().enumerate() {
                let v = f(&pt.x)?;
                if v.len() != np {
                    return invalid("fixed source has the wrong number of components");
                }
                let m = if self.config.massive { g.mass[q] } else { 1.0 };
                for c in 0..np {
                    out[c * n + p] = m * v[c];
                }
                p += 1;
            }
        }
        Ok(out)
    }

    /// Right-hand side `M f − A(0)` for linear problems, so that
    /// `apply(u) = rhs` solves the inhomogeneous problem.
    pub fn build_rhs(&self, f: impl Fn(&Vec3) -> Result<Vec<f64>>) -> Result<Vec<f64>> {
        let mut b = self.fixed_source_term(f)?;
        let a0 = self.apply_nonlinear(&vec![0.0; self.n_primal_dofs()])?;
        for (b, a) in b.iter_mut().zip(&a0) {
            *b -= a;
        }
        Ok(b)
    }

    fn gather(&self, k: usize, global: &[f64], ncomp: usize) -> Vec<f64> {
        let n_total = self.mesh.num_points();
        let off = self.mesh.offsets()[k];
        let n = self.elements[k].n;
        let mut out = vec![0.0; ncomp * n];
        for c in 0..ncomp {
            out[c * n..(c + 1) * n].copy_from_slice(&global[c * n_total + off..c * n_total + off + n]);
        }
        out
    }

    fn scatter(&self, k: usize, local: &[f64], ncomp: usize, global: &mut [f64]) {
        let n_total = self.mesh.num_points();
        let off = self.mesh.offsets()[k];
        let n = self.elements[k].n;
        for c in 0..ncomp {
            global[c * n_total + off..c * n_total + off + n].copy_from_slice(&local[c * n..(c + 1) * n]);
        }
    }

    fn normal_aux_flux(&self, u: &[f64], n: &Vec3, buf: &mut [f64]) -> Vec<f64> {
        let (d, na) = (self.system.dim(), self.system.n_auxiliary());
        self.system.auxiliary_fluxes(u, buf);
        (0..na).map(|a| (0..d).map(|i| n[i] * buf[i * na + a]).sum()).collect()
    }

    fn normal_primal_flux(&self, v: &[f64], pt: &PointGeometry, n: &Vec3, buf: &mut [f64]) -> Vec<f64> {
        let (d, np) = (self.system.dim(), self.system.n_primal());
        self.system.primal_fluxes(v, pt, buf);
        (0..np).map(|c| (0..d).map(|i| n[i] * buf[i * np + c]).sum()).collect()
    }

    fn phase_one(&self, k: usize, u: &[f64], mode: Mode) -> Result<Local> {
        let sys = self.system.as_ref();
        let g = &self.elements[k];
        let (d, na, np, n) = (sys.dim(), sys.n_auxiliary(), sys.n_primal(), g.n);
        let u_loc = self.gather(k, u, np);
        let u0_loc = self.linearization.as_ref().map(|l| self.gather(k, &l.u0, np));

        let mut flux = vec![0.0; d * na * n];
        let mut up = vec![0.0; np];
        let mut buf = vec![0.0; d * na];
        for p in 0..n {
            read_point(&u_loc, np, n, p, &mut up);
            sys.auxiliary_fluxes(&up, &mut buf);
            for (ia, v) in buf.iter().enumerate() {
                flux[ia * n + p] = *v;
            }
        }
        let diff: Vec<&Matrix1D> = g.diff.iter().map(|m| m.as_ref()).collect();
        let mut w = vec![0.0; na * n];
        let mut out = vec![0.0; n];
        for a in 0..na {
            let comps: Vec<&[f64]> = (0..d).map(|i| &flux[(i * na + a) * n..(i * na + a + 1) * n]).collect();
            divergence(&g.ext, d, &diff, &g.inv_jac, &comps, &mut out);
            w[a * n..(a + 1) * n].copy_from_slice(&out);
        }
        let mut s = vec![0.0; na];
        let mut u0p = vec![0.0; np];
        for p in 0..n {
            read_point(&u_loc, np, n, p, &mut up);
            match (mode, &u0_loc) {
                (Mode::Linearized, Some(u0)) => {
                    read_point(u0, np, n, p, &mut u0p);
                    sys.linearized_auxiliary_sources(&u0p, &up, &g.points[p], &mut s);
                }
                (Mode::Linearized, None) => sys.linearized_auxiliary_sources(&up, &up, &g.points[p], &mut s),
                (Mode::Full, _) => sys.auxiliary_sources(&up, &g.points[p], &mut s),
            }
            for a in 0..na {
                w[a * n + p] -= s[a];
            }
        }

        let mut faces = Vec::with_capacity(g.faces.len());
        let mut pbuf = vec![0.0; d * np];
        let mut wp = vec![0.0; na];
        for face in &g.faces {
            let nq = face.indices.len();
            let mut data = BoundaryData {
                nfv: vec![0.0; na * nq],
                derivative: vec![0.0; np * nq],
                penalty: vec![0.0; np * nq],
            };
            for (q, &p) in face.indices.iter().enumerate() {
                let nrm = &face.normals[q];
                let mut nfv = vec![0.0; na];
                for (a, v) in nfv.iter_mut().enumerate() {
                    *v = (0..d).map(|i| nrm[i] * flux[(i * na + a) * n + p]).sum();
                    data.nfv[a * nq + q] = *v;
                }
                read_point(&w, na, n, p, &mut wp);
                let deriv = self.normal_primal_flux(&wp, &g.points[p], nrm, &mut pbuf);
                let pen = self.normal_primal_flux(&nfv, &g.points[p], nrm, &mut pbuf);
                for c in 0..np {
                    data.derivative[c * nq + q] = deriv[c];
                    data.penalty[c * nq + q] = pen[c];
                }
            }
            faces.push(data);
        }
        Ok(Local { u: u_loc, w, faces })
    }

    /// Numerical fluxes `(star_v, star_u)` on face `f` of element `k`,
    /// sampled at the face's own points.
    fn face_fluxes(&self, k: usize, f: usize, locals: &[Local], mode: Mode) -> Result<(Vec<f64>, Vec<f64>)> {
        let sys = self.system.as_ref();
        let (na, np) = (sys.n_auxiliary(), sys.n_primal());
        let g = &self.elements[k];
        let face = &g.faces[f];
        let nq = face.indices.len();
        let own = &locals[k].faces[f];
        match &self.mesh.topology().faces[k][f] {
            FaceNeighbors::External(tag) => {
                let bc = self.bcs.get(tag)?;
                let n = g.n;
                let u0 = match (mode, &self.linearization) {
                    (Mode::Linearized, Some(l)) if bc.is_trace_linearized() => Some(self.gather(k, &l.u0, np)),
                    _ => None,
                };
                let mut boundary = Vec::with_capacity(nq);
                let mut tr = vec![0.0; np];
                let mut tr0 = vec![0.0; np];
                for (q, &p) in face.indices.iter().enumerate() {
                    read_point(&locals[k].u, np, n, p, &mut tr);
                    let (x, nrm) = (&g.points[p].x, &face.normals[q]);
                    boundary.push(match mode {
                        Mode::Full => bc.resolve(x, nrm, &tr),
                        Mode::Linearized => {
                            match &u0 {
                                Some(u0) => read_point(u0, np, n, p, &mut tr0),
                                None => tr0.fill(0.0),
                            }
                            bc.linearize(x, nrm, &tr0, &tr)
                        }
                    });
                }
                let mut abuf = vec![0.0; sys.dim() * na];
                let mut pbuf = vec![0.0; sys.dim() * np];
                let ext = exterior_ghost_data(
                    own,
                    &boundary,
                    na,
                    np,
                    |q, ub| self.normal_aux_flux(ub, &face.normals[q], &mut abuf),
                    |q, nfv| {
                        let flipped = face.normals[q].map(|c| -c);
                        self.normal_primal_flux(nfv, &g.points[face.indices[q]], &flipped, &mut pbuf)
                    },
                );
                let p = self.mesh.elements()[k].degrees[face.direction];
                let sigma = sigma_unchecked(p, p, &face.sizes, &face.sizes, self.config.penalty)?;
                let star_v = auxiliary_numerical_flux(&own.nfv, &ext.nfv)?;
                let star_u =
                    primal_numerical_flux(&own.derivative, &ext.derivative, &own.penalty, &ext.penalty, &sigma)?;
                Ok((star_v, star_u))
            }
            FaceNeighbors::Internal(refs) => {
                let mut star_v = vec![0.0; na * nq];
                let mut star_u = vec![0.0; np * nq];
                for r in refs {
                    let ops = &self.mortars[r.mortar];
                    let other = &self.mesh.mortar_topology()[r.mortar].sides[1 - r.slot];
                    let theirs = &locals[other.element].faces[face_index(other.direction, other.side)];
                    let (own_p, their_p) = (&ops.proj[r.slot], &ops.proj[1 - r.slot]);
                    let nm = own_p.mortar_len();
                    let onto = |proj: &FaceProjection, data: &[f64], ncomp: usize| -> Vec<f64> {
                        let nf = proj.face_len();
                        (0..ncomp).flat_map(|c| proj.prolong(&data[c * nf..(c + 1) * nf])).collect()
                    };
                    let sv: Vec<f64> = auxiliary_numerical_flux(&onto(own_p, &own.nfv, na), &onto(their_p, &theirs.nfv, na))?;
                    let su = primal_numerical_flux(
                        &onto(own_p, &own.derivative, np),
                        &onto(their_p, &theirs.derivative, np),
                        &onto(own_p, &own.penalty, np),
                        &onto(their_p, &theirs.penalty, np),
                        &ops.sigma,
                    )?;
                    for (star, mortar, ncomp) in [(&mut star_v, &sv, na), (&mut star_u, &su, np)] {
                        for c in 0..ncomp {
                            let back = own_p.restrict(&mortar[c * nm..(c + 1) * nm]);
                            for (s, b) in star[c * nq..(c + 1) * nq].iter_mut().zip(&back) {
                                *s += b;
                            }
                        }
                    }
                }
                Ok((star_v, star_u))
            }
        }
    }

    fn phase_two(&self, k: usize, locals: &[Local], v_in: Option<&[f64]>, mode: Mode) -> Result<ElementOut> {
        let sys = self.system.as_ref();
        let g = &self.elements[k];
        let (d, na, np, n) = (sys.dim(), sys.n_auxiliary(), sys.n_primal(), g.n);
        let local = &locals[k];
        let mut stars = Vec::with_capacity(g.faces.len());
        for f in 0..g.faces.len() {
            stars.push(self.face_fluxes(k, f, locals, mode)?);
        }

        // auxiliary variable and, for the first-order operator, its residual
        let mut reconstructed = local.w.clone();
        for (f, (face, (star_v, _))) in g.faces.iter().zip(&stars).enumerate() {
            let nq = face.indices.len();
            for (q, &p) in face.indices.iter().enumerate() {
                for a in 0..na {
                    let jump = star_v[a * nq + q] - local.faces[f].nfv[a * nq + q];
                    reconstructed[a * n + p] += face.lift[q] * jump;
                }
            }
        }
        // the auxiliary residual is `M (v − w − L(star_v − n·F_v))`
        let (v, mut auxiliary) = match v_in {
            Some(v_global) => {
                let v = self.gather(k, v_global, na);
                let res: Vec<f64> = (0..na * n).map(|i| g.mass[i % n] * (v[i] - reconstructed[i])).collect();
                (v, Some(res))
            }
            None => (reconstructed, None),
        };

        let mut fu = vec![0.0; d * np * n];
        let mut src = vec![0.0; np * n];
        let mut vp = vec![0.0; na];
        let mut up = vec![0.0; np];
        let mut buf = vec![0.0; d * np];
        let mut sbuf = vec![0.0; np];
        let lin = match mode {
            Mode::Linearized => self
                .linearization
                .as_ref()
                .map(|l| (self.gather(k, &l.u0, np), self.gather(k, &l.v0, na))),
            Mode::Full => None,
        };
        let mut u0p = vec![0.0; np];
        let mut v0p = vec![0.0; na];
        for p in 0..n {
            read_point(&v, na, n, p, &mut vp);
            read_point(&local.u, np, n, p, &mut up);
            sys.primal_fluxes(&vp, &g.points[p], &mut buf);
            for (ic, val) in buf.iter().enumerate() {
                fu[ic * n + p] = *val;
            }
            match (mode, &lin) {
                (Mode::Full, _) => sys.primal_sources(&up, &vp, &g.points[p], &mut sbuf),
                (Mode::Linearized, Some((u0, v0))) => {
                    read_point(u0, np, n, p, &mut u0p);
                    read_point(v0, na, n, p, &mut v0p);
                    sys.linearized_primal_sources(&u0p, &v0p, &up, &vp, &g.points[p], &mut sbuf);
                }
                (Mode::Linearized, None) => {
                    sys.linearized_primal_sources(&up, &vp, &up, &vp, &g.points[p], &mut sbuf)
                }
            }
            for c in 0..np {
                src[c * n + p] = sbuf[c];
            }
        }

        let diff: Vec<&Matrix1D> = g.diff.iter().map(|m| m.as_ref()).collect();
        let mut primal = vec![0.0; np * n];
        let mut out = vec![0.0; n];
        for c in 0..np {
            let comps: Vec<&[f64]> = (0..d).map(|i| &fu[(i * np + c) * n..(i * np + c + 1) * n]).collect();
            let r = &mut primal[c * n..(c + 1) * n];
            match self.config.form {
                Form::Strong => {
                    divergence(&g.ext, d, &diff, &g.inv_jac, &comps, &mut out);
                    for p in 0..n {
                        r[p] = g.mass[p] * (src[c * n + p] - out[p]);
                    }
                }
                Form::StrongWeak => {
                    weak_divergence(&g.ext, d, &diff, &g.inv_jac, &g.mass, &comps, &mut out);
                    for p in 0..n {
                        r[p] = out[p] + g.mass[p] * src[c * n + p];
                    }
                }
            }
        }
        for (face, (_, star_u)) in g.faces.iter().zip(&stars) {
            let nq = face.indices.len();
            for (q, &p) in face.indices.iter().enumerate() {
                let nrm = &face.normals[q];
                let scale = g.mass[p] * face.lift[q];
                for c in 0..np {
                    let mut correction = star_u[c * nq + q];
                    if self.config.form == Form::Strong {
                        correction -= (0..d).map(|i| nrm[i] * fu[(i * np + c) * n + p]).sum::<f64>();
                    }
                    primal[c * n + p] -= scale * correction;
                }
            }
        }
        if !self.config.massive {
            for (i, r) in primal.iter_mut().enumerate() {
                *r /= g.mass[i % n];
            }
            if let Some(res) = auxiliary.as_mut() {
                for (i, r) in res.iter_mut().enumerate() {
                    *r /= g.mass[i % n];
                }
            }
        }
        let finite = primal.iter().chain(auxiliary.iter().flatten()).chain(&v).all(|x| x.is_finite());
        if !finite {
            return Err(DgError::Numeric {
                element: k,
                message: "non-finite value in operator application".into(),
            });
        }
        Ok(ElementOut { primal, auxiliary, v })
    }

    /// Returns the primal residual, the auxiliary residual (only with
    /// `v_in`) and the auxiliary variable.
    fn evaluate(&self, u: &[f64], v_in: Option<&[f64]>, mode: Mode) -> Result<(Vec<f64>, Option<Vec<f64>>, Vec<f64>)> {
        let ne = self.mesh.elements().len();
        let locals = (0..ne)
            .into_par_iter()
            .map(|k| self.phase_one(k, u, mode))
            .collect::<Result<Vec<_>>>()?;
        let outs = (0..ne)
            .into_par_iter()
            .map(|k| self.phase_two(k, &locals, v_in, mode))
            .collect::<Result<Vec<_>>>()?;
        let (na, np) = (self.system.n_auxiliary(), self.system.n_primal());
        let mut primal = vec![0.0; self.n_primal_dofs()];
        let mut v = vec![0.0; self.n_auxiliary_dofs()];
        let mut aux = v_in.map(|_| vec![0.0; self.n_auxiliary_dofs()]);
        for (k, out) in outs.iter().enumerate() {
            self.scatter(k, &out.primal, np, &mut primal);
            self.scatter(k, &out.v, na, &mut v);
            if let (Some(a), Some(res)) = (aux.as_mut(), out.auxiliary.as_ref()) {
                self.scatter(k, res, na, a);
            }
        }
        Ok((primal, aux, v))
    }
}

#[cfg(test)]
mod tests;

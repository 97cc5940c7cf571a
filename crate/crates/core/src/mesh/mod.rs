//! Deformed-cube domain decomposition.
//!
//! A mesh is a set of blocks, each carrying a map from the reference cube,
//! covered by elements obtained through repeated logical bisection. Element
//! ids record the bisection path per dimension, so neighbor relations and
//! mortar coverage are decided from ids alone. Neighboring blocks must share
//! logical-axis orientation.

mod map;
mod topology;

use std::fmt::Write as _;
use std::sync::Arc;

pub use map::{AffineMap, CoordinateMap, JacobianData, WedgeMap};
pub use topology::{Coverage, FaceNeighbors, Mortar, MortarRef, MortarSide, Topology};

use crate::basis::{self, NodeKind};
use crate::error::{invalid, DgError, Result};
use crate::tensor::{norm, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Lower,
    Upper,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Lower => -1.0,
            Side::Upper => 1.0,
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::Lower => Side::Upper,
            Side::Upper => Side::Lower,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Side::Lower => 0,
            Side::Upper => 1,
        }
    }
}

/// Face index convention used throughout: `2 * direction + side`.
pub fn face_index(direction: usize, side: Side) -> usize {
    2 * direction + side.index()
}

pub fn face_from_index(face: usize) -> (usize, Side) {
    let side = if face % 2 == 0 { Side::Lower } else { Side::Upper };
    (face / 2, side)
}

/// One step of the bisection path along a dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Segment {
    pub level: u32,
    pub index: u64,
}

impl Segment {
    /// Extent within the block in `[0, 1]`; exact in binary floating point.
    pub fn bounds(self) -> (f64, f64) {
        let scale = (1u64 << self.level) as f64;
        (self.index as f64 / scale, (self.index + 1) as f64 / scale)
    }

    pub fn children(self) -> [Segment; 2] {
        [
            Segment {
                level: self.level + 1,
                index: 2 * self.index,
            },
            Segment {
                level: self.level + 1,
                index: 2 * self.index + 1,
            },
        ]
    }

    fn logical_interval(self) -> (f64, f64) {
        let (lo, hi) = self.bounds();
        (2.0 * lo - 1.0, 2.0 * hi - 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ElementId {
    pub block: usize,
    pub segments: [Segment; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub id: ElementId,
    /// Polynomial degree per dimension; `degrees[d] + 1` grid points.
    pub degrees: [usize; 3],
    pub map: CoordinateMap,
    pub node_kind: NodeKind,
}

impl Element {
    pub fn dim(&self) -> usize {
        self.map.dim()
    }

    /// Grid points per dimension, padded with 1 for unused dimensions.
    pub fn extents(&self) -> [usize; 3] {
        let mut e = [1; 3];
        for d in 0..self.dim() {
            e[d] = self.degrees[d] + 1;
        }
        e
    }

    pub fn num_points(&self) -> usize {
        self.extents().iter().product()
    }

    /// Logical coordinates of all grid points, first dimension fastest.
    pub fn logical_points(&self) -> Result<Vec<Vec3>> {
        let dim = self.dim();
        let ext = self.extents();
        let mut sets = Vec::with_capacity(dim);
        for d in 0..dim {
            sets.push(basis::lgl(ext[d])?);
        }
        let mut out = Vec::with_capacity(self.num_points());
        for p in 0..self.num_points() {
            let idx = unflatten(&ext, p);
            let mut xi = [0.0; 3];
            for d in 0..dim {
                xi[d] = sets[d].nodes[idx[d]];
            }
            out.push(xi);
        }
        Ok(out)
    }

    pub fn jacobian_at(&self, xi: &Vec3) -> Result<JacobianData> {
        self.map.jacobian_data(xi)
    }

    /// `ñ_i = sgn(ξ^j) (J⁻¹)^j_i` on the face orthogonal to `direction`.
    pub fn unnormalized_face_normal(&self, direction: usize, side: Side, xi: &Vec3) -> Result<Vec3> {
        if direction >= self.dim() {
            return invalid(format!("direction {direction} out of range"));
        }
        let jac = self.jacobian_at(xi)?;
        let mut n = [0.0; 3];
        for i in 0..self.dim() {
            n[i] = side.sign() * jac.inverse[direction][i];
        }
        Ok(n)
    }
}

/// Dimension-major flattening of a grid index, first dimension fastest.
pub fn flatten(extents: &[usize; 3], idx: &[usize; 3]) -> usize {
    idx[0] + extents[0] * (idx[1] + extents[1] * idx[2])
}

pub fn unflatten(extents: &[usize; 3], p: usize) -> [usize; 3] {
    [
        p % extents[0],
        (p / extents[0]) % extents[1],
        p / (extents[0] * extents[1]),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub enum BlockFace {
    Boundary(String),
    Neighbor(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub map: CoordinateMap,
    /// `faces[direction][side]`
    pub faces: Vec<[BlockFace; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefinementMode {
    H,
    P,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    dim: usize,
    blocks: Arc<Vec<Block>>,
    elements: Vec<Element>,
    topology: Topology,
    offsets: Vec<usize>,
}

impl Mesh {
    /// Assembles a mesh from blocks and elements, sorting elements into a
    /// canonical order and building the face topology.
    pub fn new(dim: usize, blocks: Vec<Block>, elements: Vec<Element>) -> Result<Self> {
        Self::from_parts(dim, Arc::new(blocks), elements)
    }

    fn from_parts(dim: usize, blocks: Arc<Vec<Block>>, mut elements: Vec<Element>) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return invalid(format!("dimension must be 1, 2 or 3, got {dim}"));
        }
        if elements.is_empty() {
            return invalid("a mesh needs at least one element");
        }
        for block in blocks.iter() {
            if block.map.dim() != dim || block.faces.len() != dim {
                return invalid("block dimension does not match mesh dimension");
            }
            for faces in &block.faces {
                for f in faces {
                    if let BlockFace::Neighbor(b) = f {
                        if *b >= blocks.len() {
                            return Err(DgError::Topology(format!("unknown neighbor block {b}")));
                        }
                    }
                }
            }
        }
        for e in &elements {
            if e.id.block >= blocks.len() {
                return Err(DgError::Topology(format!("element refers to unknown block {}", e.id.block)));
            }
            if e.dim() != dim {
                return invalid("element dimension does not match mesh dimension");
            }
            if e.degrees[..dim].iter().any(|&p| p < 1) {
                return invalid("polynomial degrees must be at least 1");
            }
        }
        elements.sort_by(|a, b| {
            let key = |e: &Element| {
                let lo: Vec<f64> = (0..dim).rev().map(|d| e.id.segments[d].bounds().0).collect();
                (e.id.block, lo)
            };
            let (ba, la) = key(a);
            let (bb, lb) = key(b);
            ba.cmp(&bb).then_with(|| la.partial_cmp(&lb).expect("finite bounds"))
        });
        let topology = topology::build(dim, &blocks, &elements)?;
        let mut offsets = Vec::with_capacity(elements.len() + 1);
        let mut total = 0;
        offsets.push(0);
        for e in &elements {
            total += e.num_points();
            offsets.push(total);
        }
        Ok(Self {
            dim,
            blocks,
            elements,
            topology,
            offsets,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn num_points(&self) -> usize {
        *self.offsets.last().expect("offsets are never empty")
    }

    /// Start of each element's points in a flattened field, plus the total.
    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn boundary_tags(&self) -> Vec<String> {
        let mut tags: Vec<String> = self
            .blocks
            .iter()
            .flat_map(|b| b.faces.iter().flatten())
            .filter_map(|f| match f {
                BlockFace::Boundary(t) => Some(t.clone()),
                BlockFace::Neighbor(_) => None,
            })
            .collect();
        tags.sort();
        tags.dedup();
        tags
    }

    /// `(element, direction, side, mortars)` for every internal face.
    pub fn internal_faces(&self) -> impl Iterator<Item = (usize, usize, Side, &[MortarRef])> {
        self.all_faces().filter_map(|(k, d, s, f)| match f {
            FaceNeighbors::Internal(m) => Some((k, d, s, m.as_slice())),
            FaceNeighbors::External(_) => None,
        })
    }

    /// `(element, direction, side, boundary tag)` for every external face.
    pub fn external_faces(&self) -> impl Iterator<Item = (usize, usize, Side, &str)> {
        self.all_faces().filter_map(|(k, d, s, f)| match f {
            FaceNeighbors::External(t) => Some((k, d, s, t.as_str())),
            FaceNeighbors::Internal(_) => None,
        })
    }

    fn all_faces(&self) -> impl Iterator<Item = (usize, usize, Side, &FaceNeighbors)> {
        self.topology.faces.iter().enumerate().flat_map(|(k, faces)| {
            faces.iter().enumerate().map(move |(f, n)| {
                let (d, s) = face_from_index(f);
                (k, d, s, n)
            })
        })
    }

    /// Elements sharing a face with element `k`, sorted and unique.
    pub fn face_neighbors(&self, k: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for f in &self.topology.faces[k] {
            if let FaceNeighbors::Internal(refs) = f {
                for r in refs {
                    out.push(self.topology.mortars[r.mortar].sides[1 - r.slot].element);
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn mortar_topology(&self) -> &[Mortar] {
        &self.topology.mortars
    }

    /// Splits every element selected by `select` in half along all axes.
    pub fn refine_elements(&self, select: impl Fn(usize, &Element) -> bool) -> Result<Mesh> {
        let dim = self.dim;
        let mut out = Vec::new();
        for (k, e) in self.elements.iter().enumerate() {
            if !select(k, e) {
                out.push(e.clone());
                continue;
            }
            for child in 0..(1usize << dim) {
                let mut id = e.id;
                let mut lower = [0.0; 3];
                let mut upper = [0.0; 3];
                for d in 0..dim {
                    let bit = (child >> d) & 1;
                    id.segments[d] = e.id.segments[d].children()[bit];
                    lower[d] = if bit == 0 { -1.0 } else { 0.0 };
                    upper[d] = if bit == 0 { 0.0 } else { 1.0 };
                }
                let half = AffineMap::new(&lower[..dim], &upper[..dim]);
                out.push(Element {
                    id,
                    degrees: e.degrees,
                    map: e.map.compose_logical(&half),
                    node_kind: e.node_kind,
                });
            }
        }
        Self::from_parts(dim, self.blocks.clone(), out)
    }

    /// Replaces per-element degrees.
    pub fn with_degrees(&self, degrees: impl Fn(usize, &Element) -> [usize; 3]) -> Result<Mesh> {
        let elements = self
            .elements
            .iter()
            .enumerate()
            .map(|(k, e)| Element {
                degrees: degrees(k, e),
                ..e.clone()
            })
            .collect();
        Self::from_parts(self.dim, self.blocks.clone(), elements)
    }

    /// Element size `h = 2/|ñ|` per dimension, evaluated at the element center
    /// with a flat metric.
    pub fn element_sizes(&self, k: usize) -> Result<Vec<f64>> {
        let e = &self.elements[k];
        let center = [0.0; 3];
        (0..self.dim)
            .map(|d| Ok(2.0 / norm(&e.unnormalized_face_normal(d, Side::Upper, &center)?)))
            .collect()
    }

    /// CSV report with one row per element: index, block, point count,
    /// degrees and sizes (per dimension, `x`-separated).
    pub fn summary_csv(&self) -> Result<String> {
        let mut s = String::from("element,block,n_points,degrees,h\n");
        for (k, e) in self.elements.iter().enumerate() {
            let degrees: Vec<String> = e.degrees[..self.dim].iter().map(|p| p.to_string()).collect();
            let sizes: Vec<String> = self.element_sizes(k)?.iter().map(|h| format!("{h:?}")).collect();
            writeln!(
                s,
                "{k},{},{},{},{}",
                e.id.block,
                e.num_points(),
                degrees.join("x"),
                sizes.join("x")
            )
            .expect("writing to a string cannot fail");
        }
        Ok(s)
    }
}

pub fn refine_uniform(mesh: &Mesh, mode: RefinementMode) -> Result<Mesh> {
    match mode {
        RefinementMode::H => mesh.refine_elements(|_, _| true),
        RefinementMode::P => mesh.with_degrees(|_, e| {
            let mut d = e.degrees;
            for p in d.iter_mut().take(mesh.dim) {
                *p += 1;
            }
            d
        }),
    }
}

const AXIS_NAMES: [&str; 3] = ["x", "y", "z"];

/// Boundary tag of a rectilinear domain face, e.g. `lower-x` or `upper-y`.
pub fn rectilinear_tag(direction: usize, side: Side) -> String {
    let prefix = match side {
        Side::Lower => "lower",
        Side::Upper => "upper",
    };
    format!("{prefix}-{}", AXIS_NAMES[direction])
}

fn uniform_elements(block: usize, map: &CoordinateMap, dim: usize, levels: &[u32], degrees: &[usize]) -> Vec<Element> {
    let counts: Vec<u64> = levels.iter().map(|&l| 1u64 << l).collect();
    let total: u64 = counts.iter().product();
    let mut out = Vec::with_capacity(total as usize);
    for flat in 0..total {
        let mut rest = flat;
        let mut id = ElementId {
            block,
            segments: [Segment::default(); 3],
        };
        let mut lower = vec![0.0; dim];
        let mut upper = vec![0.0; dim];
        for d in 0..dim {
            let index = rest % counts[d];
            rest /= counts[d];
            id.segments[d] = Segment {
                level: levels[d],
                index,
            };
            let (lo, hi) = id.segments[d].logical_interval();
            lower[d] = lo;
            upper[d] = hi;
        }
        let mut deg = [0; 3];
        deg[..dim].copy_from_slice(&degrees[..dim]);
        out.push(Element {
            id,
            degrees: deg,
            map: map.compose_logical(&AffineMap::new(&lower, &upper)),
            node_kind: NodeKind::GaussLobatto,
        });
    }
    out
}

/// Axis-aligned box split into `2^levels[d]` elements along each dimension.
pub fn build_rectilinear_mesh(bounds: &[(f64, f64)], h_levels: &[u32], degrees: &[usize]) -> Result<Mesh> {
    let dim = bounds.len();
    if h_levels.len() != dim || degrees.len() != dim {
        return invalid("bounds, levels and degrees must have one entry per dimension");
    }
    for &(lo, hi) in bounds {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return invalid(format!("empty or invalid interval [{lo}, {hi}]"));
        }
    }
    if h_levels.iter().any(|&l| l > 20) {
        return invalid("refinement level too large");
    }
    let lower: Vec<f64> = bounds.iter().map(|b| b.0).collect();
    let upper: Vec<f64> = bounds.iter().map(|b| b.1).collect();
    let map = CoordinateMap::Affine(AffineMap::new(&lower, &upper));
    let faces = (0..dim)
        .map(|d| {
            [
                BlockFace::Boundary(rectilinear_tag(d, Side::Lower)),
                BlockFace::Boundary(rectilinear_tag(d, Side::Upper)),
            ]
        })
        .collect();
    let elements = uniform_elements(0, &map, dim, h_levels, degrees);
    Mesh::new(dim, vec![Block { map, faces }], elements)
}

/// Annulus of `n_wedges` wedge blocks; boundary tags are `inner` and `outer`,
/// the angular direction is periodic.
pub fn build_annulus_mesh(
    inner_radius: f64,
    outer_radius: f64,
    n_wedges: usize,
    h_levels: [u32; 2],
    degrees: [usize; 2],
) -> Result<Mesh> {
    if !(inner_radius > 0.0 && inner_radius < outer_radius && outer_radius.is_finite()) {
        return invalid(format!("invalid annulus radii {inner_radius}, {outer_radius}"));
    }
    if n_wedges < 2 {
        return invalid("an annulus needs at least two wedges");
    }
    let span = 2.0 * std::f64::consts::PI / n_wedges as f64;
    let mut blocks = Vec::with_capacity(n_wedges);
    let mut elements = Vec::new();
    for w in 0..n_wedges {
        let map = CoordinateMap::AnnulusWedge(WedgeMap {
            inner_radius,
            outer_radius,
            start_angle: w as f64 * span,
            end_angle: (w + 1) as f64 * span,
        });
        elements.extend(uniform_elements(w, &map, 2, &h_levels, &degrees));
        blocks.push(Block {
            map,
            faces: vec![
                [
                    BlockFace::Boundary("inner".into()),
                    BlockFace::Boundary("outer".into()),
                ],
                [
                    BlockFace::Neighbor((w + n_wedges - 1) % n_wedges),
                    BlockFace::Neighbor((w + 1) % n_wedges),
                ],
            ],
        });
    }
    Mesh::new(2, blocks, elements)
}

#[cfg(test)]
mod tests;

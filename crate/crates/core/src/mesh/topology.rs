use std::collections::HashMap;

use super::{face_index, Block, BlockFace, Element, Side};
use crate::error::{DgError, Result};

/// Portion of an element face covered by a mortar, per face dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Coverage {
    Full,
    LowerHalf,
    UpperHalf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MortarSide {
    pub element: usize,
    pub direction: usize,
    pub side: Side,
    /// Coverage of this element's face along each face dimension, in
    /// ascending order of the non-normal logical dimensions.
    pub coverage: [Coverage; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mortar {
    pub sides: [MortarSide; 2],
    /// Mortar grid points per face dimension; the larger of the two faces.
    pub extents: [usize; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MortarRef {
    pub mortar: usize,
    /// Which entry of `Mortar::sides` belongs to the referring element.
    pub slot: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FaceNeighbors {
    External(String),
    Internal(Vec<MortarRef>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    /// `faces[element][face_index(direction, side)]`
    pub faces: Vec<Vec<FaceNeighbors>>,
    pub mortars: Vec<Mortar>,
}

/// Non-normal logical dimensions of a face, padded with `usize::MAX`.
pub(crate) fn face_dims(dim: usize, direction: usize) -> ([usize; 2], usize) {
    let mut out = [usize::MAX; 2];
    let mut n = 0;
    for d in (0..dim).filter(|&d| d != direction) {
        out[n] = d;
        n += 1;
    }
    (out, n)
}

fn coverage_of(own: (f64, f64), overlap: (f64, f64)) -> Option<Coverage> {
    let mid = 0.5 * (own.0 + own.1);
    if overlap == own {
        Some(Coverage::Full)
    } else if overlap == (own.0, mid) {
        Some(Coverage::LowerHalf)
    } else if overlap == (mid, own.1) {
        Some(Coverage::UpperHalf)
    } else {
        None
    }
}

pub(super) fn build(dim: usize, blocks: &[Block], elements: &[Element]) -> Result<Topology> {
    let mut by_block: Vec<Vec<usize>> = vec![Vec::new(); blocks.len()];
    for (k, e) in elements.iter().enumerate() {
        by_block[e.id.block].push(k);
    }
    let bounds = |k: usize, d: usize| elements[k].id.segments[d].bounds();

    let mut faces = vec![Vec::with_capacity(2 * dim); elements.len()];
    let mut mortars: Vec<Mortar> = Vec::new();
    let mut pending: Vec<bool> = Vec::new();
    let mut keys: HashMap<(usize, usize, Side, usize), usize> = HashMap::new();

    for (k, e) in elements.iter().enumerate() {
        for direction in 0..dim {
            for side in [Side::Lower, Side::Upper] {
                let (lo, hi) = bounds(k, direction);
                let inside = match side {
                    Side::Lower => lo > 0.0,
                    Side::Upper => hi < 1.0,
                };
                let (target_block, position) = if inside {
                    (e.id.block, if side == Side::Upper { hi } else { lo })
                } else {
                    match &blocks[e.id.block].faces[direction][side.index()] {
                        BlockFace::Boundary(tag) => {
                            faces[k].push(FaceNeighbors::External(tag.clone()));
                            continue;
                        }
                        BlockFace::Neighbor(b) => (*b, if side == Side::Upper { 0.0 } else { 1.0 }),
                    }
                };
                let (fdims, nf) = face_dims(dim, direction);
                let own_area: f64 = fdims[..nf]
                    .iter()
                    .map(|&d| {
                        let (a, b) = bounds(k, d);
                        b - a
                    })
                    .product();
                let mut covered = 0.0;
                let mut refs = Vec::new();
                for &f in &by_block[target_block] {
                    let (flo, fhi) = bounds(f, direction);
                    let touching = match side {
                        Side::Upper => flo == position,
                        Side::Lower => fhi == position,
                    };
                    if !touching {
                        continue;
                    }
                    let mut own_cov = [Coverage::Full; 2];
                    let mut other_cov = [Coverage::Full; 2];
                    let mut extents = [1; 2];
                    let mut area = 1.0;
                    let mut overlapping = true;
                    for (slot, &d) in fdims[..nf].iter().enumerate() {
                        let a = bounds(k, d);
                        let b = bounds(f, d);
                        let overlap = (a.0.max(b.0), a.1.min(b.1));
                        if overlap.1 <= overlap.0 {
                            overlapping = false;
                            break;
                        }
                        area *= overlap.1 - overlap.0;
                        match (coverage_of(a, overlap), coverage_of(b, overlap)) {
                            (Some(ca), Some(cb)) => {
                                own_cov[slot] = ca;
                                other_cov[slot] = cb;
                            }
                            _ => {
                                return Err(DgError::Topology(format!(
                                    "elements {k} and {f} violate two-to-one balance"
                                )))
                            }
                        }
                        extents[slot] = elements[k].extents()[d].max(elements[f].extents()[d]);
                    }
                    if !overlapping {
                        continue;
                    }
                    covered += area;
                    let opposite = side.opposite();
                    let canonical = k < f || (k == f && side == Side::Lower);
                    let key = if canonical {
                        (k, direction, side, f)
                    } else {
                        (f, direction, opposite, k)
                    };
                    let own = MortarSide {
                        element: k,
                        direction,
                        side,
                        coverage: own_cov,
                    };
                    let other = MortarSide {
                        element: f,
                        direction,
                        side: opposite,
                        coverage: other_cov,
                    };
                    if let Some(&m) = keys.get(&key) {
                        if mortars[m].sides[1] != own || mortars[m].sides[0] != other || !pending[m] {
                            return Err(DgError::Topology(format!(
                                "inconsistent mortar between elements {k} and {f}"
                            )));
                        }
                        pending[m] = false;
                        refs.push(MortarRef { mortar: m, slot: 1 });
                    } else {
                        keys.insert(key, mortars.len());
                        refs.push(MortarRef {
                            mortar: mortars.len(),
                            slot: 0,
                        });
                        mortars.push(Mortar {
                            sides: [own, other],
                            extents,
                        });
                        pending.push(true);
                    }
                }
                if covered != own_area {
                    return Err(DgError::Topology(format!(
                        "face {} of element {k} is only partially covered by neighbors",
                        face_index(direction, side)
                    )));
                }
                faces[k].push(FaceNeighbors::Internal(refs));
            }
        }
    }
    if pending.iter().any(|&p| p) {
        return Err(DgError::Topology(
            "a mortar was found from only one of its sides".into(),
        ));
    }
    Ok(Topology { faces, mortars })
}

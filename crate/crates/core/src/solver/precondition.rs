use nalgebra::{DMatrix, DVector, LU};
use rayon::prelude::*;

use super::assembly::color_elements;
use super::krylov::Preconditioner;
use crate::error::{DgError, Result};
use crate::operators::DgOperator;

/// Inverts the element-diagonal blocks of the compact operator. The blocks
/// are probed with a face-neighbor coloring, so the cost is a few operator
/// applications per color.
pub struct BlockJacobi {
    n_total: usize,
    ncomp: usize,
    offsets: Vec<usize>,
    sizes: Vec<usize>,
    blocks: Vec<LU<f64, nalgebra::Dyn, nalgebra::Dyn>>,
}

impl BlockJacobi {
    pub fn new(op: &DgOperator) -> Result<Self> {
        let mesh = op.mesh();
        let ne = mesh.elements().len();
        let n_total = mesh.num_points();
        let ncomp = op.system().n_primal();
        let n = op.n_primal_dofs();
        let offsets = mesh.offsets().to_vec();
        let sizes: Vec<usize> = mesh.elements().iter().map(|e| e.num_points()).collect();
        let colors = color_elements(mesh, 1);
        let n_colors = colors.iter().max().map_or(0, |c| c + 1);
        let max_points = sizes.iter().copied().max().unwrap_or(0);
        let mut dense: Vec<DMatrix<f64>> = sizes.iter().map(|&s| DMatrix::zeros(ncomp * s, ncomp * s)).collect();

        let probes: Vec<(usize, usize, usize)> = (0..n_colors)
            .flat_map(|color| (0..ncomp).flat_map(move |c| (0..max_points).map(move |p| (color, c, p))))
            .collect();
        let responses = probes
            .par_iter()
            .map(|&(color, c, p)| -> Result<Option<Vec<f64>>> {
                let mut x = vec![0.0; n];
                let mut any = false;
                for k in 0..ne {
                    if colors[k] == color && p < sizes[k] {
                        x[c * n_total + offsets[k] + p] = 1.0;
                        any = true;
                    }
                }
                if !any {
                    return Ok(None);
                }
                Ok(Some(op.apply(&x)?))
            })
            .collect::<Result<Vec<_>>>()?;
        for (&(color, c, p), y) in probes.iter().zip(responses) {
            let Some(y) = y else { continue };
            for k in (0..ne).filter(|&k| colors[k] == color && p < sizes[k]) {
                let s = sizes[k];
                for r in 0..ncomp {
                    for q in 0..s {
                        dense[k][(r * s + q, c * s + p)] = y[r * n_total + offsets[k] + q];
                    }
                }
            }
        }
        let blocks = dense
            .into_iter()
            .enumerate()
            .map(|(k, m)| {
                let lu = m.lu();
                if !lu.is_invertible() {
                    return Err(DgError::Numeric {
                        element: k,
                        message: "singular diagonal block".into(),
                    });
                }
                Ok(lu)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n_total,
            ncomp,
            offsets,
            sizes,
            blocks,
        })
    }
}

impl Preconditioner for BlockJacobi {
    fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        let (n_total, ncomp) = (self.n_total, self.ncomp);
        let solved: Vec<DVector<f64>> = self
            .blocks
            .par_iter()
            .enumerate()
            .map(|(k, lu)| {
                let s = self.sizes[k];
                let off = self.offsets[k];
                let local = DVector::from_fn(ncomp * s, |i, _| r[(i / s) * n_total + off + i % s]);
                lu.solve(&local).expect("block was checked invertible")
            })
            .collect();
        let mut out = vec![0.0; r.len()];
        for (k, z) in solved.iter().enumerate() {
            let s = self.sizes[k];
            for (i, v) in z.iter().enumerate() {
                out[(i / s) * n_total + self.offsets[k] + i % s] = *v;
            }
        }
        Ok(out)
    }
}

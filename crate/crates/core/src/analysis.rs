//! Error norms, convergence rates and matrix diagnostics.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::background::Background;
use crate::error::{invalid, Result};
use crate::mesh::{refine_uniform, Mesh, RefinementMode};
use crate::operators::lumped_mass_diag;
use crate::solver::ExplicitMatrix;
use crate::tensor::Vec3;

/// Pairwise summation, so results do not depend on how work was split.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 8 {
        return values.iter().sum();
    }
    let (a, b) = values.split_at(values.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Volume-normalized L2 error over all components,
/// `sqrt(Σ m (u − u*)² / Σ m)` with the lumped quadrature weights `m`.
/// `u` is component-major in mesh point order.
pub fn l2_error(
    mesh: &Mesh,
    background: Option<&Background>,
    ncomp: usize,
    u: &[f64],
    exact: impl Fn(&Vec3) -> Vec<f64> + Sync,
) -> Result<f64> {
    let n_total = mesh.num_points();
    if u.len() != ncomp * n_total {
        return invalid(format!("field has length {}, expected {}", u.len(), ncomp * n_total));
    }
    let flat = Background::flat(mesh.dim());
    let bg = background.unwrap_or(&flat);
    let per_element = (0..mesh.elements().len())
        .into_par_iter()
        .map(|k| -> Result<(Vec<f64>, Vec<f64>)> {
            let e = &mesh.elements()[k];
            let off = mesh.offsets()[k];
            let mass = lumped_mass_diag(e, bg)?;
            let mut sq = Vec::with_capacity(mass.len());
            for (p, xi) in e.logical_points()?.iter().enumerate() {
                let ex = exact(&e.map.to_physical(xi));
                if ex.len() != ncomp {
                    return invalid("analytic solution has the wrong number of components");
                }
                let s: f64 = (0..ncomp).map(|c| (u[c * n_total + off + p] - ex[c]).powi(2)).sum();
                sq.push(mass[p] * s);
            }
            Ok((sq, mass))
        })
        .collect::<Result<Vec<_>>>()?;
    let sq: Vec<f64> = per_element.iter().flat_map(|(s, _)| s.iter().copied()).collect();
    let vol: Vec<f64> = per_element.iter().flat_map(|(_, m)| m.iter().copied()).collect();
    Ok((pairwise_sum(&sq) / pairwise_sum(&vol)).sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceLevel {
    pub level: usize,
    pub n_points: usize,
    /// Representative element size in h mode, polynomial degree in p mode.
    pub h_or_p: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSeries {
    pub mode: RefinementMode,
    pub levels: Vec<ConvergenceLevel>,
}

/// Rate between two levels. h mode: `ln(e₀/e₁)/ln(h₀/h₁)`, which is
/// `Δ ln e / ln 2` for a halving. p mode: `log₁₀(e₀/e₁)` per degree. Both
/// are positive for decreasing errors; a vanishing error gives infinity.
pub fn rate(mode: RefinementMode, a: &ConvergenceLevel, b: &ConvergenceLevel) -> f64 {
    if b.error == 0.0 {
        return f64::INFINITY;
    }
    match mode {
        RefinementMode::H => (a.error / b.error).ln() / (a.h_or_p / b.h_or_p).ln(),
        RefinementMode::P => (a.error / b.error).log10() / (b.h_or_p - a.h_or_p),
    }
}

impl ConvergenceSeries {
    pub fn new(mode: RefinementMode) -> Self {
        Self { mode, levels: Vec::new() }
    }

    /// Appends a level; resolution must strictly increase.
    pub fn push(&mut self, level: ConvergenceLevel) -> Result<()> {
        if !(level.error >= 0.0) {
            return invalid(format!("error must be non-negative, got {}", level.error));
        }
        if let Some(last) = self.levels.last() {
            let finer = match self.mode {
                RefinementMode::H => level.h_or_p < last.h_or_p,
                RefinementMode::P => level.h_or_p > last.h_or_p,
            };
            if !finer || level.n_points <= last.n_points {
                return invalid("convergence levels must strictly increase in resolution");
            }
        }
        self.levels.push(level);
        Ok(())
    }

    /// Rates between adjacent levels; needs at least two levels.
    pub fn rates(&self) -> Result<Vec<f64>> {
        if self.levels.len() < 2 {
            return invalid("convergence rates need at least two levels");
        }
        Ok(self.levels.windows(2).map(|w| rate(self.mode, &w[0], &w[1])).collect())
    }

    pub fn errors(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.error).collect()
    }

    /// CSV with header `mode,level,n_points,h_or_P,error,rate`. The rate
    /// column is empty on the first level and positive for converging runs.
    pub fn to_csv(&self) -> String {
        let mode = match self.mode {
            RefinementMode::H => "h",
            RefinementMode::P => "p",
        };
        let mut s = String::from("mode,level,n_points,h_or_P,error,rate\n");
        for (i, l) in self.levels.iter().enumerate() {
            let r = if i == 0 {
                String::new()
            } else {
                format!("{:.16e}", rate(self.mode, &self.levels[i - 1], l))
            };
            let _ = writeln!(s, "{mode},{},{},{:.16e},{:.16e},{r}", l.level, l.n_points, l.h_or_p, l.error);
        }
        s
    }
}

/// Largest element size over the mesh.
pub fn representative_h(mesh: &Mesh) -> Result<f64> {
    let mut h: f64 = 0.0;
    for k in 0..mesh.elements().len() {
        for s in mesh.element_sizes(k)? {
            h = h.max(s);
        }
    }
    Ok(h)
}

/// Largest polynomial degree over the mesh.
pub fn representative_degree(mesh: &Mesh) -> usize {
    let d = mesh.dim();
    mesh.elements().iter().flat_map(|e| e.degrees[..d].iter().copied()).max().unwrap_or(0)
}

/// Runs `error_of` on `base` and on `levels − 1` successive uniform
/// refinements of it.
pub fn convergence_study(
    mode: RefinementMode,
    base: &Mesh,
    levels: usize,
    mut error_of: impl FnMut(&Mesh) -> Result<f64>,
) -> Result<ConvergenceSeries> {
    if levels < 2 {
        return invalid(format!("a convergence study needs at least 2 levels, got {levels}"));
    }
    let mut series = ConvergenceSeries::new(mode);
    let mut mesh = base.clone();
    for level in 0..levels {
        if level > 0 {
            mesh = refine_uniform(&mesh, mode)?;
        }
        let h_or_p = match mode {
            RefinementMode::H => representative_h(&mesh)?,
            RefinementMode::P => representative_degree(&mesh) as f64,
        };
        series.push(ConvergenceLevel {
            level,
            n_points: mesh.num_points(),
            h_or_p,
            error: error_of(&mesh)?,
        })?;
    }
    Ok(series)
}

/// `max |A_ij − A_ji| / max |A_ij|`, zero for a zero matrix.
pub fn symmetry_defect(a: &ExplicitMatrix) -> Result<f64> {
    if a.rows != a.cols {
        return invalid("symmetry defect needs a square matrix");
    }
    let scale = a.max_abs();
    if scale == 0.0 {
        return Ok(0.0);
    }
    let mut defect: f64 = 0.0;
    for (i, j, v) in a.triples() {
        defect = defect.max((v - a.get(j, i)).abs());
    }
    Ok(defect / scale)
}

/// Entries with `|A_ij| > threshold` in row-major order, 0-based.
pub fn export_sparsity(a: &ExplicitMatrix, threshold: f64) -> Vec<(usize, usize, f64)> {
    a.triples().filter(|t| t.2.abs() > threshold).collect()
}

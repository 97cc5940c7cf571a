use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::{self, Write};

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{invalid, DgError, Result};
use crate::mesh::Mesh;
use crate::operators::DgOperator;

/// Default upper bound on the number of assembled degrees of freedom.
pub const DEFAULT_ASSEMBLY_CAP: usize = 20_000;

/// Named variable blocks in DoF order. Within a block, DoFs are ordered by
/// component, then element, then grid point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DofOrdering {
    pub blocks: Vec<(String, usize)>,
}

/// Sparse matrix in compressed row form. Only entries that are exactly zero
/// are omitted.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitMatrix {
    pub rows: usize,
    pub cols: usize,
    row_start: Vec<usize>,
    col_index: Vec<usize>,
    values: Vec<f64>,
    pub ordering: DofOrdering,
}

impl ExplicitMatrix {
    /// Builds a matrix from row-wise `(column, value)` lists.
    pub fn from_rows(cols: usize, rows: Vec<Vec<(usize, f64)>>, ordering: DofOrdering) -> Result<Self> {
        let mut row_start = Vec::with_capacity(rows.len() + 1);
        let mut col_index = Vec::new();
        let mut values = Vec::new();
        row_start.push(0);
        for mut row in rows.iter().cloned() {
            row.sort_by_key(|e| e.0);
            for w in row.windows(2) {
                if w[0].0 == w[1].0 {
                    return invalid(format!("duplicate column {} in a row", w[0].0));
                }
            }
            for (c, v) in row {
                if c >= cols {
                    return invalid(format!("column {c} out of range for {cols} columns"));
                }
                if v != 0.0 {
                    col_index.push(c);
                    values.push(v);
                }
            }
            row_start.push(col_index.len());
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            row_start,
            col_index,
            values,
            ordering,
        })
    }

    pub fn from_dense(m: &DMatrix<f64>, ordering: DofOrdering) -> Self {
        let rows = (0..m.nrows())
            .map(|i| (0..m.ncols()).filter(|&j| m[(i, j)] != 0.0).map(|j| (j, m[(i, j)])).collect())
            .collect();
        Self::from_rows(m.ncols(), rows, ordering).expect("dense rows are well formed")
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Nonzero entries of row `i` as `(column, value)`, columns ascending.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_start[i]..self.row_start[i + 1];
        self.col_index[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_start[i]..self.row_start[i + 1];
        match self.col_index[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    /// Row-major `(row, column, value)` triples, 0-based.
    pub fn triples(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for (i, j, v) in self.triples() {
            m[(i, j)] = v;
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Coordinate text format: a `rows cols nnz` header, then one 1-based
    /// `row col value` line per nonzero in row-major order.
    pub fn write_coordinate(&self, out: &mut impl Write) -> io::Result<()> {
        let mut w = io::BufWriter::new(out);
        writeln!(w, "{} {} {}", self.rows, self.cols, self.nnz())?;
        for (i, j, v) in self.triples() {
            writeln!(w, "{} {} {:.16e}", i + 1, j + 1, v)?;
        }
        w.flush()
    }

    pub fn to_coordinate_string(&self) -> String {
        let mut s = format!("{} {} {}\n", self.rows, self.cols, self.nnz());
        for (i, j, v) in self.triples() {
            let _ = writeln!(s, "{} {} {:.16e}", i + 1, j + 1, v);
        }
        s
    }

    /// Parses the coordinate text format.
    pub fn parse_coordinate(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| DgError::InvalidArgument("empty matrix file".into()))?;
        let numbers: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| DgError::InvalidArgument(format!("bad header {header:?}"))))
            .collect::<Result<_>>()?;
        let [rows, cols, nnz] = numbers[..] else {
            return invalid(format!("bad header {header:?}"));
        };
        let mut by_row = vec![Vec::new(); rows];
        let mut count = 0;
        for line in lines {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let bad = || DgError::InvalidArgument(format!("bad entry {line:?}"));
            if parts.len() != 3 {
                return Err(bad());
            }
            let i: usize = parts[0].parse().map_err(|_| bad())?;
            let j: usize = parts[1].parse().map_err(|_| bad())?;
            let v: f64 = parts[2].parse().map_err(|_| bad())?;
            if i == 0 || j == 0 || i > rows || j > cols {
                return Err(bad());
            }
            by_row[i - 1].push((j - 1, v));
            count += 1;
        }
        if count != nnz {
            return invalid(format!("header announces {nnz} entries, found {count}"));
        }
        Self::from_rows(
            cols,
            by_row,
            DofOrdering {
                blocks: vec![("all".into(), rows)],
            },
        )
    }
}

/// Greedy coloring in which no two elements within `distance` face-neighbor
/// hops of each other share a color.
pub fn color_elements(mesh: &Mesh, distance: usize) -> Vec<usize> {
    let ne = mesh.elements().len();
    let neighbors: Vec<Vec<usize>> = (0..ne).map(|k| mesh.face_neighbors(k)).collect();
    let mut colors = vec![usize::MAX; ne];
    for k in 0..ne {
        let mut near = BTreeSet::new();
        let mut frontier = vec![k];
        for _ in 0..distance {
            let mut next = Vec::new();
            for &e in &frontier {
                for &n in &neighbors[e] {
                    if near.insert(n) {
                        next.push(n);
                    }
                }
            }
            frontier = next;
        }
        let used: BTreeSet<usize> = near.iter().map(|&n| colors[n]).collect();
        colors[k] = (0..).find(|c| !used.contains(c)).expect("a free color exists");
    }
    colors
}

/// One block of unknowns in the assembled vector.
struct Block {
    offset: usize,
    components: usize,
}

/// Assembles `column j = A(e_j)` by probing many columns at once: with a
/// distance-2 element coloring, every row element is within one hop of at
/// most one perturbed element, so each response entry has a unique source.
pub fn assemble_explicit(op: &DgOperator, include_auxiliary: bool, cap: usize) -> Result<ExplicitMatrix> {
    let mesh = op.mesh();
    let sys = op.system();
    let n_total = mesh.num_points();
    let (na, np) = (sys.n_auxiliary(), sys.n_primal());
    let n = if include_auxiliary { (na + np) * n_total } else { np * n_total };
    if n > cap {
        return Err(DgError::ResourceGuard { requested: n, cap });
    }
    if !sys.is_linear() && !op.has_linearization_point() {
        return Err(DgError::Sequencing(
            "assembling a nonlinear operator needs a linearization point".into(),
        ));
    }
    let blocks = if include_auxiliary {
        vec![
            Block { offset: 0, components: na },
            Block {
                offset: na * n_total,
                components: np,
            },
        ]
    } else {
        vec![Block { offset: 0, components: np }]
    };
    let ordering = DofOrdering {
        blocks: if include_auxiliary {
            vec![("auxiliary".into(), na * n_total), ("primal".into(), np * n_total)]
        } else {
            vec![("primal".into(), np * n_total)]
        },
    };
    let apply = |x: &[f64]| {
        if include_auxiliary {
            op.apply_first_order(x)
        } else {
            op.apply(x)
        }
    };

    let colors = color_elements(mesh, 2);
    let n_colors = colors.iter().max().map_or(0, |c| c + 1);
    let ne = mesh.elements().len();
    let max_points = mesh.elements().iter().map(|e| e.num_points()).max().unwrap_or(0);
    // row element -> the element of each color within one hop
    let mut owner = vec![vec![usize::MAX; n_colors]; ne];
    for k in 0..ne {
        owner[k][colors[k]] = k;
        for nb in mesh.face_neighbors(k) {
            owner[k][colors[nb]] = nb;
        }
    }
    let element_of_point: Vec<usize> = (0..ne)
        .flat_map(|k| std::iter::repeat_n(k, mesh.elements()[k].num_points()))
        .collect();

    let mut probes = Vec::new();
    for (b, block) in blocks.iter().enumerate() {
        for c in 0..block.components {
            for color in 0..n_colors {
                for p in 0..max_points {
                    probes.push((b, c, color, p));
                }
            }
        }
    }
    let columns = probes
        .par_iter()
        .map(|&(b, c, color, p)| -> Result<Vec<(usize, usize, f64)>> {
            let block = &blocks[b];
            let mut x = vec![0.0; n];
            let mut column_of = vec![usize::MAX; ne];
            let mut any = false;
            for k in 0..ne {
                if colors[k] == color && p < mesh.elements()[k].num_points() {
                    let j = block.offset + c * n_total + mesh.offsets()[k] + p;
                    x[j] = 1.0;
                    column_of[k] = j;
                    any = true;
                }
            }
            if !any {
                return Ok(Vec::new());
            }
            let y = apply(&x)?;
            let mut out = Vec::new();
            for (i, &v) in y.iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                let row_element = element_of_point[i % n_total];
                let source = owner[row_element][color];
                if source != usize::MAX && column_of[source] != usize::MAX {
                    out.push((i, column_of[source], v));
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = vec![Vec::new(); n];
    for col in columns {
        for (i, j, v) in col {
            rows[i].push((j, v));
        }
    }
    ExplicitMatrix::from_rows(n, rows, ordering)
}

/// Primal Schur complement `A_uu − A_uv A_vv⁻¹ A_vu` of a first-order
/// matrix whose leading `n_aux` rows and columns are the auxiliary block.
pub fn schur_eliminate(full: &ExplicitMatrix, n_aux: usize) -> Result<ExplicitMatrix> {
    if full.rows != full.cols || n_aux > full.rows {
        return invalid("Schur elimination needs a square matrix with a leading auxiliary block");
    }
    let n = full.rows;
    let np = n - n_aux;
    let d = full.to_dense();
    let avv = d.view((0, 0), (n_aux, n_aux)).into_owned();
    let avu = d.view((0, n_aux), (n_aux, np)).into_owned();
    let auv = d.view((n_aux, 0), (np, n_aux)).into_owned();
    let auu = d.view((n_aux, n_aux), (np, np)).into_owned();
    let lu = avv.lu();
    let x = lu.solve(&avu).ok_or_else(|| DgError::Numeric {
        element: usize::MAX,
        message: "auxiliary block is singular".into(),
    })?;
    let s = auu - auv * x;
    if s.iter().any(|v| !v.is_finite()) {
        return Err(DgError::Numeric {
            element: usize::MAX,
            message: "non-finite Schur complement".into(),
        });
    }
    Ok(ExplicitMatrix::from_dense(
        &s,
        DofOrdering {
            blocks: vec![("primal".into(), np)],
        },
    ))
}

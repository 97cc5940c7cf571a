//! One-dimensional spectral machinery: Legendre-Gauss(-Lobatto) collocation
//! nodes and weights, Lagrange interpolation and differentiation matrices.
//!
//! Tables for LGL grids are memoized per node count and shared between all
//! elements; they are immutable once built.

use std::collections::HashMap;
use std::hash::Hash;
use std::sync::{Arc, OnceLock, RwLock};

use crate::error::{invalid, Result};

const NEWTON_TOLERANCE: f64 = 1e-15;
const NEWTON_MAX_ITERATIONS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeKind {
    GaussLobatto,
    Gauss,
}

/// Collocation nodes on `[-1, 1]` with their quadrature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeSet1D {
    pub kind: NodeKind,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    barycentric: Vec<f64>,
}

impl NodeSet1D {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn new(kind: NodeKind, nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let barycentric = barycentric_weights(&nodes)?;
        Ok(Self {
            kind,
            nodes,
            weights,
            barycentric,
        })
    }

    /// Builds a node set from arbitrary distinct nodes. Weights are left
    /// empty; only interpolation and differentiation are meaningful.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        Self::new(NodeKind::Gauss, nodes, Vec::new())
    }

    /// Values of all Lagrange polynomials at `x`.
    pub fn lagrange_at(&self, x: f64) -> Vec<f64> {
        let n = self.nodes.len();
        let mut out = vec![0.0; n];
        if let Some(exact) = self.nodes.iter().position(|&xp| xp == x) {
            out[exact] = 1.0;
            return out;
        }
        let mut denom = 0.0;
        for p in 0..n {
            let t = self.barycentric[p] / (x - self.nodes[p]);
            out[p] = t;
            denom += t;
        }
        for v in &mut out {
            *v /= denom;
        }
        out
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix1D {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<f64>,
}

impl Matrix1D {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.entries[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)];
            }
        }
        t
    }

    pub fn matmul(&self, rhs: &Matrix1D) -> Self {
        assert_eq!(self.cols, rhs.rows, "matrix shapes do not match");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == 0.0 {
                    continue;
                }
                for c in 0..rhs.cols {
                    out[(r, c)] += a * rhs[(k, c)];
                }
            }
        }
        out
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn max_abs_diff(&self, other: &Matrix1D) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for Matrix1D {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.entries[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix1D {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.entries[r * self.cols + c]
    }
}

/// Legendre polynomial `L_k(x)` and its derivative.
pub fn legendre(k: usize, x: f64) -> (f64, f64) {
    match k {
        0 => (1.0, 0.0),
        1 => (x, 1.0),
        _ => {
            let (mut l_prev, mut l) = (1.0, x);
            let (mut d_prev, mut d) = (0.0, 1.0);
            for j in 1..k {
                let jf = j as f64;
                let l_next = ((2.0 * jf + 1.0) * x * l - jf * l_prev) / (jf + 1.0);
                let d_next = d_prev + (2.0 * jf + 1.0) * l;
                l_prev = l;
                l = l_next;
                d_prev = d;
                d = d_next;
            }
            (l, d)
        }
    }
}

/// Newton iteration for the interior LGL nodes uses `q = L_{N+1} - L_{N-1}`.
fn lobatto_q(order: usize, x: f64) -> (f64, f64, f64) {
    let (l_n, _) = legendre(order, x);
    let (l_np1, d_np1) = legendre(order + 1, x);
    let (l_nm1, d_nm1) = legendre(order - 1, x);
    (l_np1 - l_nm1, d_np1 - d_nm1, l_n)
}

pub fn gauss_lobatto_nodes_weights(n: usize) -> Result<NodeSet1D> {
    if n < 2 {
        return invalid(format!("Gauss-Lobatto rules need at least 2 nodes, got {n}"));
    }
    let order = n - 1;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let end_weight = 2.0 / (order * (order + 1)) as f64;
    nodes[0] = -1.0;
    nodes[order] = 1.0;
    weights[0] = end_weight;
    weights[order] = end_weight;
    let of = order as f64;
    for j in 1..(order + 1) / 2 {
        let jf = j as f64 + 0.25;
        let mut x = -(jf * std::f64::consts::PI / of
            - 3.0 / (8.0 * of * std::f64::consts::PI * jf))
            .cos();
        for _ in 0..NEWTON_MAX_ITERATIONS {
            let (q, dq, _) = lobatto_q(order, x);
            let delta = -q / dq;
            x += delta;
            if delta.abs() <= NEWTON_TOLERANCE {
                break;
            }
        }
        let (_, _, l_n) = lobatto_q(order, x);
        let w = end_weight / (l_n * l_n);
        nodes[j] = x;
        nodes[order - j] = -x;
        weights[j] = w;
        weights[order - j] = w;
    }
    if order % 2 == 0 {
        let (l_n, _) = legendre(order, 0.0);
        nodes[order / 2] = 0.0;
        weights[order / 2] = end_weight / (l_n * l_n);
    }
    NodeSet1D::new(NodeKind::GaussLobatto, nodes, weights)
}

pub fn gauss_nodes_weights(n: usize) -> Result<NodeSet1D> {
    if n < 1 {
        return invalid("Gauss rules need at least 1 node");
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for j in 0..n / 2 {
        let mut x = -((2 * j + 1) as f64 * std::f64::consts::PI / (2 * n) as f64).cos();
        for _ in 0..NEWTON_MAX_ITERATIONS {
            let (l, dl) = legendre(n, x);
            let delta = -l / dl;
            x += delta;
            if delta.abs() <= NEWTON_TOLERANCE {
                break;
            }
        }
        let (_, dl) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dl * dl);
        nodes[j] = x;
        nodes[n - 1 - j] = -x;
        weights[j] = w;
        weights[n - 1 - j] = w;
    }
    if n % 2 == 1 {
        let (_, dl) = legendre(n, 0.0);
        nodes[n / 2] = 0.0;
        weights[n / 2] = 2.0 / (dl * dl);
    }
    NodeSet1D::new(NodeKind::Gauss, nodes, weights)
}

fn barycentric_weights(nodes: &[f64]) -> Result<Vec<f64>> {
    let n = nodes.len();
    let mut w = vec![1.0; n];
    for p in 0..n {
        for q in 0..n {
            if p == q {
                continue;
            }
            let diff = nodes[p] - nodes[q];
            if diff == 0.0 {
                return invalid(format!("duplicate interpolation node {}", nodes[p]));
            }
            w[p] /= diff;
        }
    }
    Ok(w)
}

/// Entry `(t, p)` is the `p`-th Lagrange polynomial of `source` evaluated at
/// `targets[t]`.
pub fn interpolation_matrix(source: &NodeSet1D, targets: &[f64]) -> Matrix1D {
    let mut m = Matrix1D::zeros(targets.len(), source.len());
    for (t, &x) in targets.iter().enumerate() {
        let row = source.lagrange_at(x);
        m.entries[t * source.len()..(t + 1) * source.len()].copy_from_slice(&row);
    }
    m
}

/// Entry `(r, q)` is `ℓ'_q(ξ_r)`. Diagonal entries use the negative-sum
/// identity so that every row sums to zero to rounding.
pub fn differentiation_matrix(nodes: &NodeSet1D) -> Matrix1D {
    let n = nodes.len();
    let x = &nodes.nodes;
    let b = &nodes.barycentric;
    let mut d = Matrix1D::zeros(n, n);
    for r in 0..n {
        let mut diag = 0.0;
        for q in 0..n {
            if q == r {
                continue;
            }
            let v = (b[q] / b[r]) / (x[r] - x[q]);
            d[(r, q)] = v;
            diag -= v;
        }
        d[(r, r)] = diag;
    }
    d
}

pub(crate) struct Memo<K, V>(OnceLock<RwLock<HashMap<K, Arc<V>>>>);

impl<K: Eq + Hash + Copy, V> Memo<K, V> {
    pub(crate) const fn new() -> Self {
        Self(OnceLock::new())
    }

    pub(crate) fn get_or_try(&self, key: K, build: impl FnOnce() -> Result<V>) -> Result<Arc<V>> {
        let map = self.0.get_or_init(|| RwLock::new(HashMap::new()));
        if let Some(v) = map.read().expect("basis cache poisoned").get(&key) {
            return Ok(v.clone());
        }
        let value = Arc::new(build()?);
        let mut guard = map.write().expect("basis cache poisoned");
        Ok(guard.entry(key).or_insert(value).clone())
    }
}

static LGL_NODES: Memo<usize, NodeSet1D> = Memo::new();
static LGL_DIFF: Memo<usize, Matrix1D> = Memo::new();
static LGL_DIFF_T: Memo<usize, Matrix1D> = Memo::new();

/// Cached LGL node set with `n` points.
pub fn lgl(n: usize) -> Result<Arc<NodeSet1D>> {
    LGL_NODES.get_or_try(n, || gauss_lobatto_nodes_weights(n))
}

/// Cached LGL differentiation matrix with `n` points.
pub fn lgl_differentiation(n: usize) -> Result<Arc<Matrix1D>> {
    LGL_DIFF.get_or_try(n, || Ok(differentiation_matrix(&*lgl(n)?)))
}

pub fn lgl_differentiation_transpose(n: usize) -> Result<Arc<Matrix1D>> {
    LGL_DIFF_T.get_or_try(n, || Ok(lgl_differentiation(n)?.transpose()))
}

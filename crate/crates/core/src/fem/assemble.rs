//! Sparse assembly of the stiffness matrix and load vector.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::quadrature::TRI7;
use super::space::FeSpace;
use super::{MaterialParams, ProblemKind};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::meshgen::Mesh;

/// Compressed sparse row matrix with sorted column indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<f64>,
}

impl CsrMatrix {
    /// Zero matrix with the symmetric pattern given by per-row column lists.
    pub fn from_pattern(rows: Vec<Vec<usize>>) -> CsrMatrix {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut col = Vec::new();
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            col.extend_from_slice(&r);
            row_ptr.push(col.len());
        }
        let val = vec![0.0; col.len()];
        CsrMatrix { n, row_ptr, col, val }
    }

    pub fn nnz(&self) -> usize {
        self.col.len()
    }

    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let r = &self.col[self.row_ptr[i]..self.row_ptr[i + 1]];
        r.binary_search(&j).ok().map(|k| self.row_ptr[i] + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |k| self.val[k])
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (self.row_ptr[i]..self.row_ptr[i + 1]).map(|k| self.val[k] * x[self.col[k]]).sum())
            .collect()
    }

    /// `x^T A y`.
    pub fn pair(&self, x: &[f64], y: &[f64]) -> f64 {
        self.mul_vec(y).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.val[self.row_ptr[i]..self.row_ptr[i + 1]].iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.val.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col[k];
                worst = worst.max((self.val[k] - self.get(j, i)).abs());
            }
        }
        if scale > 0.0 {
            worst / scale
        } else {
            0.0
        }
    }

    /// Principal submatrix on `keep` (indices in increasing order).
    pub fn submatrix(&self, keep: &[usize]) -> CsrMatrix {
        let mut map = vec![usize::MAX; self.n];
        for (k, &i) in keep.iter().enumerate() {
            map[i] = k;
        }
        let mut row_ptr = Vec::with_capacity(keep.len() + 1);
        row_ptr.push(0);
        let mut col = Vec::new();
        let mut val = Vec::new();
        for &i in keep {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = map[self.col[k]];
                if j != usize::MAX {
                    col.push(j);
                    val.push(self.val[k]);
                }
            }
            row_ptr.push(col.len());
        }
        CsrMatrix { n: keep.len(), row_ptr, col, val }
    }
}

/// Assembled bilinear form on a finite-element space.
#[derive(Clone, Debug)]
pub struct SparseSystem {
    pub space: Arc<FeSpace>,
    pub material: MaterialParams,
    pub matrix: CsrMatrix,
}

impl SparseSystem {
    pub fn kind(&self) -> ProblemKind {
        self.material.kind
    }

    pub fn mesh(&self) -> &Mesh {
        &self.space.mesh
    }

    /// Energy pairing `u^T A v`.
    pub fn pair(&self, u: &[f64], v: &[f64]) -> f64 {
        self.matrix.pair(u, v)
    }
}

/// Body load `f(x, component)`.
pub type LoadFn<'a> = &'a (dyn Fn(Point, usize) -> f64 + Sync);

/// Cells per parallel chunk; chunks are accumulated serially in cell order so
/// the matrix does not depend on the thread schedule.
const CHUNK: usize = 2048;

/// Assembles the stiffness matrix of `material.kind` on `mesh` with
/// Lagrange elements of the given degree.
pub fn assemble(material: &MaterialParams, mesh: Arc<Mesh>, degree: usize) -> Result<SparseSystem> {
    material.validate()?;
    if material.kind.is_axisymmetric() != mesh.axisymmetric {
        return Err(Error::Parameter(format!(
            "{} requires {} mesh",
            material.kind.name(),
            if material.kind.is_axisymmetric() { "a meridian" } else { "a planar" }
        )));
    }
    let space = FeSpace::new(mesh, degree, material.kind.components())?;
    let mut matrix = pattern(&space);
    let ncell = space.mesh.cells.len();
    let mut start = 0;
    while start < ncell {
        let end = (start + CHUNK).min(ncell);
        let locals: Vec<(Vec<usize>, Vec<f64>)> =
            (start..end).into_par_iter().map(|c| (space.cell_dofs(c), local_stiffness(&space, material, c))).collect();
        for (dofs, k) in locals {
            let m = dofs.len();
            for (a, &i) in dofs.iter().enumerate() {
                for (b, &j) in dofs.iter().enumerate() {
                    let pos = matrix.position(i, j).ok_or_else(|| Error::Assembly("pattern miss".into()))?;
                    matrix.val[pos] += k[a * m + b];
                }
            }
        }
        start = end;
    }
    if matrix.val.iter().any(|v| !v.is_finite()) {
        return Err(Error::Assembly("non-finite stiffness entry".into()));
    }
    Ok(SparseSystem { space, material: *material, matrix })
}

fn pattern(space: &FeSpace) -> CsrMatrix {
    let nn = space.n_nodes();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nn];
    for c in 0..space.mesh.cells.len() {
        let nodes = space.local_nodes(c);
        for &a in nodes {
            adj[a].extend_from_slice(nodes);
        }
    }
    let nc = space.components;
    let mut rows = Vec::with_capacity(nn * nc);
    for mut a in adj {
        a.sort_unstable();
        a.dedup();
        let row: Vec<usize> = a.iter().flat_map(|&n| (0..nc).map(move |k| n * nc + k)).collect();
        for _ in 0..nc {
            rows.push(row.clone());
        }
    }
    CsrMatrix::from_pattern(rows)
}

/// Dense local matrix in cell-DOF order (row-major).
fn local_stiffness(space: &FeSpace, material: &MaterialParams, cell: usize) -> Vec<f64> {
    let (g, area) = space.barycentric_gradients(cell);
    let nloc = space.nodes_per_cell();
    let nc = space.components;
    let m = nloc * nc;
    let mut k = vec![0.0; m * m];
    for (l, w) in TRI7 {
        let grads = space.shape_gradients(l, &g);
        let mut wq = w * area;
        if material.kind.is_axisymmetric() {
            wq *= 2.0 * PI * space.map_point(cell, l)[0];
        }
        match material.kind {
            ProblemKind::Conductivity | ProblemKind::AxisymConductivity => {
                for a in 0..nloc {
                    for b in 0..nloc {
                        k[a * m + b] += wq * (grads[a][0] * grads[b][0] + grads[a][1] * grads[b][1]);
                    }
                }
            }
            ProblemKind::Elasticity => {
                let (lam, mu) = (material.lambda, material.mu);
                for a in 0..nloc {
                    for b in 0..nloc {
                        let ga = grads[a];
                        let gb = grads[b];
                        let dot = ga[0] * gb[0] + ga[1] * gb[1];
                        for p in 0..2 {
                            for q in 0..2 {
                                let delta = if p == q { dot } else { 0.0 };
                                let v = lam * ga[p] * gb[q] + mu * (delta + ga[q] * gb[p]);
                                k[(a * 2 + p) * m + b * 2 + q] += wq * v;
                            }
                        }
                    }
                }
            }
        }
    }
    k
}

/// Load vector `∫ f · v` (weighted by `2 pi r` on meridian meshes).
pub fn assemble_load(space: &FeSpace, f: LoadFn<'_>) -> Vec<f64> {
    let mut out = vec![0.0; space.n_dofs()];
    let nc = space.components;
    let nloc = space.nodes_per_cell();
    let axisym = space.mesh.axisymmetric;
    for c in 0..space.mesh.cells.len() {
        let (_, area) = space.barycentric_gradients(c);
        let nodes = space.local_nodes(c);
        for (l, w) in TRI7 {
            let x = space.map_point(c, l);
            let mut wq = w * area;
            if axisym {
                wq *= 2.0 * PI * x[0];
            }
            let phi = space.shape_values(l);
            for k in 0..nc {
                let fx = f(x, k);
                for a in 0..nloc {
                    out[nodes[a] * nc + k] += wq * fx * phi[a];
                }
            }
        }
    }
    out
}

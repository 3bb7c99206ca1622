//! Discrete fields: interpolation, point evaluation, gradients and norms.

use std::sync::Arc;

use super::assemble::SparseSystem;
use super::quadrature::TRI7;
use super::space::FeSpace;
use crate::error::{Error, Result};
use crate::geometry::Point;

/// `grad[k][j] = d u_k / d x_j`; scalar fields use row 0 only.
pub type Grad = [[f64; 2]; 2];

pub fn frobenius(g: &Grad) -> f64 {
    (g[0][0] * g[0][0] + g[0][1] * g[0][1] + g[1][0] * g[1][0] + g[1][1] * g[1][1]).sqrt()
}

#[derive(Clone, Debug)]
pub struct Field {
    pub space: Arc<FeSpace>,
    pub values: Vec<f64>,
    pub dirichlet_mask: Vec<bool>,
}

/// Supremum of `|grad u|` over a segment.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SegmentSup {
    pub max: f64,
    pub midpoint: f64,
    pub argmax: Point,
}

impl Field {
    pub fn zeros(space: Arc<FeSpace>) -> Field {
        let n = space.n_dofs();
        Field { dirichlet_mask: space.dirichlet_mask(), space, values: vec![0.0; n] }
    }

    /// Nodal interpolant of `f` (components beyond the space's are ignored).
    pub fn interpolate(space: Arc<FeSpace>, f: &dyn Fn(Point) -> [f64; 2]) -> Field {
        let nc = space.components;
        let mut values = vec![0.0; space.n_dofs()];
        for (n, &p) in space.node_coords.iter().enumerate() {
            let v = f(p);
            for k in 0..nc {
                values[n * nc + k] = v[k];
            }
        }
        Field { dirichlet_mask: space.dirichlet_mask(), space, values }
    }

    pub fn components(&self) -> usize {
        self.space.components
    }

    pub fn degree(&self) -> usize {
        self.space.degree
    }

    pub fn n_dofs(&self) -> usize {
        self.values.len()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn energy(&self, system: &SparseSystem) -> f64 {
        system.pair(&self.values, &self.values)
    }

    /// Value in a known cell.
    pub fn value_in_cell(&self, cell: usize, p: Point) -> [f64; 2] {
        let s = &self.space;
        let phi = s.shape_values(s.barycentric(cell, p));
        let nc = s.components;
        let mut out = [0.0; 2];
        for (a, &n) in s.local_nodes(cell).iter().enumerate() {
            for k in 0..nc {
                out[k] += phi[a] * self.values[n * nc + k];
            }
        }
        out
    }

    /// Gradient in a known cell (the polynomial of that cell, evaluated at
    /// `p` even if `p` is slightly outside).
    pub fn gradient_in_cell(&self, cell: usize, p: Point) -> Grad {
        let s = &self.space;
        let (g, _) = s.barycentric_gradients(cell);
        let grads = s.shape_gradients(s.barycentric(cell, p), &g);
        let nc = s.components;
        let mut out = [[0.0; 2]; 2];
        for (a, &n) in s.local_nodes(cell).iter().enumerate() {
            for k in 0..nc {
                let v = self.values[n * nc + k];
                out[k][0] += grads[a][0] * v;
                out[k][1] += grads[a][1] * v;
            }
        }
        out
    }

    pub fn value_at(&self, p: Point) -> Result<[f64; 2]> {
        Ok(self.value_in_cell(self.space.locate(p)?, p))
    }

    /// Gradients at `points`; a point on a shared edge takes the gradient of
    /// the lowest-index adjacent cell.
    pub fn eval_gradient(&self, points: &[Point]) -> Result<Vec<Grad>> {
        points.iter().map(|&p| Ok(self.gradient_in_cell(self.space.locate(p)?, p))).collect()
    }

    /// `sup |grad u|` on the segment `a b`: `samples` equispaced points plus
    /// the clipped endpoints in every crossed cell. The gradient is affine
    /// per cell for degree 2 (constant for degree 1), so its norm peaks at
    /// those endpoints.
    pub fn segment_sup(&self, a: Point, b: Point, samples: usize) -> Result<SegmentSup> {
        let at = |s: f64| [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
        let mut best = SegmentSup::default();
        let consider = |g: f64, p: Point, best: &mut SegmentSup| {
            if g > best.max {
                best.max = g;
                best.argmax = p;
            }
        };
        let n = samples.max(2);
        let grads = self.eval_gradient(&(0..n).map(|i| at(i as f64 / (n - 1) as f64)).collect::<Vec<_>>())?;
        for (i, g) in grads.iter().enumerate() {
            consider(frobenius(g), at(i as f64 / (n - 1) as f64), &mut best);
        }
        let cells = self.space.locator().segment_cells(&self.space.mesh, a, b);
        for (c, s0, s1) in cells {
            for s in [s0, s1] {
                let p = at(s);
                consider(frobenius(&self.gradient_in_cell(c, p)), p, &mut best);
            }
        }
        best.midpoint = frobenius(&self.eval_gradient(&[at(0.5)])?[0]);
        if !best.max.is_finite() {
            return Err(Error::Solver("non-finite gradient on segment".into()));
        }
        Ok(best)
    }

    /// `(||u - exact||_L2, |u - exact|_H1)` by cell quadrature (weighted by
    /// `2 pi r` on meridian meshes).
    pub fn error_norms(&self, exact: &dyn Fn(Point) -> [f64; 2], exact_grad: &dyn Fn(Point) -> Grad) -> (f64, f64) {
        let s = &self.space;
        let nc = s.components;
        let (mut l2, mut h1) = (0.0, 0.0);
        for c in 0..s.mesh.cells.len() {
            let (_, area) = s.barycentric_gradients(c);
            for (l, w) in TRI7 {
                let x = s.map_point(c, l);
                let mut wq = w * area;
                if s.mesh.axisymmetric {
                    wq *= 2.0 * std::f64::consts::PI * x[0];
                }
                let u = self.value_in_cell(c, x);
                let g = self.gradient_in_cell(c, x);
                let ue = exact(x);
                let ge = exact_grad(x);
                for k in 0..nc {
                    l2 += wq * (u[k] - ue[k]).powi(2);
                    h1 += wq * ((g[k][0] - ge[k][0]).powi(2) + (g[k][1] - ge[k][1]).powi(2));
                }
            }
        }
        (l2.sqrt(), h1.sqrt())
    }

    /// Largest nodal deviation from `f`.
    pub fn max_nodal_error(&self, f: &dyn Fn(Point) -> [f64; 2]) -> f64 {
        let nc = self.components();
        let mut worst: f64 = 0.0;
        for (n, &p) in self.space.node_coords.iter().enumerate() {
            let v = f(p);
            for k in 0..nc {
                worst = worst.max((self.values[n * nc + k] - v[k]).abs());
            }
        }
        worst
    }
}

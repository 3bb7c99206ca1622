//! Dirichlet problems by elimination of the boundary DOFs.

use std::collections::HashMap;
use std::sync::Arc;

use super::assemble::{assemble_load, CsrMatrix, LoadFn, SparseSystem};
use super::field::Field;
use super::linalg::{Cholesky, SolveReport};
use crate::error::{Error, Result};
use crate::geometry::{Point, Tag};

type DataFn = Arc<dyn Fn(Point) -> [f64; 2] + Send + Sync>;

/// Boundary values per tag. Scalar problems read component 0.
#[derive(Clone, Default)]
pub struct BoundaryData {
    data: HashMap<Tag, DataFn>,
}

impl BoundaryData {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, tag: Tag, f: impl Fn(Point) -> [f64; 2] + Send + Sync + 'static) -> Self {
        self.data.insert(tag, Arc::new(f));
        self
    }

    /// The same function on `Outer`, `D1` and `D2`.
    pub fn everywhere(f: impl Fn(Point) -> [f64; 2] + Send + Sync + 'static) -> Self {
        let f: DataFn = Arc::new(f);
        let mut data = HashMap::new();
        for t in [Tag::Outer, Tag::D1, Tag::D2] {
            data.insert(t, f.clone());
        }
        BoundaryData { data }
    }

    pub fn get(&self, tag: Tag) -> Option<&(dyn Fn(Point) -> [f64; 2] + Send + Sync)> {
        self.data.get(&tag).map(|f| f.as_ref())
    }
}

/// A factored Dirichlet problem: the free-DOF block of the stiffness matrix,
/// reusable for several boundary data on the same mesh.
pub struct DirichletSolver<'s> {
    pub system: &'s SparseSystem,
    mask: Vec<bool>,
    free: Vec<usize>,
    reduced: CsrMatrix,
    chol: Cholesky,
}

impl<'s> DirichletSolver<'s> {
    pub fn new(system: &'s SparseSystem) -> Result<Self> {
        let mask = system.space.dirichlet_mask();
        if !mask.iter().any(|&m| m) {
            return Err(Error::Solver("singular system: no Dirichlet DOFs".into()));
        }
        let free: Vec<usize> = (0..mask.len()).filter(|&i| !mask[i]).collect();
        let reduced = system.matrix.submatrix(&free);
        let chol = Cholesky::factor(&reduced)?;
        Ok(DirichletSolver { system, mask, free, reduced, chol })
    }

    /// Full DOF vector holding the boundary values of `data` (zero at free
    /// DOFs).
    pub fn boundary_values(&self, data: &BoundaryData) -> Result<Vec<f64>> {
        let space = &self.system.space;
        if space.mesh.axisymmetric && data.get(Tag::Axis).is_some() {
            return Err(Error::Tag("AXIS carries the natural condition; no Dirichlet data allowed".into()));
        }
        let nc = space.components;
        let mut g = vec![0.0; space.n_dofs()];
        for (n, t) in space.node_tag.iter().enumerate() {
            let Some(t) = *t else { continue };
            if t == Tag::Axis {
                continue;
            }
            let f = data.get(t).ok_or_else(|| Error::Tag(format!("no boundary data for {}", t.name())))?;
            let v = f(space.node_coords[n]);
            for k in 0..nc {
                g[n * nc + k] = v[k];
            }
        }
        Ok(g)
    }

    /// Solves with the Dirichlet DOFs of `g` and optional load vector.
    pub fn solve(&self, g: &[f64], load: Option<&[f64]>) -> Result<(Field, SolveReport)> {
        let n = g.len();
        let mut fixed = g.to_vec();
        for i in 0..n {
            if !self.mask[i] {
                fixed[i] = 0.0;
            }
        }
        let ag = self.system.matrix.mul_vec(&fixed);
        let rhs: Vec<f64> =
            self.free.iter().map(|&i| load.map_or(0.0, |l| l[i]) - ag[i]).collect();
        let (x, report) = self.chol.solve_refined(&self.reduced, &rhs)?;
        for (k, &i) in self.free.iter().enumerate() {
            fixed[i] = x[k];
        }
        let field = Field { space: self.system.space.clone(), values: fixed, dirichlet_mask: self.mask.clone() };
        if !field.is_finite() {
            return Err(Error::Solver("non-finite solution".into()));
        }
        Ok((field, report))
    }
}

/// Solves the assembled problem with Dirichlet data on every `Outer`, `D1`
/// and `D2` node and the natural condition on `Axis`.
pub fn solve_dirichlet(system: &SparseSystem, data: &BoundaryData, load: Option<LoadFn<'_>>) -> Result<Field> {
    let solver = DirichletSolver::new(system)?;
    let g = solver.boundary_values(data)?;
    let f = load.map(|f| assemble_load(&system.space, f));
    Ok(solver.solve(&g, f.as_deref())?.0)
}

//! Lagrange P1/P2 finite elements on [`Mesh`](crate::meshgen::Mesh)
//! triangulations.
//!
//! Three bilinear forms are supported: the 2D Laplacian, the axisymmetric
//! Laplacian in meridian coordinates `(r, z) = (x, y)` with weight `2 pi r`,
//! and the 2D Lamé form `lambda div u div v + 2 mu e(u):e(v)`. Energies and
//! fluxes of axisymmetric problems are therefore true 3D quantities.

mod assemble;
mod dirichlet;
mod field;
mod flux;
mod linalg;
pub mod quadrature;
mod space;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use assemble::{assemble, assemble_load, CsrMatrix, LoadFn, SparseSystem};
pub use dirichlet::{solve_dirichlet, BoundaryData, DirichletSolver};
pub use field::{frobenius, Field, Grad, SegmentSup};
pub use flux::{boundary_vector, flux_moment, flux_quadrature, Psi};
pub use linalg::{Cholesky, SolveReport};
pub use space::{FeSpace, Locator};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProblemKind {
    Elasticity,
    Conductivity,
    AxisymConductivity,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Elasticity => "ELASTICITY",
            ProblemKind::Conductivity => "CONDUCTIVITY",
            ProblemKind::AxisymConductivity => "AXISYM_CONDUCTIVITY",
        }
    }

    pub fn parse(s: &str) -> Result<ProblemKind> {
        match s.trim().to_ascii_uppercase().as_str() {
            "ELASTICITY" => Ok(ProblemKind::Elasticity),
            "CONDUCTIVITY" => Ok(ProblemKind::Conductivity),
            "AXISYM_CONDUCTIVITY" => Ok(ProblemKind::AxisymConductivity),
            other => Err(Error::Parameter(format!("unknown problem kind '{other}'"))),
        }
    }

    pub fn components(self) -> usize {
        match self {
            ProblemKind::Elasticity => 2,
            _ => 1,
        }
    }

    /// Physical dimension `d`.
    pub fn dim(self) -> usize {
        match self {
            ProblemKind::AxisymConductivity => 3,
            _ => 2,
        }
    }

    /// Number of rigid modes per inclusion: `d(d+1)/2` for elasticity, one
    /// constant for conductivity.
    pub fn modes(self) -> usize {
        match self {
            ProblemKind::Elasticity => 3,
            _ => 1,
        }
    }

    pub fn is_axisymmetric(self) -> bool {
        self == ProblemKind::AxisymConductivity
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    pub lambda: f64,
    pub mu: f64,
    pub delta0: f64,
    pub dim: usize,
    pub kind: ProblemKind,
}

impl MaterialParams {
    /// Lamé material with the largest admissible ellipticity margin.
    pub fn elasticity(lambda: f64, mu: f64) -> Result<Self> {
        let delta0 = mu.min(1.0 / (2.0 * lambda + 2.0 * mu));
        let m = MaterialParams { lambda, mu, delta0, dim: 2, kind: ProblemKind::Elasticity };
        m.validate()?;
        Ok(m)
    }

    pub fn conductivity() -> Self {
        MaterialParams { lambda: 0.0, mu: 1.0, delta0: 0.5, dim: 2, kind: ProblemKind::Conductivity }
    }

    pub fn axisym_conductivity() -> Self {
        MaterialParams { lambda: 0.0, mu: 1.0, delta0: 0.5, dim: 3, kind: ProblemKind::AxisymConductivity }
    }

    pub fn for_kind(kind: ProblemKind, lambda: f64, mu: f64) -> Result<Self> {
        match kind {
            ProblemKind::Elasticity => Self::elasticity(lambda, mu),
            ProblemKind::Conductivity => Ok(Self::conductivity()),
            ProblemKind::AxisymConductivity => Ok(Self::axisym_conductivity()),
        }
    }

    /// Every violated invariant, in a fixed order.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let d = self.dim as f64;
        if self.dim != self.kind.dim() {
            v.push(format!("dim = {} does not match {}", self.dim, self.kind.name()));
        }
        if !(self.mu > 0.0) {
            v.push("μ>0 violated".into());
        }
        let bulk = d * self.lambda + 2.0 * self.mu;
        if !(bulk > 0.0) {
            v.push("dλ+2μ>0 violated".into());
        }
        if !(self.delta0 > 0.0) {
            v.push("δ₀>0 violated".into());
        } else {
            if self.delta0 > self.mu {
                v.push("δ₀≤μ violated".into());
            }
            if bulk > 1.0 / self.delta0 {
                v.push("dλ+2μ≤1/δ₀ violated".into());
            }
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Parameter(format!("material: {}", v.join("; "))))
        }
    }
}

//! Boundary flux moments `∫ (∂u/∂ν)|₊ · ψ` over a tagged boundary, with `ν`
//! pointing into the meshed region: the outer normal of the inclusion on
//! `D1`/`D2`, the inner normal of `Ω` on `Outer`. With this convention the
//! moments over all tags of a homogeneous solution sum to zero.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::assemble::SparseSystem;
use super::field::Field;
use super::quadrature::GAUSS3;
use super::space::FeSpace;
use super::ProblemKind;
use crate::error::{Error, Result};
use crate::geometry::{Point, Tag};

/// Test function of a moment: the constant 1 (scalar problems) or a rigid
/// displacement `ψ¹ = e₁`, `ψ² = e₂`, `ψ³ = (-x₂, x₁)` in world coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Psi {
    One,
    Rigid(usize),
}

impl Psi {
    /// The basis of rigid modes for a problem kind, in the fixed order.
    pub fn basis(kind: ProblemKind) -> Vec<Psi> {
        match kind {
            ProblemKind::Elasticity => vec![Psi::Rigid(1), Psi::Rigid(2), Psi::Rigid(3)],
            _ => vec![Psi::One],
        }
    }

    pub fn eval(self, p: Point) -> [f64; 2] {
        match self {
            Psi::One | Psi::Rigid(1) => [1.0, 0.0],
            Psi::Rigid(2) => [0.0, 1.0],
            Psi::Rigid(3) => [-p[1], p[0]],
            Psi::Rigid(k) => panic!("rigid mode index {k} out of range 1..=3"),
        }
    }

    fn check(self, components: usize) -> Result<()> {
        match (self, components) {
            (Psi::One, 1) => Ok(()),
            (Psi::Rigid(1..=3), 2) => Ok(()),
            _ => Err(Error::Parameter(format!("{self:?} does not match a {components}-component field"))),
        }
    }
}

fn check_tag(tag: Tag) -> Result<()> {
    if tag == Tag::Axis {
        return Err(Error::Tag("no flux moment on AXIS (symmetry line)".into()));
    }
    Ok(())
}

/// Vector equal to `psi` on the nodes tagged `tag` and zero elsewhere.
pub fn boundary_vector(space: &FeSpace, tag: Tag, psi: Psi) -> Vec<f64> {
    let nc = space.components;
    let mut w = vec![0.0; space.n_dofs()];
    for n in space.tagged_nodes(tag) {
        let v = psi.eval(space.node_coords[n]);
        for k in 0..nc {
            w[n * nc + k] = v[k];
        }
    }
    w
}

/// Variational flux moment `-(A u)ᵀ w`, where `w` interpolates `psi` on the
/// nodes of `tag`. Exact at the Galerkin level for discrete solutions of the
/// homogeneous problem (the residual condition is not checked here).
pub fn flux_moment(field: &Field, system: &SparseSystem, tag: Tag, psi: Psi) -> Result<f64> {
    check_tag(tag)?;
    psi.check(field.components())?;
    let w = boundary_vector(&system.space, tag, psi);
    Ok(-system.pair(&w, &field.values))
}

/// Direct quadrature of the normal flux (conductivity) or traction
/// (elasticity) on the edges of `tag`, using the gradient of the adjacent
/// cell. A lower-accuracy cross-check of [`flux_moment`].
pub fn flux_quadrature(field: &Field, system: &SparseSystem, tag: Tag, psi: Psi) -> Result<f64> {
    check_tag(tag)?;
    psi.check(field.components())?;
    let space = &system.space;
    let mesh = &space.mesh;
    let (lam, mu) = (system.material.lambda, system.material.mu);
    let mut total = 0.0;
    for (e, be) in mesh.boundary.iter().enumerate() {
        if be.tag != tag {
            continue;
        }
        let cell = space.boundary_edge_cell[e];
        let a = mesh.vertices[be.v[0]];
        let b = mesh.vertices[be.v[1]];
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        let mut nu = [-(b[1] - a[1]) / len, (b[0] - a[0]) / len];
        // Orient towards the adjacent cell, away from the inclusion.
        let c = mesh.cell_centroid(cell);
        if nu[0] * (c[0] - a[0]) + nu[1] * (c[1] - a[1]) < 0.0 {
            nu = [-nu[0], -nu[1]];
        }
        for (s, w) in GAUSS3 {
            let p = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
            let g = field.gradient_in_cell(cell, p);
            let psi_v = psi.eval(p);
            let mut wq = w * len;
            if mesh.axisymmetric {
                wq *= 2.0 * PI * p[0];
            }
            let integrand = match system.kind() {
                ProblemKind::Elasticity => {
                    let div = g[0][0] + g[1][1];
                    let mut t = [0.0; 2];
                    for i in 0..2 {
                        for j in 0..2 {
                            let sigma = lam * div * if i == j { 1.0 } else { 0.0 } + mu * (g[i][j] + g[j][i]);
                            t[i] += sigma * nu[j];
                        }
                    }
                    t[0] * psi_v[0] + t[1] * psi_v[1]
                }
                _ => (g[0][0] * nu[0] + g[0][1] * nu[1]) * psi_v[0],
            };
            total += wq * integrand;
        }
    }
    Ok(total)
}

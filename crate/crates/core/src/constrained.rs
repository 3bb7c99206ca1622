//! Rigid-inclusion and floating-conductor problems by DOF tying.
//!
//! Inclusion boundary DOFs are replaced by master unknowns: `u = E y + g`,
//! where `y` holds the free DOFs followed by the coefficients of the rigid
//! modes (or constants) and `g` carries `φ` on `Outer`. The reduced matrix
//! `Eᵀ A E` is sparse except for the few master rows and is factored by
//! Cholesky. The flux conditions on the inclusions are the natural
//! conditions of this reduced problem.

use serde::{Deserialize, Serialize};

use crate::bc::Phi;
use crate::error::{Error, Result};
use crate::fem::{boundary_vector, CsrMatrix, Cholesky, Field, ProblemKind, Psi, SolveReport, SparseSystem};
use crate::geometry::Tag;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstraintMode {
    RigidPerInclusion,
    RigidShared,
    FloatPerInclusion,
    FloatShared,
}

impl ConstraintMode {
    pub fn name(self) -> &'static str {
        match self {
            ConstraintMode::RigidPerInclusion => "RIGID_PER_INCLUSION",
            ConstraintMode::RigidShared => "RIGID_SHARED",
            ConstraintMode::FloatPerInclusion => "FLOAT_PER_INCLUSION",
            ConstraintMode::FloatShared => "FLOAT_SHARED",
        }
    }

    pub fn parse(s: &str) -> Result<ConstraintMode> {
        match s.trim().to_ascii_uppercase().as_str() {
            "RIGID_PER_INCLUSION" => Ok(ConstraintMode::RigidPerInclusion),
            "RIGID_SHARED" => Ok(ConstraintMode::RigidShared),
            "FLOAT_PER_INCLUSION" => Ok(ConstraintMode::FloatPerInclusion),
            "FLOAT_SHARED" => Ok(ConstraintMode::FloatShared),
            other => Err(Error::Parameter(format!("unknown constraint mode '{other}'"))),
        }
    }

    pub fn shared(self) -> bool {
        matches!(self, ConstraintMode::RigidShared | ConstraintMode::FloatShared)
    }

    /// The per-inclusion or shared mode matching a problem kind.
    pub fn for_kind(kind: ProblemKind, shared: bool) -> ConstraintMode {
        match (kind, shared) {
            (ProblemKind::Elasticity, false) => ConstraintMode::RigidPerInclusion,
            (ProblemKind::Elasticity, true) => ConstraintMode::RigidShared,
            (_, false) => ConstraintMode::FloatPerInclusion,
            (_, true) => ConstraintMode::FloatShared,
        }
    }

    fn check(self, kind: ProblemKind) -> Result<()> {
        let rigid = matches!(self, ConstraintMode::RigidPerInclusion | ConstraintMode::RigidShared);
        if rigid != (kind == ProblemKind::Elasticity) {
            return Err(Error::Constraint(format!("{} does not apply to {}", self.name(), kind.name())));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ConstrainedResult {
    pub mode: ConstraintMode,
    pub field: Field,
    /// Per-inclusion: `[C_1^1..C_1^m, C_2^1..C_2^m]`; shared: `[C_*^1..C_*^m]`.
    pub coefficients: Vec<f64>,
    pub energy: f64,
    pub solve: SolveReport,
}

impl ConstrainedResult {
    /// Number of rigid modes (or 1 for conductivity).
    pub fn modes(&self) -> usize {
        if self.mode.shared() {
            self.coefficients.len()
        } else {
            self.coefficients.len() / 2
        }
    }

    /// `C_i^α` with `i` in `{1, 2}` and `α` from 1; shared results return
    /// the common coefficient for either `i`.
    pub fn coefficient(&self, i: usize, alpha: usize) -> f64 {
        if self.mode.shared() {
            self.coefficients[alpha - 1]
        } else {
            self.coefficients[(i - 1) * self.modes() + alpha - 1]
        }
    }
}

/// Master vectors: `ψ^α` on the nodes of one inclusion (or both, shared).
fn master_vectors(system: &SparseSystem, mode: ConstraintMode) -> Vec<Vec<f64>> {
    let space = &system.space;
    let basis = Psi::basis(system.kind());
    let mut out = Vec::new();
    if mode.shared() {
        for &psi in &basis {
            let a = boundary_vector(space, Tag::D1, psi);
            let b = boundary_vector(space, Tag::D2, psi);
            out.push(a.iter().zip(&b).map(|(x, y)| x + y).collect());
        }
    } else {
        for tag in [Tag::D1, Tag::D2] {
            for &psi in &basis {
                out.push(boundary_vector(space, tag, psi));
            }
        }
    }
    out
}

/// Minimizes the energy over fields equal to `φ` on `Outer` and to a rigid
/// motion (constant) on each inclusion, per inclusion or shared.
pub fn solve_constrained(system: &SparseSystem, mode: ConstraintMode, phi: &Phi) -> Result<ConstrainedResult> {
    mode.check(system.kind())?;
    if phi.components != system.space.components {
        return Err(Error::Parameter("φ component count does not match the problem".into()));
    }
    let space = &system.space;
    for tag in [Tag::Outer, Tag::D1, Tag::D2] {
        if !space.node_tag.contains(&Some(tag)) {
            return Err(Error::Tag(format!("mesh has no {} boundary", tag.name())));
        }
    }
    let n = space.n_dofs();
    let nc = space.components;
    let a = &system.matrix;

    // Classify DOFs: outer (fixed), inclusion (tied), free.
    let mut outer = vec![false; n];
    let mut tied = vec![false; n];
    let mut g = vec![0.0; n];
    for (node, t) in space.node_tag.iter().enumerate() {
        match t {
            Some(Tag::Outer) => {
                let v = phi.eval(space.node_coords[node]);
                for k in 0..nc {
                    outer[node * nc + k] = true;
                    g[node * nc + k] = v[k];
                }
            }
            Some(Tag::D1 | Tag::D2) => {
                for k in 0..nc {
                    tied[node * nc + k] = true;
                }
            }
            _ => {}
        }
    }
    let free: Vec<usize> = (0..n).filter(|&i| !outer[i] && !tied[i]).collect();
    let nf = free.len();
    let mut index = vec![usize::MAX; n];
    for (k, &i) in free.iter().enumerate() {
        index[i] = k;
    }
    let w = master_vectors(system, mode);
    let m = w.len();
    let aw: Vec<Vec<f64>> = w.iter().map(|wj| a.mul_vec(wj)).collect();

    // Reduced matrix rows: free DOFs then masters.
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(nf + m);
    for &i in &free {
        let mut r: Vec<(usize, f64)> = Vec::new();
        for k in a.row_ptr[i]..a.row_ptr[i + 1] {
            let j = index[a.col[k]];
            if j != usize::MAX {
                r.push((j, a.val[k]));
            }
        }
        for (mj, awj) in aw.iter().enumerate() {
            if awj[i] != 0.0 {
                r.push((nf + mj, awj[i]));
            }
        }
        rows.push(r);
    }
    for mi in 0..m {
        let mut r: Vec<(usize, f64)> = Vec::new();
        for (k, &i) in free.iter().enumerate() {
            if aw[mi][i] != 0.0 {
                r.push((k, aw[mi][i]));
            }
        }
        for mj in 0..m {
            let v: f64 = w[mi].iter().zip(&aw[mj]).map(|(x, y)| x * y).sum();
            r.push((nf + mj, v));
        }
        rows.push(r);
    }
    let reduced = csr_from_rows(rows);

    let ag = a.mul_vec(&g);
    let mut rhs: Vec<f64> = free.iter().map(|&i| -ag[i]).collect();
    for wi in &w {
        rhs.push(-wi.iter().zip(&ag).map(|(x, y)| x * y).sum::<f64>());
    }
    let chol = Cholesky::factor(&reduced)
        .map_err(|e| Error::Constraint(format!("reduced system is not positive definite: {e}")))?;
    let (y, solve) = chol.solve_refined(&reduced, &rhs)?;

    let mut u = g;
    for (k, &i) in free.iter().enumerate() {
        u[i] = y[k];
    }
    for (mj, wj) in w.iter().enumerate() {
        let c = y[nf + mj];
        for i in 0..n {
            if tied[i] {
                u[i] += c * wj[i];
            }
        }
    }
    let field = Field { space: space.clone(), values: u, dirichlet_mask: space.dirichlet_mask() };
    if !field.is_finite() {
        return Err(Error::Solver("non-finite constrained solution".into()));
    }
    let energy = field.energy(system);
    Ok(ConstrainedResult { mode, field, coefficients: y[nf..].to_vec(), energy, solve })
}

fn csr_from_rows(rows: Vec<Vec<(usize, f64)>>) -> CsrMatrix {
    let n = rows.len();
    let mut row_ptr = Vec::with_capacity(n + 1);
    row_ptr.push(0);
    let mut col = Vec::new();
    let mut val = Vec::new();
    for mut r in rows {
        r.sort_by_key(|x| x.0);
        for (j, v) in r {
            col.push(j);
            val.push(v);
        }
        row_ptr.push(col.len());
    }
    CsrMatrix { n, row_ptr, col, val }
}

/// One flux moment required to vanish.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NaturalCondition {
    /// `D1`, `D2` or `D1+D2`.
    pub boundary: String,
    pub psi: Psi,
    pub moment: f64,
    /// `|moment| / (|u|_A |w|_A)` with `w` the test vector of the moment.
    pub relative: f64,
}

/// Flux moments that vanish at the constrained minimizer: per inclusion and
/// mode, or summed over both inclusions for shared modes.
pub fn verify_natural_conditions(system: &SparseSystem, mode: ConstraintMode, field: &Field) -> Vec<NaturalCondition> {
    let basis = Psi::basis(system.kind());
    let w = master_vectors(system, mode);
    let au = system.matrix.mul_vec(&field.values);
    let unorm = system.pair(&field.values, &field.values).max(0.0).sqrt();
    let labels: Vec<(String, Psi)> = if mode.shared() {
        basis.iter().map(|&p| ("D1+D2".to_string(), p)).collect()
    } else {
        ["D1", "D2"].iter().flat_map(|t| basis.iter().map(move |&p| (t.to_string(), p))).collect()
    };
    labels
        .into_iter()
        .zip(&w)
        .map(|((boundary, psi), wj)| {
            let moment = -wj.iter().zip(&au).map(|(x, y)| x * y).sum::<f64>();
            let wnorm = system.pair(wj, wj).max(0.0).sqrt();
            let scale = unorm * wnorm;
            let relative = if scale > 0.0 { moment.abs() / scale } else { moment.abs() };
            NaturalCondition { boundary, psi, moment, relative }
        })
        .collect()
}

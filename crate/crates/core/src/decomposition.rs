//! Coefficient decomposition `u = Σ C_i^α v_i^α + v₀` and the moment
//! systems for the inclusion coefficients.
//!
//! `v_i^α` is the discrete harmonic field equal to `ψ^α` on `∂D_i` and zero
//! on the other boundaries; `v₀` carries `φ` on `∂Ω`. Moments are energy
//! pairings: `a_ij^{αβ} = v_i^αᵀ A v_j^β` and `b̃_j^β` is the variational flux
//! of `v₀`. Indices `(i, α)` are flattened as `(i - 1) m + α - 1` with `m`
//! modes per inclusion.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bc::Phi;
use crate::error::{Error, Result};
use crate::fem::{boundary_vector, BoundaryData, DirichletSolver, Field, ProblemKind, Psi, SparseSystem};
use crate::geometry::Tag;

/// Relative condition number above which the selected system is flagged.
pub const ILL_CONDITIONED: f64 = 1e12;

#[derive(Clone, Debug)]
pub struct BasisFields {
    pub modes: usize,
    /// `v_i^α` at index `(i - 1) m + α - 1`.
    pub v: Vec<Field>,
    pub v0: Field,
}

impl BasisFields {
    pub fn vi(&self, i: usize, alpha: usize) -> &Field {
        &self.v[(i - 1) * self.modes + alpha - 1]
    }

    /// `v^α = v_1^α + v_2^α`.
    pub fn v_alpha(&self, alpha: usize) -> Field {
        let mut f = self.vi(1, alpha).clone();
        for (a, b) in f.values.iter_mut().zip(&self.vi(2, alpha).values) {
            *a += b;
        }
        f
    }
}

/// Solves for all `v_i^α` and `v₀` with one factorization.
pub fn compute_basis_fields(system: &SparseSystem, phi: &Phi) -> Result<BasisFields> {
    let kind = system.kind();
    if phi.components != kind.components() {
        return Err(Error::Parameter("φ component count does not match the problem".into()));
    }
    let solver = DirichletSolver::new(system)?;
    let basis = Psi::basis(kind);
    let modes = basis.len();
    let mut data: Vec<Vec<f64>> = Vec::with_capacity(2 * modes + 1);
    for tag in [Tag::D1, Tag::D2] {
        for &psi in &basis {
            data.push(boundary_vector(&system.space, tag, psi));
        }
    }
    let phi_c = phi.clone();
    let zero = |_| [0.0, 0.0];
    let outer = BoundaryData::new().with(Tag::Outer, move |p| phi_c.eval(p)).with(Tag::D1, zero).with(Tag::D2, zero);
    data.push(solver.boundary_values(&outer)?);
    let mut fields = data
        .par_iter()
        .map(|g| solver.solve(g, None).map(|r| r.0))
        .collect::<Result<Vec<Field>>>()?;
    let v0 = fields.pop().expect("v0 solved");
    Ok(BasisFields { modes, v: fields, v0 })
}

/// The full moment system `G C = b̃`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentSystem {
    pub gram: Vec<Vec<f64>>,
    pub rhs_tilde: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub min_eigenvalue: f64,
    /// `max |G - Gᵀ| / max |G|`.
    pub gram_asymmetry: f64,
}

pub fn assemble_moment_system(system: &SparseSystem, basis: &BasisFields) -> Result<MomentSystem> {
    let n = basis.v.len();
    let av: Vec<Vec<f64>> = basis.v.par_iter().map(|f| system.matrix.mul_vec(&f.values)).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let gram: Vec<Vec<f64>> = (0..n).map(|p| (0..n).map(|q| dot(&basis.v[p].values, &av[q])).collect()).collect();
    let scale = gram.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut asym: f64 = 0.0;
    for p in 0..n {
        for q in 0..n {
            asym = asym.max((gram[p][q] - gram[q][p]).abs());
        }
    }
    let gram_asymmetry = if scale > 0.0 { asym / scale } else { 0.0 };
    // b̃_j^β = -(A v₀)ᵀ w_jβ; w_jβ agrees with v_j^β on the Dirichlet DOFs,
    // and A v₀ vanishes elsewhere.
    let av0 = system.matrix.mul_vec(&basis.v0.values);
    let rhs_tilde: Vec<f64> = basis.v.iter().map(|f| -dot(&f.values, &av0)).collect();

    let g = DMatrix::from_fn(n, n, |p, q| 0.5 * (gram[p][q] + gram[q][p]));
    let min_eigenvalue = g.clone().symmetric_eigen().eigenvalues.min();
    if !(min_eigenvalue > 0.0) {
        return Err(Error::Assembly(format!("Gram matrix not positive definite (min eigenvalue {min_eigenvalue:e})")));
    }
    let chol = g
        .cholesky()
        .ok_or_else(|| Error::Assembly("Cholesky of the Gram matrix failed".into()))?;
    let coefficients = chol.solve(&DVector::from_vec(rhs_tilde.clone())).as_slice().to_vec();
    Ok(MomentSystem { gram, rhs_tilde, coefficients, min_eigenvalue, gram_asymmetry })
}

#[derive(Clone, Debug)]
pub struct DecompositionResult {
    pub kind: ProblemKind,
    pub basis: BasisFields,
    pub moments: MomentSystem,
    /// `u_b = Σ_{α ≤ d} C_2^α v^α + v₀` (translations only).
    pub u_b: Field,
    /// `b_j^β` = flux of `u_b` on `∂D_j` against `ψ^β`, flattened like the
    /// coefficients.
    pub b: Vec<f64>,
}

/// Number of translation modes entering `u_b`: `d` for elasticity, the
/// single constant for conductivity.
fn translations(kind: ProblemKind) -> usize {
    match kind {
        ProblemKind::Elasticity => 2,
        _ => 1,
    }
}

impl DecompositionResult {
    pub fn modes(&self) -> usize {
        self.basis.modes
    }

    pub fn coefficient(&self, i: usize, alpha: usize) -> f64 {
        self.moments.coefficients[(i - 1) * self.modes() + alpha - 1]
    }

    /// `a_ij^{αβ}`.
    pub fn a(&self, i: usize, alpha: usize, j: usize, beta: usize) -> f64 {
        let m = self.modes();
        self.moments.gram[(i - 1) * m + alpha - 1][(j - 1) * m + beta - 1]
    }

    pub fn b_j(&self, j: usize, beta: usize) -> f64 {
        self.b[(j - 1) * self.modes() + beta - 1]
    }

    pub fn c_diff(&self, alpha: usize) -> f64 {
        self.coefficient(1, alpha) - self.coefficient(2, alpha)
    }

    /// `Σ C_i^α v_i^α + v₀`.
    pub fn reconstruct(&self) -> Field {
        let mut u = self.basis.v0.clone();
        for (c, f) in self.moments.coefficients.iter().zip(&self.basis.v) {
            for (a, b) in u.values.iter_mut().zip(&f.values) {
                *a += c * b;
            }
        }
        u
    }
}

/// Basis fields, full moment system, `u_b` and `b_j^β`.
pub fn decompose(system: &SparseSystem, phi: &Phi) -> Result<DecompositionResult> {
    let basis = compute_basis_fields(system, phi)?;
    let moments = assemble_moment_system(system, &basis)?;
    let kind = system.kind();
    let m = basis.modes;
    let mut u_b = basis.v0.clone();
    for alpha in 1..=translations(kind) {
        let c2 = moments.coefficients[m + alpha - 1];
        for i in 1..=2 {
            for (a, b) in u_b.values.iter_mut().zip(&basis.vi(i, alpha).values) {
                *a += c2 * b;
            }
        }
    }
    let au = system.matrix.mul_vec(&u_b.values);
    let b = basis
        .v
        .iter()
        .map(|f| -f.values.iter().zip(&au).map(|(x, y)| x * y).sum::<f64>())
        .collect();
    Ok(DecompositionResult { kind, basis, moments, u_b, b })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectedDiagnostics {
    pub a11_11: f64,
    pub a11_22: Option<f64>,
    pub a11_12: Option<f64>,
    pub a11_33: Option<f64>,
    pub a22_33: Option<f64>,
    pub det_a22: Option<f64>,
    pub det_a: f64,
    pub cond: f64,
    pub ill_conditioned: bool,
    /// Largest relative difference between the Cramer and LU solutions.
    pub cramer_vs_lu: f64,
}

/// The selected system `A X = B`: for elasticity rows `(j, β)` =
/// `(1,1), (1,2), (1,3), (2,3)` and unknowns `(C_1^1 - C_2^1, C_1^2 - C_2^2,
/// C_1^3, C_2^3)`; for conductivity the scalar `a_11 (C_1 - C_2) = b_1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectedSystem {
    pub matrix: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    /// Cramer-rule solution.
    pub solution: Vec<f64>,
    /// `C_1^α - C_2^α` for the translations.
    pub differences: Vec<f64>,
    /// `(C_1^3, C_2^3)` for elasticity.
    pub rotations: Option<[f64; 2]>,
    pub diagnostics: SelectedDiagnostics,
}

pub fn solve_selected_system(res: &DecompositionResult) -> Result<SelectedSystem> {
    let (matrix, rhs): (Vec<Vec<f64>>, Vec<f64>) = match res.kind {
        ProblemKind::Elasticity => {
            let rows = [(1, 1), (1, 2), (1, 3), (2, 3)];
            let cols = [(1, 1), (1, 2), (1, 3), (2, 3)];
            (
                rows.iter().map(|&(j, b)| cols.iter().map(|&(i, a)| res.a(i, a, j, b)).collect()).collect(),
                rows.iter().map(|&(j, b)| res.b_j(j, b)).collect(),
            )
        }
        _ => (vec![vec![res.a(1, 1, 1, 1)]], vec![res.b_j(1, 1)]),
    };
    let n = rhs.len();
    let a = DMatrix::from_fn(n, n, |r, c| matrix[r][c]);
    let det_a = a.determinant();
    let sv = a.clone().singular_values();
    let cond = sv.max() / sv.min();
    if !cond.is_finite() || det_a == 0.0 || cond > 1.0 / f64::EPSILON {
        return Err(Error::Selection { cond });
    }
    let solution: Vec<f64> = (0..n)
        .map(|k| {
            let mut ak = a.clone();
            for r in 0..n {
                ak[(r, k)] = rhs[r];
            }
            ak.determinant() / det_a
        })
        .collect();
    let lu = a
        .clone()
        .lu()
        .solve(&DVector::from_vec(rhs.clone()))
        .ok_or(Error::Selection { cond })?;
    let xscale = solution.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cramer_vs_lu = if xscale > 0.0 {
        solution.iter().zip(lu.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / xscale
    } else {
        0.0
    };
    let elastic = res.kind == ProblemKind::Elasticity;
    let diagnostics = SelectedDiagnostics {
        a11_11: res.a(1, 1, 1, 1),
        a11_22: elastic.then(|| res.a(1, 2, 1, 2)),
        a11_12: elastic.then(|| res.a(1, 1, 1, 2)),
        a11_33: elastic.then(|| res.a(1, 3, 1, 3)),
        a22_33: elastic.then(|| res.a(2, 3, 2, 3)),
        det_a22: elastic.then(|| res.a(1, 3, 1, 3) * res.a(2, 3, 2, 3) - res.a(1, 3, 2, 3) * res.a(2, 3, 1, 3)),
        det_a,
        cond,
        ill_conditioned: cond > ILL_CONDITIONED,
        cramer_vs_lu,
    };
    let nt = translations(res.kind);
    Ok(SelectedSystem {
        differences: solution[..nt].to_vec(),
        rotations: elastic.then(|| [solution[2], solution[3]]),
        matrix,
        rhs,
        solution,
        diagnostics,
    })
}

/// One row of the diagnostics table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub eps: f64,
    pub kind: ProblemKind,
    pub a11_11: f64,
    pub a11_22: Option<f64>,
    pub a11_12: Option<f64>,
    pub a11_33: Option<f64>,
    pub a22_33: Option<f64>,
    pub det_a22: Option<f64>,
    pub c_diff: Vec<f64>,
    pub b1: Vec<f64>,
    pub cond: f64,
}

impl DiagnosticsRow {
    pub fn new(eps: f64, res: &DecompositionResult, sel: &SelectedSystem) -> DiagnosticsRow {
        let d = &sel.diagnostics;
        let nt = translations(res.kind);
        DiagnosticsRow {
            eps,
            kind: res.kind,
            a11_11: d.a11_11,
            a11_22: d.a11_22,
            a11_12: d.a11_12,
            a11_33: d.a11_33,
            a22_33: d.a22_33,
            det_a22: d.det_a22,
            c_diff: sel.differences.clone(),
            b1: (1..=nt).map(|b| res.b_j(1, b)).collect(),
            cond: d.cond,
        }
    }
}

pub const DIAGNOSTICS_COLUMNS: [&str; 10] =
    ["eps", "a11_11", "a11_12", "a11_33", "a22_33", "detA22", "C_diff_1", "C_diff_2", "b1_1", "b1_2"];

/// CSV with the fixed column order; absent quantities are empty cells.
pub fn diagnostics_csv(rows: &[DiagnosticsRow]) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut out = DIAGNOSTICS_COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        let cells = [
            r.eps.to_string(),
            r.a11_11.to_string(),
            opt(r.a11_12),
            opt(r.a11_33),
            opt(r.a22_33),
            opt(r.det_a22),
            opt(r.c_diff.first().copied()),
            opt(r.c_diff.get(1).copied()),
            opt(r.b1.first().copied()),
            opt(r.b1.get(1).copied()),
        ];
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn band(v: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = v.fold((f64::INFINITY, 0.0f64), |(lo, hi), x| (lo.min(x.abs()), hi.max(x.abs())));
    hi / lo
}

/// Fitted asymptotics over an ε series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixAsymptotics {
    /// Slope of `log a_11^{11}` (or `log a_11`) against `log(1/ε)`.
    pub a11_slope: f64,
    pub a22_slope: Option<f64>,
    /// `max |a_11^{12}| / |log ε|`.
    pub a12_over_log_max: Option<f64>,
    /// `max / min` of `a_ii^{33}` over the series.
    pub a33_band: Option<f64>,
    pub det_a22_min: Option<f64>,
    pub det_a22_band: Option<f64>,
    /// `max / min` of `a_11 / |log ε|` (axisymmetric conductivity).
    pub a11_over_log_band: f64,
}

pub fn matrix_asymptotics(rows: &[DiagnosticsRow]) -> Result<MatrixAsymptotics> {
    if rows.len() < 4 {
        return Err(Error::Grid(format!("matrix asymptotics need at least 4 eps values, got {}", rows.len())));
    }
    let eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let (lo, hi) = eps.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &e| (l.min(e), h.max(e)));
    if !(lo > 0.0) || hi / lo < 100.0 * (1.0 - 1e-9) {
        return Err(Error::Grid("eps values must be positive and span at least 2 decades".into()));
    }
    let inv: Vec<f64> = eps.iter().map(|e| 1.0 / e).collect();
    let elastic = rows[0].kind == ProblemKind::Elasticity;
    let a11: Vec<f64> = rows.iter().map(|r| r.a11_11).collect();
    let logs: Vec<f64> = eps.iter().map(|e| e.ln().abs()).collect();
    let collect = |f: &dyn Fn(&DiagnosticsRow) -> Option<f64>| -> Option<Vec<f64>> {
        if elastic {
            rows.iter().map(f).collect()
        } else {
            None
        }
    };
    let a22 = collect(&|r| r.a11_22);
    let a12 = collect(&|r| r.a11_12);
    let det = collect(&|r| r.det_a22);
    let a33 = collect(&|r| Some(r.a11_33?.min(r.a22_33?)));
    let a33_hi = collect(&|r| Some(r.a11_33?.max(r.a22_33?)));
    Ok(MatrixAsymptotics {
        a11_slope: log_slope(&inv, &a11),
        a22_slope: a22.map(|v| log_slope(&inv, &v)),
        a12_over_log_max: a12.map(|v| v.iter().zip(&logs).map(|(a, l)| a.abs() / l).fold(0.0, f64::max)),
        a33_band: a33.zip(a33_hi).map(|(lo, hi)| {
            hi.iter().fold(0.0f64, |m, v| m.max(*v)) / lo.iter().fold(f64::INFINITY, |m, v| m.min(*v))
        }),
        det_a22_min: det.as_ref().map(|v| v.iter().copied().fold(f64::INFINITY, f64::min)),
        det_a22_band: det.map(|v| band(v.into_iter())),
        a11_over_log_band: band(a11.iter().zip(&logs).map(|(a, l)| a / l)),
    })
}

//! Blow-up factors on the touching geometry and their finite-gap
//! counterparts.
//!
//! `b*_1^β[φ]` is the flux of `u_b*` through `∂D1*` against the translation
//! `ψ^β`, where `u_b*` takes the shared translation part `Σ_{α≤d} C_*^α ψ^α`
//! on both inclusions and `C_*` comes from the shared-constraint solve `u*`.
//! The flux of `u*` itself is reported alongside (`b_star_full`); the two
//! differ only through the shared rotation coefficient.

use serde::{Deserialize, Serialize};

use crate::bc::Phi;
use crate::constrained::{solve_constrained, ConstraintMode};
use crate::error::{Error, Result};
use crate::fem::{assemble, flux_moment, solve_dirichlet, BoundaryData, MaterialParams, ProblemKind, Psi};
use crate::geometry::{GapGeometry, Tag};
use crate::meshgen::{generate_mesh, Grading, Mesh};

/// Relative cusp sensitivity above which a factor is flagged.
pub const CUSP_TOLERANCE: f64 = 2e-2;
/// Relative size of the zero band for blow-up factors.
pub const ZERO_BAND: f64 = 1e-2;

/// Translation count: `d` for elasticity, one constant for conductivity.
pub fn translation_modes(kind: ProblemKind) -> usize {
    match kind {
        ProblemKind::Elasticity => 2,
        _ => 1,
    }
}

/// `ρ_d(ε)`: `√ε` in 2D, `1 / |log ε|` in 3D.
pub fn rho(kind: ProblemKind, eps: f64) -> f64 {
    if kind.dim() == 3 {
        1.0 / eps.ln().abs()
    } else {
        eps.sqrt()
    }
}

/// Threshold below which `|b*|` counts as zero: `ZERO_BAND` times the
/// boundary-gradient scale `max|φ| / R` times the inclusion size.
pub fn zero_threshold(geom: &GapGeometry, phi: &Phi) -> f64 {
    ZERO_BAND * phi.max_on_circle(geom.outer_radius) / geom.outer_radius * geom.inclusion_size()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowupFactor {
    pub cusp_cutoff: f64,
    /// `b*_1^β` for the translations, from `u_b*`.
    pub b_star: Vec<f64>,
    /// The same moments of the full shared solution `u*`.
    pub b_star_full: Vec<f64>,
    /// Shared coefficients `C_*^α` (all modes).
    pub c_star: Vec<f64>,
    pub cells: usize,
}

/// One touching-limit evaluation at the cutoff of `grading`.
pub fn compute_blowup_factor(
    touching: &GapGeometry,
    grading: &Grading,
    material: &MaterialParams,
    phi: &Phi,
    degree: usize,
) -> Result<BlowupFactor> {
    if touching.epsilon != 0.0 {
        return Err(Error::Parameter(format!("blow-up factors need the touching geometry, got eps = {}", touching.epsilon)));
    }
    let mesh = generate_mesh(touching, grading)?;
    let mut f = blowup_factor_on_mesh(mesh, material, phi, degree)?;
    f.cusp_cutoff = grading.cusp_cutoff;
    Ok(f)
}

/// Touching-limit evaluation on a given cusp mesh (`cusp_cutoff` is left 0).
pub fn blowup_factor_on_mesh(mesh: Mesh, material: &MaterialParams, phi: &Phi, degree: usize) -> Result<BlowupFactor> {
    let kind = material.kind;
    let cells = mesh.cells.len();
    let system = assemble(material, std::sync::Arc::new(mesh), degree)?;
    let shared = solve_constrained(&system, ConstraintMode::for_kind(kind, true), phi)?;
    let nt = translation_modes(kind);
    let basis = Psi::basis(kind);
    let b_star_full = basis[..nt]
        .iter()
        .map(|&psi| flux_moment(&shared.field, &system, Tag::D1, psi))
        .collect::<Result<Vec<f64>>>()?;
    let b_star = if nt == basis.len() {
        b_star_full.clone()
    } else {
        let c: Vec<f64> = shared.coefficients[..nt].to_vec();
        let motion = move |p| {
            let mut v = [0.0; 2];
            for (a, ca) in c.iter().enumerate() {
                let psi = Psi::Rigid(a + 1).eval(p);
                v[0] += ca * psi[0];
                v[1] += ca * psi[1];
            }
            v
        };
        let f = phi.clone();
        let data = BoundaryData::new().with(Tag::Outer, move |p| f.eval(p)).with(Tag::D1, motion.clone()).with(Tag::D2, motion);
        let u_b = solve_dirichlet(&system, &data, None)?;
        basis[..nt]
            .iter()
            .map(|&psi| flux_moment(&u_b, &system, Tag::D1, psi))
            .collect::<Result<Vec<f64>>>()?
    };
    Ok(BlowupFactor { cusp_cutoff: 0.0, b_star, b_star_full, c_star: shared.coefficients, cells })
}

/// `max_β |b(c) - b(c/2)| / max(|b(c)|, threshold)`.
pub fn cusp_sensitivity(coarse: &[f64], fine: &[f64], threshold: f64) -> f64 {
    coarse
        .iter()
        .zip(fine)
        .map(|(a, b)| (a - b).abs() / a.abs().max(threshold))
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    /// Some `|b*_1^β|` exceeds the zero band.
    BlowUp,
    NoBlowUpDetected,
}

/// Touching-limit factor at the configured cutoff and at half of it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TouchingFactors {
    pub factor: BlowupFactor,
    pub halved: BlowupFactor,
    pub cusp_sensitivity: f64,
    pub accuracy_warning: bool,
    pub threshold: f64,
    pub verdict: Verdict,
    /// Index `β` (from 1) of the largest factor when blowing up.
    pub k0: Option<usize>,
}

/// Solves the touching limit of `geom` at `grading.cusp_cutoff` and at half
/// of it. `geom` may be a finite-gap member; its touching limit is used.
pub fn touching_factors(
    geom: &GapGeometry,
    grading: &Grading,
    material: &MaterialParams,
    phi: &Phi,
    degree: usize,
) -> Result<TouchingFactors> {
    let touching = if geom.epsilon > 0.0 { geom.touching_limit()? } else { geom.clone() };
    let halved_grading = Grading { cusp_cutoff: 0.5 * grading.cusp_cutoff, ..*grading };
    let (factor, halved) = rayon::join(
        || compute_blowup_factor(&touching, grading, material, phi, degree),
        || compute_blowup_factor(&touching, &halved_grading, material, phi, degree),
    );
    let (factor, halved) = (factor?, halved?);
    let threshold = zero_threshold(&touching, phi);
    let sens = cusp_sensitivity(&factor.b_star, &halved.b_star, threshold);
    let (k, big) = factor
        .b_star
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |(k, m), (i, v)| if v.abs() > m { (i, v.abs()) } else { (k, m) });
    let blow = big > threshold;
    Ok(TouchingFactors {
        cusp_sensitivity: sens,
        accuracy_warning: sens > CUSP_TOLERANCE,
        threshold,
        verdict: if blow { Verdict::BlowUp } else { Verdict::NoBlowUpDetected },
        k0: blow.then_some(k + 1),
        factor,
        halved,
    })
}

/// `|b_1^β(ε) - b*_1^β|` along the grid for one `β`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub beta: usize,
    pub b_star: f64,
    pub eps: Vec<f64>,
    pub error: Vec<f64>,
    pub inversions: usize,
    /// Final error relative to `|b*|`.
    pub final_relative: f64,
    /// Log-log slope of the error against `ε` (informational).
    pub decay_slope: f64,
    /// `|b*|` exceeds the zero band, so the decrease is asserted.
    pub asserted: bool,
    pub pass: bool,
}

/// Number of increases along a sequence.
pub fn inversions(v: &[f64]) -> usize {
    v.windows(2).filter(|w| w[1] > w[0]).count()
}

/// Compares `b_eps` rows `(ε, [b_1^β])` (ε decreasing) with `b_star`.
pub fn convergence_study(b_star: &[f64], b_eps: &[(f64, Vec<f64>)], threshold: f64) -> Result<Vec<ConvergenceRow>> {
    if b_eps.len() < 4 {
        return Err(Error::Grid(format!("convergence study needs at least 4 eps values, got {}", b_eps.len())));
    }
    if b_eps.windows(2).any(|w| !(w[1].0 < w[0].0)) {
        return Err(Error::Grid("eps grid must be strictly decreasing".into()));
    }
    let eps: Vec<f64> = b_eps.iter().map(|r| r.0).collect();
    Ok(b_star
        .iter()
        .enumerate()
        .map(|(k, &bs)| {
            let error: Vec<f64> = b_eps.iter().map(|r| (r.1[k] - bs).abs()).collect();
            let inv = inversions(&error);
            let last = *error.last().unwrap();
            let asserted = bs.abs() > threshold;
            let final_relative = if bs != 0.0 { last / bs.abs() } else { f64::INFINITY };
            let positive = error.iter().all(|e| *e > 0.0);
            ConvergenceRow {
                beta: k + 1,
                b_star: bs,
                decay_slope: if positive { crate::decomposition::log_slope(&eps, &error) } else { f64::NAN },
                pass: !asserted || (inv <= 1 && final_relative <= 0.1),
                eps: eps.clone(),
                error,
                inversions: inv,
                final_relative,
                asserted,
            }
        })
        .collect())
}

/// `|½(C_1^α + C_2^α) - C_*^α|` along the grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientConvergence {
    pub alpha: usize,
    pub distance: Vec<f64>,
    pub inversions: usize,
    /// Final distance relative to `max_i |C_i^α|` over the sweep.
    pub final_relative: f64,
}

/// `coefficients` rows hold `[C_1^1..C_1^m, C_2^1..C_2^m]`, ε decreasing.
pub fn coefficient_convergence(c_star: &[f64], coefficients: &[Vec<f64>]) -> Vec<CoefficientConvergence> {
    let m = c_star.len();
    (0..m)
        .map(|a| {
            let distance: Vec<f64> =
                coefficients.iter().map(|c| (0.5 * (c[a] + c[m + a]) - c_star[a]).abs()).collect();
            let scale = coefficients.iter().map(|c| c[a].abs().max(c[m + a].abs())).fold(0.0, f64::max);
            let last = distance.last().copied().unwrap_or(0.0);
            CoefficientConvergence {
                alpha: a + 1,
                inversions: inversions(&distance),
                final_relative: if scale > 0.0 { last / scale } else { 0.0 },
                distance,
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundVerdict {
    pub blow_up: bool,
    /// `max|∇u| ε / ρ_d(ε)` per grid point.
    pub normalized: Vec<f64>,
    pub band_ratio: f64,
    /// Log-log slope of `max|∇u|` against `1/ε`.
    pub exponent: f64,
    pub pass: bool,
}

/// With a nonzero factor, the normalized gradient must stay within a
/// factor 5; without, the gradient must grow slower than `ε^{-1/4}`.
pub fn lower_bound_check(kind: ProblemKind, max_grad: &[(f64, f64)], verdict: Verdict) -> LowerBoundVerdict {
    let normalized: Vec<f64> = max_grad.iter().map(|&(e, g)| g * e / rho(kind, e)).collect();
    let (lo, hi) = normalized.iter().fold((f64::INFINITY, 0.0f64), |(l, h), v| (l.min(*v), h.max(*v)));
    let band_ratio = hi / lo;
    let inv: Vec<f64> = max_grad.iter().map(|r| 1.0 / r.0).collect();
    let g: Vec<f64> = max_grad.iter().map(|r| r.1).collect();
    let exponent = if g.iter().all(|v| *v > 0.0) { crate::decomposition::log_slope(&inv, &g) } else { 0.0 };
    let blow_up = verdict == Verdict::BlowUp;
    let pass = if blow_up { band_ratio < 5.0 } else { exponent < 0.25 };
    LowerBoundVerdict { blow_up, normalized, band_ratio, exponent, pass }
}

/// Serialized blow-up report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlowupReport {
    pub kind: ProblemKind,
    pub phi: String,
    pub b_star: Vec<f64>,
    pub b_star_full: Vec<f64>,
    pub c_star: Vec<f64>,
    /// Rows `[eps, b_1^1, ...]`.
    pub b_eps: Vec<Vec<f64>>,
    pub cusp_sensitivity: f64,
    pub accuracy_warning: bool,
    pub threshold: f64,
    pub verdict: Verdict,
    pub convergence: Vec<ConvergenceRow>,
}

impl BlowupReport {
    pub fn new(kind: ProblemKind, phi: &Phi, t: &TouchingFactors, b_eps: &[(f64, Vec<f64>)]) -> BlowupReport {
        BlowupReport {
            kind,
            phi: phi.id(),
            b_star: t.factor.b_star.clone(),
            b_star_full: t.factor.b_star_full.clone(),
            c_star: t.factor.c_star.clone(),
            b_eps: b_eps.iter().map(|(e, b)| std::iter::once(*e).chain(b.iter().copied()).collect()).collect(),
            cusp_sensitivity: t.cusp_sensitivity,
            accuracy_warning: t.accuracy_warning,
            threshold: t.threshold,
            verdict: t.verdict,
            convergence: convergence_study(&t.factor.b_star, b_eps, t.threshold).unwrap_or_default(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

//! Acceptance criteria, one PASS/FAIL line each. Sub-checks of a criterion
//! carry the criterion number in their label.

use std::process::ExitCode;
use std::sync::Arc;

use gaplab::bc::{Phi, PhiSpec, Preset};
use gaplab::blowup::{
    blowup_factor_on_mesh, coefficient_convergence, convergence_study, inversions, lower_bound_check, Verdict,
};
use gaplab::decomposition::{log_slope, matrix_asymptotics};
use gaplab::fem::{
    assemble, flux_moment, flux_quadrature, solve_dirichlet, BoundaryData, Grad, MaterialParams, ProblemKind, Psi,
};
use gaplab::geometry::{build_two_disks, Point, Tag};
use gaplab::meshgen::{generate_mesh, Grading, Mesh};
use gaplab::sweep::{fit_records, profile_check, segment_series, RateModel};
use gaplab_validation::{disks, spheres, Case, Suite};

const MINUTE: f64 = 60.0;

struct Cases {
    cond_x2: Case,
    lame_x2: Case,
    cond_x1: Case,
    axi_z: Case,
    /// `φ = x2 + x1²`: the even part gives a nonzero `C_*`.
    cond_mix: Case,
    /// `φ = (0, x2 + x1²)`.
    lame_mix: Case,
}

fn cases() -> gaplab::Result<Cases> {
    let (c, e) = (ProblemKind::Conductivity, ProblemKind::Elasticity);
    let mix = vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0];
    let lame_mix = [vec![0.0; 6], mix.clone()].concat();
    Ok(Cases {
        cond_x2: Case::run("conductivity x2", disks(c, PhiSpec::Preset(Preset::X2))?)?,
        lame_x2: Case::run("elasticity (0, x2)", disks(e, PhiSpec::Preset(Preset::X2))?)?,
        cond_x1: Case::run("conductivity x1", disks(c, PhiSpec::Preset(Preset::X1))?)?,
        axi_z: Case::run("axisymmetric z", spheres(Preset::ZAxis)?)?,
        cond_mix: Case::run("conductivity x2 + x1^2", disks(c, PhiSpec::Coefficients(mix))?)?,
        lame_mix: Case::run("elasticity (0, x2 + x1^2)", disks(e, PhiSpec::Coefficients(lame_mix))?)?,
    })
}

impl Cases {
    fn all(&self) -> [&Case; 6] {
        [&self.cond_x2, &self.lame_x2, &self.cond_x1, &self.axi_z, &self.cond_mix, &self.lame_mix]
    }
}

fn power_rate(s: &mut Suite, label: &str, case: &Case, lo: f64, hi: f64) {
    s.check_result(label, fit_records(&case.records, RateModel::Power), |s, fit| {
        let p = fit.param("p");
        s.check(label, (lo..=hi).contains(&p), format!("p = {p:.4} in [{lo}, {hi}], residual {:.3}", fit.residual));
    });
}

fn runtime(s: &mut Suite, label: &str, cases: &[&Case], limit: f64) {
    let t: f64 = cases.iter().map(|c| c.seconds).sum();
    s.check(label, t < limit, format!("{t:.1} s < {limit:.0} s"));
}

fn max_by(v: impl Iterator<Item = f64>) -> f64 {
    v.fold(0.0, f64::max)
}

fn criterion_1(s: &mut Suite, c: &Cases) {
    power_rate(s, "criterion 1 (2D conductivity rate)", &c.cond_x2, 0.45, 0.55);
    runtime(s, "criterion 1 (runtime)", &[&c.cond_x2], 10.0 * MINUTE);
}

fn criterion_2(s: &mut Suite, c: &Cases) {
    let b = c.lame_x2.factors.factor.b_star[1];
    s.check("criterion 2 (precondition |b*_1^2| > 1e-2)", b.abs() > 1e-2, format!("b*_1^2 = {b:.6}"));
    power_rate(s, "criterion 2 (2D elasticity rate)", &c.lame_x2, 0.40, 0.60);
    runtime(s, "criterion 2 (runtime)", &[&c.lame_x2], 20.0 * MINUTE);
}

fn criterion_3(s: &mut Suite, c: &Cases) {
    let case = &c.cond_x1;
    let direct = max_by(case.records.iter().map(|r| (r.coefficient(1, 1) - r.coefficient(2, 1)).abs()));
    let selected = max_by(case.records.iter().map(|r| r.c_diff[0].abs()));
    s.check(
        "criterion 3 (|C1 - C2| <= 1e-9)",
        direct <= 1e-9 && selected <= 1e-9,
        format!("direct solve {direct:.2e}, selected system {selected:.2e}"),
    );
    s.check_result("criterion 3 (exponent < 0.25)", fit_records(&case.records, RateModel::Power), |s, fit| {
        let p = fit.param("p");
        s.check("criterion 3 (exponent < 0.25)", p < 0.25, format!("p = {p:.3}"));
    });
    let lb = lower_bound_check(case.kind(), &segment_series(&case.records), case.factors.verdict);
    s.check(
        "criterion 3 (no blow-up verdict)",
        !lb.blow_up && lb.pass,
        format!("verdict {:?}, exponent {:.3}", case.factors.verdict, lb.exponent),
    );
    // The field is odd in x1 and vanishes on both inclusions, so the gap
    // gradient decays to rounding level and max/min is unbounded.
    let g: Vec<f64> = case.records.iter().map(|r| r.max_grad_segment).collect();
    let (lo, hi) = (g.iter().copied().fold(f64::INFINITY, f64::min), max_by(g.iter().copied()));
    s.check(
        "criterion 3 (gradient max/min < 3)",
        hi / lo < 3.0,
        format!("max {hi:.3e}, min {lo:.3e}, ratio {:.3e}", hi / lo),
    );
    runtime(s, "criterion 3 (runtime)", &[case], 5.0 * MINUTE);
}

fn criterion_4(s: &mut Suite, c: &Cases) {
    let mut worst: f64 = 0.0;
    for case in [&c.cond_x2, &c.cond_mix, &c.axi_z] {
        for r in &case.records {
            let direct = r.coefficient(1, 1) - r.coefficient(2, 1);
            let ratio = r.b1[0] / r.a11_11;
            worst = worst.max((direct - ratio).abs() / ratio.abs());
        }
    }
    s.check("criterion 4 (C1 - C2 = b1 / a11)", worst <= 1e-10, format!("max relative deviation {worst:.2e}"));
}

fn criterion_5(s: &mut Suite, c: &Cases) {
    let rows = |case: &Case| case.records.iter().map(|r| r.diagnostics()).collect::<Vec<_>>();
    s.check_result("criterion 5 (conductivity a11 slope)", matrix_asymptotics(&rows(&c.cond_x2)), |s, m| {
        let ok = (m.a11_slope - 0.5).abs() <= 0.05;
        s.check("criterion 5 (conductivity a11 slope)", ok, format!("slope {:.4}", m.a11_slope));
    });
    s.check_result("criterion 5 (elasticity)", matrix_asymptotics(&rows(&c.lame_x2)), |s, m| {
        let a22 = m.a22_slope.unwrap_or(f64::NAN);
        s.check(
            "criterion 5 (elasticity a11^11, a11^22 slopes)",
            (m.a11_slope - 0.5).abs() <= 0.07 && (a22 - 0.5).abs() <= 0.07,
            format!("slopes {:.4}, {a22:.4}", m.a11_slope),
        );
        // Bounded is read as max_eps |a11^12| / |log eps| <= 1 for unit
        // inclusions and unit Lame parameters.
        let a12 = m.a12_over_log_max.unwrap_or(f64::NAN);
        s.check("criterion 5 (a11^12 / |log eps| bounded)", a12 <= 1.0, format!("max {a12:.3e}"));
        let (det, band) = (m.det_a22_min.unwrap_or(f64::NAN), m.det_a22_band.unwrap_or(f64::NAN));
        s.check(
            "criterion 5 (det A22 > 0, max/min < 10)",
            det > 0.0 && band < 10.0,
            format!("min {det:.4}, max/min {band:.4}"),
        );
    });
}

/// Distances at or below this fraction of the coefficient scale are
/// rounding noise (coefficients that vanish by symmetry).
const NOISE_FLOOR: f64 = 1e-10;

fn criterion_6(s: &mut Suite, c: &Cases) {
    for case in [&c.cond_x2, &c.lame_x2, &c.cond_mix, &c.lame_mix] {
        let coefs = case.coefficients();
        let scale = max_by(coefs.iter().flatten().map(|v| v.abs()));
        let (c_star, halved) = (&case.factors.factor.c_star, &case.factors.halved.c_star);
        for row in coefficient_convergence(c_star, &coefs) {
            let a = row.alpha - 1;
            let label = format!("criterion 6 ({}, average vs C_*^{})", case.name, row.alpha);
            let top = max_by(row.distance.iter().copied());
            if top <= NOISE_FLOOR * scale {
                s.check(&label, true, format!("vanishes by symmetry (max distance {top:.1e})"));
                continue;
            }
            // Resolution of the distance: the cutoff sensitivity of C_*, once
            // for C_* and once for the finite-gap average.
            let floor = (2.0 * (c_star[a] - halved[a]).abs()).max(NOISE_FLOOR * scale);
            let clamped: Vec<f64> = row.distance.iter().map(|d| d.max(floor)).collect();
            let inv = inversions(&clamped);
            s.check(
                &label,
                inv == 0 && row.final_relative <= 0.1,
                format!(
                    "inversions {inv} above resolution {floor:.1e} ({} raw), final {:.3e} of max |C_i|",
                    row.inversions, row.final_relative
                ),
            );
        }
        let alpha = case.factors.k0.unwrap_or(1) - 1;
        let diff: Vec<f64> = case.records.iter().map(|r| r.c_diff[alpha].abs()).collect();
        let slope = log_slope(&case.eps(), &diff);
        s.check(
            &format!("criterion 6 ({}, |C1^{} - C2^{}| slope)", case.name, alpha + 1, alpha + 1),
            (0.4..=0.6).contains(&slope),
            format!("slope {slope:.4}"),
        );
    }
}

fn criterion_7(s: &mut Suite, c: &Cases) {
    for case in [&c.cond_x2, &c.lame_x2, &c.cond_mix, &c.lame_mix] {
        let t = &case.factors;
        let label = format!("criterion 7 ({})", case.name);
        s.check_result(&label.clone(), convergence_study(&t.factor.b_star, &case.b_eps(), t.threshold), |s, rows| {
            for row in rows.iter().filter(|r| r.asserted) {
                s.check(
                    &format!("{label}, b_1^{}", row.beta),
                    row.pass,
                    format!(
                        "b* = {:.6}, inversions {}, final {:.3e} of |b*|",
                        row.b_star, row.inversions, row.final_relative
                    ),
                );
            }
            s.check(&format!("{label}, nonzero factor"), rows.iter().any(|r| r.asserted), "some |b*| above threshold");
        });
    }
    // Elasticity at eps = 1e-4 specifically.
    let case = &c.lame_x2;
    let b = case.factors.factor.b_star[1];
    let r = case.records.iter().find(|r| (r.eps / 1e-4 - 1.0).abs() < 1e-9).expect("grid holds 1e-4");
    let rel = (r.b1[1] - b).abs() / b.abs();
    s.check("criterion 7 (elasticity b_1^2 at eps = 1e-4)", rel <= 0.1, format!("{rel:.3e} of |b*|"));
}

/// Least-squares `(slope, intercept)` of `y` against `x`.
fn affine_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn criterion_8(s: &mut Suite, c: &Cases) {
    let case = &c.axi_z;
    let lb = lower_bound_check(case.kind(), &segment_series(&case.records), case.factors.verdict);
    s.check(
        "criterion 8 (eps |log eps| max|grad u| band < 5)",
        lb.blow_up && lb.band_ratio < 5.0,
        format!("band {:.3}, normalized {:.3?}", lb.band_ratio, lb.normalized),
    );
    let fits = fit_records(&case.records, RateModel::Log3d).and_then(|l| Ok((l, fit_records(&case.records, RateModel::Power)?)));
    s.check_result("criterion 8 (LOG3D beats POWER)", fits, |s, (log3d, power)| {
        s.check(
            "criterion 8 (LOG3D beats POWER)",
            log3d.residual < power.residual,
            format!(
                "LOG3D c = {:.3} residual {:.3}; POWER p = {:.3} residual {:.3}",
                log3d.param("c"),
                log3d.residual,
                power.param("p"),
                power.residual
            ),
        );
    });
    // a11 = A |log eps| + B; with B > 0 the normalized gradient approaches
    // its limit like 1 - B / (A |log eps|).
    let x: Vec<f64> = case.records.iter().map(|r| r.eps.ln().abs()).collect();
    let y: Vec<f64> = case.records.iter().map(|r| r.a11_11).collect();
    let (a, b) = affine_fit(&x, &y);
    println!("info criterion 8: a11 = {a:.4} |log eps| + {b:.4}; B / (A |log eps|) runs {:.3} .. {:.3}", b / (a * x[0]), b / (a * x[x.len() - 1]));
    runtime(s, "criterion 8 (runtime)", &[case], 30.0 * MINUTE);
}

fn flux_agreement() -> gaplab::Result<f64> {
    let g = build_two_disks(5.0, 1.0, 0.1)?;
    let mesh = generate_mesh(&g, &Grading { h_far: 0.6, ..Grading::default() })?.refine_uniform().refine_uniform();
    let sys = assemble(&MaterialParams::elasticity(1.0, 1.0)?, Arc::new(mesh), 2)?;
    let zero = |_: Point| [0.0; 2];
    let rotation = |p: Point| [-p[1], p[0]];
    let cases: [(BoundaryData, [(Tag, Psi); 2]); 2] = [
        (
            BoundaryData::new().with(Tag::Outer, zero).with(Tag::D1, |_| [0.0, 1.0]).with(Tag::D2, zero),
            [(Tag::D1, Psi::Rigid(2)), (Tag::D2, Psi::Rigid(2))],
        ),
        (
            BoundaryData::new().with(Tag::Outer, zero).with(Tag::D1, rotation).with(Tag::D2, zero),
            [(Tag::D1, Psi::Rigid(3)), (Tag::D1, Psi::Rigid(1))],
        ),
    ];
    let mut worst: f64 = 0.0;
    for (data, moments) in cases {
        let u = solve_dirichlet(&sys, &data, None)?;
        for (tag, psi) in moments {
            let v = flux_moment(&u, &sys, tag, psi)?;
            let q = flux_quadrature(&u, &sys, tag, psi)?;
            worst = worst.max(((v - q) / v).abs());
        }
    }
    Ok(worst)
}

/// Final-step log-log slopes of the L2 and H1 errors for
/// `-Δu = f`, `u = sin(x) e^{y/2}`, over three uniform refinements.
fn manufactured_slopes(mesh: &Mesh, degree: usize) -> gaplab::Result<(f64, f64)> {
    let ue = |p: Point| [p[0].sin() * (0.5 * p[1]).exp(), 0.0];
    let ge = |p: Point| -> Grad {
        let e = (0.5 * p[1]).exp();
        [[p[0].cos() * e, 0.5 * p[0].sin() * e], [0.0, 0.0]]
    };
    let f = |p: Point, _k: usize| 0.75 * p[0].sin() * (0.5 * p[1]).exp();
    let (mut h, mut l2, mut h1) = (Vec::new(), Vec::new(), Vec::new());
    let mut m = mesh.clone();
    for level in 0..3 {
        if level > 0 {
            m = m.refine_uniform();
        }
        h.push(m.stats.h_max);
        let sys = assemble(&MaterialParams::conductivity(), Arc::new(m.clone()), degree)?;
        let u = solve_dirichlet(&sys, &BoundaryData::everywhere(ue), Some(&f))?;
        let (a, b) = u.error_norms(&ue, &ge);
        l2.push(a);
        h1.push(b);
    }
    let slope = |e: &[f64]| (e[1].ln() - e[2].ln()) / (h[1].ln() - h[2].ln());
    Ok((slope(&l2), slope(&h1)))
}

/// Largest deviation from additivity and homogeneity of `b*`, relative to
/// the factor scale.
fn linearity_defect(kind: ProblemKind) -> gaplab::Result<f64> {
    let m = MaterialParams::for_kind(kind, 1.0, 1.0)?;
    let mesh = generate_mesh(&build_two_disks(5.0, 1.0, 0.0)?, &Grading { h_far: 0.6, cusp_cutoff: 4e-3, ..Grading::default() })?;
    let a = Phi::preset(Preset::X2, kind)?;
    let extra = [0.3, 0.0, 1.0, 0.2, 0.0, 0.0, 0.0, -0.5, 0.0, 0.0, 0.4, 0.1];
    let b = Phi::new(PhiSpec::Coefficients(extra[..6 * kind.components()].to_vec()), kind)?;
    let eval = |p: &Phi| blowup_factor_on_mesh(mesh.clone(), &m, p, 2).map(|f| f.b_star);
    let (fa, fb, fsum, fscaled) = (eval(&a)?, eval(&b)?, eval(&a.plus(&b)?)?, eval(&a.scaled(-2.5))?);
    let scale = max_by(fa.iter().chain(&fb).map(|v| v.abs()));
    let defect = (0..fa.len())
        .map(|k| (fsum[k] - fa[k] - fb[k]).abs().max((fscaled[k] + 2.5 * fa[k]).abs()))
        .fold(0.0, f64::max);
    Ok(defect / scale)
}

fn criterion_9(s: &mut Suite, c: &Cases) {
    let records: Vec<_> = c.all().into_iter().flat_map(|case| case.records.iter()).collect();
    let valid = records.iter().all(|r| r.is_valid() && r.is_finite());
    s.check("criterion 9 (every sweep point solved)", valid, format!("{} records", records.len()));
    let asym = max_by(records.iter().map(|r| r.gram_asymmetry));
    s.check("criterion 9 (Gram symmetry <= 1e-12)", asym <= 1e-12, format!("max {asym:.2e}"));
    let eig = records.iter().map(|r| r.gram_min_eigenvalue).fold(f64::INFINITY, f64::min);
    s.check("criterion 9 (Gram SPD at every eps)", eig > 0.0, format!("min eigenvalue {eig:.3e}"));
    let rec = max_by(records.iter().map(|r| r.reconstruction_error));
    s.check("criterion 9 (reconstruction vs direct <= 1e-8)", rec <= 1e-8, format!("max {rec:.2e}"));
    let nat = max_by(records.iter().map(|r| r.natural_residual));
    s.check("criterion 9 (natural conditions <= 1e-9)", nat <= 1e-9, format!("max {nat:.2e}"));

    s.check_result("criterion 9 (variational vs quadrature flux <= 1e-2)", flux_agreement(), |s, worst| {
        s.check("criterion 9 (variational vs quadrature flux <= 1e-2)", worst <= 1e-2, format!("max relative {worst:.2e}"));
    });

    let mesh = build_two_disks(5.0, 1.0, 0.1).and_then(|g| generate_mesh(&g, &Grading { h_far: 0.6, ..Grading::default() }));
    s.check_result("criterion 9 (manufactured solution)", mesh, |s, mesh| {
        for (degree, l2_rate) in [(1usize, 2.0), (2, 3.0)] {
            let label = format!("criterion 9 (manufactured P{degree} slopes within 0.3)");
            s.check_result(&label.clone(), manufactured_slopes(&mesh, degree), |s, (l2, h1)| {
                let ok = (l2 - l2_rate).abs() <= 0.3 && (h1 - (l2_rate - 1.0)).abs() <= 0.3;
                s.check(&label, ok, format!("L2 {l2:.3} (theory {l2_rate}), H1 {h1:.3} (theory {})", l2_rate - 1.0));
            });
        }
    });

    for kind in [ProblemKind::Conductivity, ProblemKind::Elasticity] {
        let label = format!("criterion 9 ({} b* linear in phi to 1e-9)", kind.name().to_lowercase());
        s.check_result(&label.clone(), linearity_defect(kind), |s, d| {
            s.check(&label, d <= 1e-9, format!("defect {d:.2e}"));
        });
    }

    for case in c.all() {
        let t = &case.factors;
        s.check(
            &format!("criterion 9 ({} cusp sensitivity <= 2e-2)", case.name),
            t.cusp_sensitivity <= 2e-2 && t.factor.b_star.iter().all(|v| v.is_finite()),
            format!("{:.3e}, b* = {:.6?}, verdict {:?}", t.cusp_sensitivity, t.factor.b_star, t.verdict),
        );
    }
    let blowing = [&c.cond_x2, &c.lame_x2, &c.axi_z].iter().all(|case| case.factors.verdict == Verdict::BlowUp);
    s.check("criterion 9 (odd data blows up, even data does not)", blowing && c.cond_x1.factors.verdict == Verdict::NoBlowUpDetected, "touching-limit verdicts");
}

/// Envelope of the gap gradient: max over the vertical line at offset `s`
/// times `sqrt(eps) + s` stays within a factor 10.
fn profile_envelope(s: &mut Suite, c: &Cases) {
    for case in [&c.cond_x2, &c.lame_x2] {
        let mut worst = (0.0, 0.0);
        for r in &case.records {
            match profile_check(r) {
                Ok(p) if p.band_ratio > worst.1 => worst = (r.eps, p.band_ratio),
                Ok(_) => {}
                Err(e) => s.check(&format!("profile envelope ({})", case.name), false, e.to_string()),
            }
        }
        s.check(
            &format!("profile envelope ({}) band < 10", case.name),
            worst.1 < 10.0,
            format!("worst band {:.3} at eps = {:.1e}", worst.1, worst.0),
        );
    }
}

fn main() -> ExitCode {
    let cases = match cases() {
        Ok(c) => c,
        Err(e) => {
            println!("FAIL sweeps: {e}");
            return ExitCode::FAILURE;
        }
    };
    for case in cases.all() {
        println!("sweep {}: {} points, {:.1} s", case.name, case.records.len(), case.seconds);
    }
    let mut s = Suite::default();
    criterion_1(&mut s, &cases);
    criterion_2(&mut s, &cases);
    criterion_3(&mut s, &cases);
    criterion_4(&mut s, &cases);
    criterion_5(&mut s, &cases);
    criterion_6(&mut s, &cases);
    criterion_7(&mut s, &cases);
    criterion_8(&mut s, &cases);
    criterion_9(&mut s, &cases);
    profile_envelope(&mut s, &cases);
    println!("acceptance: {}", s.summary());
    for f in &s.failed {
        println!("failed: {f}");
    }
    if s.failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

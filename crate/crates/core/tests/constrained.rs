use std::sync::{Arc, OnceLock};

use gaplab::bc::{Phi, PhiSpec, Preset};
use gaplab::constrained::{solve_constrained, verify_natural_conditions, ConstraintMode};
use gaplab::fem::{assemble, BoundaryData, DirichletSolver, Field, MaterialParams, ProblemKind, Psi, SparseSystem};
use gaplab::geometry::{build_two_disks, Tag};
use gaplab::meshgen::{generate_mesh, Grading};
use gaplab::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn disks(kind: ProblemKind, eps: f64) -> SparseSystem {
    let g = build_two_disks(5.0, 1.0, eps).unwrap();
    let mesh = generate_mesh(&g, &Grading { h_far: 0.5, ..Grading::default() }).unwrap();
    let m = MaterialParams::for_kind(kind, 1.0, 1.0).unwrap();
    assemble(&m, Arc::new(mesh), 2).unwrap()
}

fn elastic() -> &'static SparseSystem {
    static S: OnceLock<SparseSystem> = OnceLock::new();
    S.get_or_init(|| disks(ProblemKind::Elasticity, 0.05))
}

fn conductive() -> &'static SparseSystem {
    static S: OnceLock<SparseSystem> = OnceLock::new();
    S.get_or_init(|| disks(ProblemKind::Conductivity, 0.05))
}

fn phi(p: Preset, kind: ProblemKind) -> Phi {
    Phi::preset(p, kind).unwrap()
}

#[test]
fn float_shared_constant_data_gives_constant_field() {
    let sys = conductive();
    let c = 2.75;
    let data = Phi::new(PhiSpec::Coefficients(vec![c, 0.0, 0.0, 0.0, 0.0, 0.0]), ProblemKind::Conductivity).unwrap();
    let r = solve_constrained(sys, ConstraintMode::FloatShared, &data).unwrap();
    assert_eq!(r.coefficients.len(), 1);
    assert!((r.coefficients[0] - c).abs() < 1e-10, "{}", r.coefficients[0]);
    assert!(r.field.max_nodal_error(&|_| [c, 0.0]) < 1e-10);
}

#[test]
fn rigid_rotation_on_outer_boundary_is_reproduced() {
    let sys = elastic();
    let r = solve_constrained(sys, ConstraintMode::RigidPerInclusion, &phi(Preset::Psi3, ProblemKind::Elasticity)).unwrap();
    for i in 1..=2 {
        for a in 1..=3 {
            let want = if a == 3 { 1.0 } else { 0.0 };
            assert!((r.coefficient(i, a) - want).abs() < 1e-9, "C_{i}^{a} = {}", r.coefficient(i, a));
        }
    }
    assert!(r.field.max_nodal_error(&|p| Psi::Rigid(3).eval(p)) < 1e-9);
    // Rounding scale: energy of a unit strain over the same region.
    let stretch = Field::interpolate(sys.space.clone(), &|p| [p[0], 0.0]);
    let scale = sys.pair(&stretch.values, &stretch.values);
    assert!(r.energy.abs() < 1e-12 * scale, "{} vs {scale}", r.energy);
}

#[test]
fn mirror_symmetric_data_gives_equal_potentials() {
    let sys = conductive();
    let r = solve_constrained(sys, ConstraintMode::FloatPerInclusion, &phi(Preset::X1, ProblemKind::Conductivity)).unwrap();
    let (c1, c2) = (r.coefficient(1, 1), r.coefficient(2, 1));
    assert!((c1 - c2).abs() <= 1e-9, "C1 = {c1}, C2 = {c2}");
}

#[test]
fn odd_data_gives_opposite_potentials() {
    let sys = conductive();
    let r = solve_constrained(sys, ConstraintMode::FloatPerInclusion, &phi(Preset::X2, ProblemKind::Conductivity)).unwrap();
    let (c1, c2) = (r.coefficient(1, 1), r.coefficient(2, 1));
    assert!(c1 > 0.1 && (c1 + c2).abs() < 1e-9, "C1 = {c1}, C2 = {c2}");
}

#[test]
fn natural_conditions_hold_per_inclusion_and_shared() {
    let sys = elastic();
    let data = phi(Preset::X2, ProblemKind::Elasticity);
    let r = solve_constrained(sys, ConstraintMode::RigidPerInclusion, &data).unwrap();
    let report = verify_natural_conditions(sys, r.mode, &r.field);
    assert_eq!(report.len(), 6);
    for c in &report {
        assert!(c.relative <= 1e-9, "{c:?}");
    }
    let csys = conductive();
    let cdata = phi(Preset::X2, ProblemKind::Conductivity);
    let s = solve_constrained(csys, ConstraintMode::FloatShared, &cdata).unwrap();
    let report = verify_natural_conditions(csys, s.mode, &s.field);
    assert_eq!(report.len(), 1);
    assert_eq!(report[0].boundary, "D1+D2");
    assert!(report[0].relative <= 1e-9, "{:?}", report[0]);
}

#[test]
fn perturbed_field_violates_natural_conditions() {
    let sys = elastic();
    let r = solve_constrained(sys, ConstraintMode::RigidPerInclusion, &phi(Preset::X2, ProblemKind::Elasticity)).unwrap();
    let mut f = r.field.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for v in f.values.iter_mut() {
        *v += 1e-3 * rng.gen_range(-1.0..1.0);
    }
    let worst = verify_natural_conditions(sys, r.mode, &f).iter().map(|c| c.relative).fold(0.0, f64::max);
    assert!(worst > 1e-6, "{worst}");
}

#[test]
fn zero_data_gives_zero_solution_in_every_mode() {
    for (sys, kind, modes) in [
        (elastic(), ProblemKind::Elasticity, [ConstraintMode::RigidPerInclusion, ConstraintMode::RigidShared]),
        (conductive(), ProblemKind::Conductivity, [ConstraintMode::FloatPerInclusion, ConstraintMode::FloatShared]),
    ] {
        for mode in modes {
            let r = solve_constrained(sys, mode, &phi(Preset::Zero, kind)).unwrap();
            assert!(r.coefficients.iter().all(|c| c.abs() <= 1e-12), "{mode:?}");
            assert!(r.field.values.iter().all(|v| v.abs() <= 1e-12), "{mode:?}");
        }
    }
}

#[test]
fn mode_must_match_problem_kind() {
    let err = solve_constrained(conductive(), ConstraintMode::RigidShared, &phi(Preset::X1, ProblemKind::Conductivity))
        .unwrap_err();
    assert!(matches!(err, Error::Constraint(_)), "{err}");
    let err = solve_constrained(elastic(), ConstraintMode::FloatPerInclusion, &phi(Preset::X1, ProblemKind::Elasticity))
        .unwrap_err();
    assert!(matches!(err, Error::Constraint(_)), "{err}");
}

#[test]
fn shared_solution_ties_both_inclusions() {
    let sys = elastic();
    let r = solve_constrained(sys, ConstraintMode::RigidShared, &phi(Preset::X2, ProblemKind::Elasticity)).unwrap();
    assert_eq!(r.coefficients.len(), 3);
    let c = r.coefficients.clone();
    let motion = move |p| {
        let v = [Psi::Rigid(1).eval(p), Psi::Rigid(2).eval(p), Psi::Rigid(3).eval(p)];
        [c[0] * v[0][0] + c[1] * v[1][0] + c[2] * v[2][0], c[0] * v[0][1] + c[1] * v[1][1] + c[2] * v[2][1]]
    };
    for tag in [Tag::D1, Tag::D2] {
        for n in sys.space.tagged_nodes(tag) {
            let u = [r.field.values[2 * n], r.field.values[2 * n + 1]];
            let m = motion(sys.space.node_coords[n]);
            assert!((u[0] - m[0]).abs() < 1e-12 && (u[1] - m[1]).abs() < 1e-12);
        }
    }
    // Sharing is a restriction of the per-inclusion space.
    let per = solve_constrained(sys, ConstraintMode::RigidPerInclusion, &phi(Preset::X2, ProblemKind::Elasticity)).unwrap();
    assert!(per.energy <= r.energy * (1.0 + 1e-12));
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    /// Harmonic extensions of arbitrary rigid motions on the inclusions never
    /// beat the constrained minimizer.
    #[test]
    fn constrained_minimizer_has_least_energy(c in proptest::collection::vec(-2.0f64..2.0, 6)) {
        let sys = elastic();
        let data = phi(Preset::X2, ProblemKind::Elasticity);
        let u = solve_constrained(sys, ConstraintMode::RigidPerInclusion, &data).unwrap();
        let rigid = |c: [f64; 3]| {
            move |p| {
                let r3 = Psi::Rigid(3).eval(p);
                [c[0] + c[2] * r3[0], c[1] + c[2] * r3[1]]
            }
        };
        let d = data.clone();
        let bd = BoundaryData::new()
            .with(Tag::Outer, move |p| d.eval(p))
            .with(Tag::D1, rigid([c[0], c[1], c[2]]))
            .with(Tag::D2, rigid([c[3], c[4], c[5]]));
        let solver = DirichletSolver::new(sys).unwrap();
        let (v, _) = solver.solve(&solver.boundary_values(&bd).unwrap(), None).unwrap();
        let ev = v.energy(sys);
        prop_assert!(u.energy <= ev + 1e-10 * ev, "{} > {}", u.energy, ev);
    }
}

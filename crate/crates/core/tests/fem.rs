use std::f64::consts::{LN_2, PI, TAU};
use std::sync::Arc;

use gaplab::fem::{
    assemble, flux_moment, flux_quadrature, solve_dirichlet, BoundaryData, Field, Grad, MaterialParams, Psi,
    SparseSystem,
};
use gaplab::geometry::{
    build_two_disks, build_two_spheres_axisym, BoundaryLoops, BoundaryPiece, Curve, Inclusion, Point, Shape, Tag,
};
use gaplab::meshgen::{generate_mesh, mesh_loops, Grading, Mesh};
use gaplab::Error;
use proptest::prelude::*;

fn unit_square(h: f64) -> Mesh {
    let corners = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
    let curves: Vec<Curve> = (0..4).map(|k| Curve::Line { a: corners[k], b: corners[(k + 1) % 4] }).collect();
    let pieces = (0..4).map(|k| BoundaryPiece { curve: k, t0: 0.0, t1: 1.0, tag: Tag::Outer }).collect();
    mesh_loops(&BoundaryLoops { curves, loops: vec![pieces] }, &|_| h, 1_000_000, 0.0).unwrap()
}

fn circle(r: f64) -> Curve {
    Curve::Polar(Inclusion { shape: Shape::Circle { radius: r }, center: [0.0, 0.0], rotation: 0.0 })
}

/// Annulus 1 < r < 2 with the inner circle tagged D1.
fn annulus(h: f64) -> Mesh {
    let bl = BoundaryLoops {
        curves: vec![circle(2.0), circle(1.0)],
        loops: vec![
            vec![BoundaryPiece { curve: 0, t0: 0.0, t1: 2.0 * PI, tag: Tag::Outer }],
            vec![BoundaryPiece { curve: 1, t0: 0.0, t1: -2.0 * PI, tag: Tag::D1 }],
        ],
    };
    mesh_loops(&bl, &|_| h, 1_000_000, 0.0).unwrap()
}

fn psi3(p: Point) -> [f64; 2] {
    [-p[1], p[0]]
}

fn system(m: MaterialParams, mesh: Mesh, degree: usize) -> SparseSystem {
    assemble(&m, Arc::new(mesh), degree).unwrap()
}

fn annulus_exact(p: Point) -> f64 {
    (2.0 / p[0].hypot(p[1])).ln() / LN_2
}

fn annulus_solution(h: f64) -> (SparseSystem, Field) {
    let sys = system(MaterialParams::conductivity(), annulus(h), 2);
    let data = BoundaryData::new().with(Tag::Outer, |_| [0.0, 0.0]).with(Tag::D1, |_| [1.0, 0.0]);
    let u = solve_dirichlet(&sys, &data, None).unwrap();
    (sys, u)
}

#[test]
fn rotation_lies_in_the_elasticity_kernel() {
    let sys = system(MaterialParams::elasticity(1.0, 1.0).unwrap(), annulus(0.2), 2);
    let u = Field::interpolate(sys.space.clone(), &psi3);
    let r = sys.matrix.mul_vec(&u.values);
    let worst = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(worst <= 1e-10 * sys.matrix.norm_inf(), "{worst}");
}

#[test]
fn constants_lie_in_the_conductivity_kernel() {
    for degree in [1, 2] {
        let sys = system(MaterialParams::conductivity(), annulus(0.2), degree);
        let r = sys.matrix.mul_vec(&vec![1.0; sys.space.n_dofs()]);
        assert!(r.iter().all(|v| v.abs() <= 1e-12));
    }
}

#[test]
fn unit_square_stretch_energy() {
    let sys = system(MaterialParams::elasticity(1.0, 1.0).unwrap(), unit_square(0.2), 2);
    let u = Field::interpolate(sys.space.clone(), &|p| [p[0], -p[1]]);
    let energy = u.energy(&sys);
    assert!((energy - 4.0).abs() < 1e-12, "{energy}");

    // Quadrature oracle: cell area times lambda (tr e)^2 + 2 mu |e|^2 from
    // the cell gradients.
    let mesh = &sys.space.mesh;
    let mut oracle = 0.0;
    for c in 0..mesh.n_cells() {
        let p = mesh.cell_points(c);
        let area = 0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[1][1] - p[0][1]) * (p[2][0] - p[0][0]));
        let g = u.gradient_in_cell(c, mesh.cell_centroid(c));
        let tr = g[0][0] + g[1][1];
        let e01 = 0.5 * (g[0][1] + g[1][0]);
        oracle += area * (tr * tr + 2.0 * (g[0][0] * g[0][0] + g[1][1] * g[1][1] + 2.0 * e01 * e01));
    }
    assert!((oracle - 4.0).abs() < 1e-12 && (energy - oracle).abs() < 1e-12);
}

#[test]
fn assembled_matrices_are_symmetric() {
    let g = build_two_disks(5.0, 1.0, 0.05).unwrap();
    let mesh = generate_mesh(&g, &Grading::default()).unwrap();
    for m in [MaterialParams::conductivity(), MaterialParams::elasticity(2.0, 0.5).unwrap()] {
        let sys = system(m, mesh.clone(), 2);
        assert!(sys.matrix.asymmetry() <= 1e-13);
    }
    let ga = build_two_spheres_axisym(5.0, 1.0, 0.05).unwrap();
    let sys = system(MaterialParams::axisym_conductivity(), generate_mesh(&ga, &Grading::default()).unwrap(), 2);
    assert!(sys.matrix.asymmetry() <= 1e-13);
}

#[test]
fn material_invariants_are_enforced() {
    assert!(matches!(MaterialParams::elasticity(1.0, -1.0), Err(Error::Parameter(_))));
    assert!(matches!(MaterialParams::elasticity(-1.5, 1.0), Err(Error::Parameter(_))));
    let mut m = MaterialParams::elasticity(1.0, 1.0).unwrap();
    m.delta0 = 0.5;
    assert!(m.validate().is_err());
    assert!(matches!(assemble(&m, Arc::new(unit_square(0.3)), 2), Err(Error::Parameter(_))));
    let axis = MaterialParams::axisym_conductivity();
    assert!(assemble(&axis, Arc::new(unit_square(0.3)), 2).is_err());
}

#[test]
fn linear_and_rigid_data_are_reproduced() {
    let g = build_two_disks(5.0, 1.0, 0.05).unwrap();
    let mesh = generate_mesh(&g, &Grading::default()).unwrap();
    for degree in [1, 2] {
        let sys = system(MaterialParams::conductivity(), mesh.clone(), degree);
        let u = solve_dirichlet(&sys, &BoundaryData::everywhere(|p| [p[0], 0.0]), None).unwrap();
        assert!(u.max_nodal_error(&|p| [p[0], 0.0]) <= 1e-10);
        for gr in u.eval_gradient(&[[0.3, 0.0], [-2.0, 2.5], [0.0, 1.5e-2]]).unwrap() {
            assert!((gr[0][0] - 1.0).abs() <= 1e-10 && gr[0][1].abs() <= 1e-10);
        }
        let sys = system(MaterialParams::elasticity(1.0, 1.0).unwrap(), mesh.clone(), degree);
        let u = solve_dirichlet(&sys, &BoundaryData::everywhere(psi3), None).unwrap();
        assert!(u.max_nodal_error(&psi3) <= 1e-10);
        for gr in u.eval_gradient(&[[0.3, 0.0], [-2.0, 2.5]]).unwrap() {
            let want: Grad = [[0.0, -1.0], [1.0, 0.0]];
            for i in 0..2 {
                for j in 0..2 {
                    assert!((gr[i][j] - want[i][j]).abs() <= 1e-10);
                }
            }
        }
    }
}

#[test]
fn interpolant_gradient_is_exact() {
    let sys = system(MaterialParams::conductivity(), annulus(0.3), 2);
    let u = Field::interpolate(sys.space.clone(), &|p| [p[0], 0.0]);
    for gr in u.eval_gradient(&[[1.5, 0.0], [0.0, -1.2], [1.1, 1.1]]).unwrap() {
        assert!((gr[0][0] - 1.0).abs() <= 1e-12 && gr[0][1].abs() <= 1e-12);
    }
    assert!(matches!(u.eval_gradient(&[[0.0, 0.0]]), Err(Error::Location(_, _))));
    assert!(matches!(u.eval_gradient(&[[3.0, 0.0]]), Err(Error::Location(_, _))));
}

#[test]
fn edge_points_take_the_lowest_cell() {
    let sys = system(MaterialParams::conductivity(), annulus(0.3), 1);
    let mesh = &sys.space.mesh;
    let mut owners = std::collections::HashMap::new();
    for (c, cell) in mesh.cells.iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (cell[k], cell[(k + 1) % 3]);
            owners.entry((a.min(b), a.max(b))).or_insert_with(Vec::new).push(c);
        }
    }
    let mut checked = 0;
    for ((a, b), cells) in owners {
        if cells.len() == 2 {
            let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
            let mid = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
            assert_eq!(sys.space.locate(mid).unwrap(), cells[0].min(cells[1]));
            checked += 1;
        }
    }
    assert!(checked > 100);
}

#[test]
fn annulus_potential_matches_closed_form() {
    let (sys, u) = annulus_solution(0.05);
    for r in [1.1, 1.25, 1.5, 1.75, 1.9] {
        for th in [0.0, 1.0, 2.5, 4.0] {
            let p = [r * f64::cos(th), r * f64::sin(th)];
            let v = u.value_at(p).unwrap()[0];
            assert!((v - annulus_exact(p)).abs() <= 1e-3, "r={r} {v}");
        }
    }
    let exact = -1.0 / (1.5 * LN_2);
    for th in [0.3, 2.0, 5.0] {
        let p = [1.5 * f64::cos(th), 1.5 * f64::sin(th)];
        let g = u.eval_gradient(&[p]).unwrap()[0];
        let radial = (g[0][0] * p[0] + g[0][1] * p[1]) / 1.5;
        assert!(((radial - exact) / exact).abs() <= 2e-3, "{radial} vs {exact}");
    }
    let flux = flux_moment(&u, &sys, Tag::D1, Psi::One).unwrap();
    let want = -2.0 * PI / LN_2;
    assert!(((flux - want) / want).abs() <= 1e-3, "{flux} vs {want}");
    let quad = flux_quadrature(&u, &sys, Tag::D1, Psi::One).unwrap();
    assert!(((quad - flux) / flux).abs() <= 1e-2);
}

#[test]
fn flux_moments_telescope() {
    let g = build_two_disks(5.0, 1.0, 0.05).unwrap();
    let mesh = generate_mesh(&g, &Grading::default()).unwrap();
    let sys = system(MaterialParams::elasticity(1.0, 1.0).unwrap(), mesh.clone(), 2);
    let data = BoundaryData::new()
        .with(Tag::Outer, |p| [0.0, p[1] / 5.0])
        .with(Tag::D1, |_| [0.3, 1.0])
        .with(Tag::D2, |p| [0.1 * p[1], -0.2]);
    let u = solve_dirichlet(&sys, &data, None).unwrap();
    for psi in Psi::basis(sys.kind()) {
        let parts: Vec<f64> =
            [Tag::Outer, Tag::D1, Tag::D2].iter().map(|&t| flux_moment(&u, &sys, t, psi).unwrap()).collect();
        let scale = parts.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(parts.iter().sum::<f64>().abs() <= 1e-9 * scale.max(1.0), "{parts:?}");
    }
    let rigid = Field::interpolate(sys.space.clone(), &|p| [1.0 - 0.5 * p[1], 2.0 + 0.5 * p[0]]);
    for psi in Psi::basis(sys.kind()) {
        for t in [Tag::D1, Tag::D2] {
            assert!(flux_moment(&rigid, &sys, t, psi).unwrap().abs() <= 1e-10);
        }
    }
    assert!(matches!(flux_moment(&u, &sys, Tag::Axis, Psi::Rigid(1)), Err(Error::Tag(_))));
    assert!(flux_moment(&u, &sys, Tag::D1, Psi::One).is_err());
}

#[test]
fn energy_pairings_are_symmetric() {
    let g = build_two_disks(5.0, 1.0, 0.02).unwrap();
    let sys = system(MaterialParams::elasticity(1.0, 1.0).unwrap(), generate_mesh(&g, &Grading::default()).unwrap(), 2);
    let a = solve_dirichlet(&sys, &BoundaryData::new().with(Tag::Outer, |_| [0.0; 2]).with(Tag::D1, psi3).with(Tag::D2, |_| [0.0; 2]), None).unwrap();
    let b = solve_dirichlet(&sys, &BoundaryData::new().with(Tag::Outer, |_| [0.0; 2]).with(Tag::D1, |_| [0.0; 2]).with(Tag::D2, |_| [0.0, 1.0]), None).unwrap();
    let ab = sys.pair(&a.values, &b.values);
    let ba = sys.pair(&b.values, &a.values);
    // Relative to the Cauchy-Schwarz scale of the pairing.
    let scale = (a.energy(&sys) * b.energy(&sys)).sqrt();
    assert!((ab - ba).abs() <= 1e-12 * scale, "{ab} {ba} {scale}");
}

#[test]
fn variational_and_quadrature_fluxes_agree_on_refined_disk_mesh() {
    let g = build_two_disks(5.0, 1.0, 0.1).unwrap();
    let mesh = generate_mesh(&g, &Grading { h_far: 0.6, ..Grading::default() }).unwrap().refine_uniform().refine_uniform();
    let sys = system(MaterialParams::elasticity(1.0, 1.0).unwrap(), mesh, 2);
    let zero = |_: Point| [0.0; 2];
    let cases: [(BoundaryData, [(Tag, Psi); 2]); 2] = [
        (
            BoundaryData::new().with(Tag::Outer, zero).with(Tag::D1, |_| [0.0, 1.0]).with(Tag::D2, zero),
            [(Tag::D1, Psi::Rigid(2)), (Tag::D2, Psi::Rigid(2))],
        ),
        (
            BoundaryData::new().with(Tag::Outer, zero).with(Tag::D1, psi3).with(Tag::D2, zero),
            [(Tag::D1, Psi::Rigid(3)), (Tag::D1, Psi::Rigid(1))],
        ),
    ];
    for (data, moments) in cases {
        let u = solve_dirichlet(&sys, &data, None).unwrap();
        for (tag, psi) in moments {
            let v = flux_moment(&u, &sys, tag, psi).unwrap();
            let q = flux_quadrature(&u, &sys, tag, psi).unwrap();
            assert!(((v - q) / v).abs() <= 1e-2, "{tag:?} {psi:?}: {v} vs {q}");
        }
    }
}

#[test]
fn no_dirichlet_dofs_is_singular() {
    let mut mesh = generate_mesh(&build_two_spheres_axisym(5.0, 1.0, 0.1).unwrap(), &Grading::default()).unwrap();
    for e in &mut mesh.boundary {
        e.tag = Tag::Axis;
    }
    let sys = system(MaterialParams::axisym_conductivity(), mesh, 1);
    assert!(matches!(solve_dirichlet(&sys, &BoundaryData::new(), None), Err(Error::Solver(_))));
}

#[test]
fn missing_or_axis_boundary_data_is_rejected() {
    let sys = system(MaterialParams::conductivity(), annulus(0.3), 1);
    let only_outer = BoundaryData::new().with(Tag::Outer, |_| [0.0; 2]);
    assert!(matches!(solve_dirichlet(&sys, &only_outer, None), Err(Error::Tag(_))));
    let g = build_two_spheres_axisym(5.0, 1.0, 0.1).unwrap();
    let sys = system(MaterialParams::axisym_conductivity(), generate_mesh(&g, &Grading::default()).unwrap(), 1);
    let data = BoundaryData::everywhere(|_| [1.0, 0.0]).with(Tag::Axis, |_| [0.0; 2]);
    assert!(matches!(solve_dirichlet(&sys, &data, None), Err(Error::Tag(_))));
}

#[test]
fn axisymmetric_harmonic_quadratic_is_reproduced() {
    // r^2 - 2 z^2 is harmonic in 3D and lies in the P2 space.
    let g = build_two_spheres_axisym(5.0, 1.0, 0.1).unwrap();
    let sys = system(MaterialParams::axisym_conductivity(), generate_mesh(&g, &Grading::default()).unwrap(), 2);
    let f = |p: Point| [p[0] * p[0] - 2.0 * p[1] * p[1], 0.0];
    let u = solve_dirichlet(&sys, &BoundaryData::everywhere(f), None).unwrap();
    assert!(u.max_nodal_error(&f) <= 1e-10);
}

/// Log-log slope of `err` against `h` over consecutive refinements.
fn slope(h: &[f64], err: &[f64]) -> f64 {
    let n = h.len() - 1;
    (err[n - 1].ln() - err[n].ln()) / (h[n - 1].ln() - h[n].ln())
}

fn manufactured_errors(mesh: Mesh, degree: usize, levels: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    // -Δu = f with u = sin(x) e^{y/2}: f = (1 - 1/4) u.
    let ue = |p: Point| [p[0].sin() * (0.5 * p[1]).exp(), 0.0];
    let ge = |p: Point| -> Grad {
        let e = (0.5 * p[1]).exp();
        [[p[0].cos() * e, 0.5 * p[0].sin() * e], [0.0, 0.0]]
    };
    let f = |p: Point, _k: usize| 0.75 * p[0].sin() * (0.5 * p[1]).exp();
    let (mut hs, mut l2s, mut h1s) = (Vec::new(), Vec::new(), Vec::new());
    let mut m = mesh;
    for level in 0..levels {
        if level > 0 {
            m = m.refine_uniform();
        }
        hs.push(m.stats.h_max);
        let sys = system(MaterialParams::conductivity(), m.clone(), degree);
        let u = solve_dirichlet(&sys, &BoundaryData::everywhere(ue), Some(&f)).unwrap();
        let (l2, h1) = u.error_norms(&ue, &ge);
        l2s.push(l2);
        h1s.push(h1);
    }
    (hs, l2s, h1s)
}

#[test]
fn manufactured_solution_converges_at_element_order() {
    let g = build_two_disks(5.0, 1.0, 0.1).unwrap();
    let mesh = generate_mesh(&g, &Grading { h_far: 0.6, ..Grading::default() }).unwrap();
    let (h, l2, h1) = manufactured_errors(mesh.clone(), 2, 3);
    let (sl2, sh1) = (slope(&h, &l2), slope(&h, &h1));
    assert!((sl2 - 3.0).abs() <= 0.3, "P2 L2 slope {sl2} ({l2:?})");
    assert!((sh1 - 2.0).abs() <= 0.3, "P2 H1 slope {sh1} ({h1:?})");
    let (h, l2, h1) = manufactured_errors(mesh, 1, 3);
    let (sl2, sh1) = (slope(&h, &l2), slope(&h, &h1));
    assert!((sl2 - 2.0).abs() <= 0.3, "P1 L2 slope {sl2}");
    assert!((sh1 - 1.0).abs() <= 0.3, "P1 H1 slope {sh1}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn affine_fields_have_constant_gradients(a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0,
                                             x in 1.05f64..1.95, th in 0.0f64..TAU) {
        let sys = system(MaterialParams::conductivity(), annulus(0.4), 2);
        let u = Field::interpolate(sys.space.clone(), &move |p| [a + b * p[0] + c * p[1], 0.0]);
        let g = u.eval_gradient(&[[x * th.cos(), x * th.sin()]]).unwrap()[0];
        prop_assert!((g[0][0] - b).abs() < 1e-11 && (g[0][1] - c).abs() < 1e-11);
    }

    #[test]
    fn rigid_motions_carry_no_energy(t1 in -1.0f64..1.0, t2 in -1.0f64..1.0, w in -1.0f64..1.0) {
        let sys = system(MaterialParams::elasticity(1.0, 1.0).unwrap(), annulus(0.4), 2);
        let u = Field::interpolate(sys.space.clone(), &move |p| [t1 - w * p[1], t2 + w * p[0]]);
        prop_assert!(u.energy(&sys).abs() < 1e-11);
    }
}

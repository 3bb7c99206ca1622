//! Gap-graded triangulations of the region outside the inclusions.
//!
//! [`generate_mesh`] discretizes the boundary loops at the local target size,
//! builds a conforming constrained Delaunay triangulation and refines it until
//! every cell meets the angle bound and the sizing field
//!
//! `h(x) = min(h_far, c_grade * delta(x') + g * (excess distance from the gap))`.
//!
//! Inside the strip `|x'| < R` between the profiles this is
//! `min(h_far, c_grade * delta(x'))`. One quarter (2D) or half (meridian
//! domain) is meshed and reflected, so the mesh is symmetric under the swap
//! of the inclusions and, in 2D, under `x_1 -> -x_1`.

mod delaunay;
mod io;

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoundaryLoops, BoundaryPiece, Curve, Frame, GapGeometry, Point, Tag};
use delaunay::{RefineParams, Triangulator};

pub use io::{read_mesh, write_mesh};

/// Angle bound used by the refinement; the mesh contract asks for 18 degrees.
pub const QUALITY_ANGLE_DEG: f64 = 25.0;
pub const MIN_ANGLE_DEG: f64 = 18.0;
/// Lipschitz constant of the sizing field away from the gap.
pub const GRADE_SLOPE: f64 = 0.25;
/// Boundary cell size relative to the curve's size scale.
pub const CURVATURE_FRACTION: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grading {
    pub c_grade: f64,
    pub h_far: f64,
    pub cusp_cutoff: f64,
    pub max_cells: usize,
}

impl Default for Grading {
    fn default() -> Self {
        Grading { c_grade: 0.5, h_far: 0.3, cusp_cutoff: 1e-3, max_cells: 2_000_000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEdge {
    pub v: [usize; 2],
    pub tag: Tag,
    /// Index into `Mesh::curves` and the curve parameters of the endpoints;
    /// `None` for imported meshes.
    pub curve: Option<usize>,
    pub t: [f64; 2],
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SizingStats {
    pub h_min: f64,
    pub h_max: f64,
    pub min_angle_deg: f64,
    /// Cells crossed by the segment `P1P2`.
    pub gap_layers: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    /// Counterclockwise vertex triples.
    pub cells: Vec<[usize; 3]>,
    pub boundary: Vec<BoundaryEdge>,
    pub curves: Vec<Curve>,
    pub axisymmetric: bool,
    pub gap_segment: Option<[Point; 2]>,
    pub stats: SizingStats,
}

/// Result of [`Mesh::check`].
#[derive(Clone, Debug, PartialEq)]
pub struct MeshReport {
    pub conforming: bool,
    pub oriented: bool,
    pub min_angle_deg: f64,
    /// Largest `dist(vertex, curve) / local size` over boundary vertices.
    pub boundary_fit: f64,
    pub problems: Vec<String>,
}

impl MeshReport {
    pub fn valid(&self) -> bool {
        self.conforming && self.oriented && self.min_angle_deg >= MIN_ANGLE_DEG && self.boundary_fit <= 1e-3
    }
}

/// Sizing field of [`generate_mesh`].
pub struct Sizing<'g> {
    geom: &'g GapGeometry,
    grading: Grading,
}

impl<'g> Sizing<'g> {
    pub fn new(geom: &'g GapGeometry, grading: Grading) -> Self {
        Sizing { geom, grading }
    }

    pub fn at(&self, p: Point) -> f64 {
        let g = self.geom;
        let q = g.to_frame(p);
        let t = q[0].abs();
        let mut tc = t.min(g.r_frame);
        if g.epsilon == 0.0 {
            tc = tc.max(self.grading.cusp_cutoff);
        }
        let x = tc.copysign(q[0]);
        let h1 = g.h1(x).unwrap();
        let h2 = g.h2(x).unwrap();
        let delta = g.epsilon + h1 - h2;
        let mid = 0.5 * (h1 + h2);
        let vert = ((q[1] - mid).abs() - 0.5 * delta).max(0.0);
        let h = self.grading.c_grade * delta + GRADE_SLOPE * ((t - g.r_frame).max(0.0) + vert);
        // Boundary chords stay short against the curvature radius, so
        // midpoint projection barely moves refined cells.
        let mut curv = CURVATURE_FRACTION * g.outer_radius + GRADE_SLOPE * (g.outer_radius - q[0].hypot(q[1])).max(0.0);
        for inc in [&g.inclusion_1, &g.inclusion_2] {
            let reach = CURVATURE_FRACTION * inc.shape.size() + GRADE_SLOPE * inc.radial_gap(q).max(0.0);
            curv = curv.min(reach);
        }
        h.min(curv).min(self.grading.h_far)
    }
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Parameters along one piece, spaced at the local target size.
fn march(curve: &Curve, t0: f64, t1: f64, size: &dyn Fn(Point) -> f64) -> Vec<f64> {
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let mut ts = vec![t0];
    let mut t = t0;
    loop {
        let p = curve.point(t);
        let eta = 1e-7 * span.max(1e-12);
        let speed = dist(curve.point(t + dir * eta), p) / eta;
        let mut target = size(p);
        let mut dt = (target / speed).min(span);
        for _ in 0..30 {
            let q = curve.point(t + dir * dt);
            let tq = target.min(size(q));
            let chord = dist(p, q);
            if chord <= 1.05 * tq {
                break;
            }
            target = tq;
            dt *= 0.9 * tq / chord;
        }
        let remaining = (t1 - t).abs();
        if dt >= remaining {
            break;
        }
        t += dir * dt;
        ts.push(t);
    }
    // Merge a short final interval into its predecessor.
    if ts.len() >= 2 {
        let n = ts.len();
        let last = dist(curve.point(ts[n - 1]), curve.point(t1));
        let prev = dist(curve.point(ts[n - 2]), curve.point(ts[n - 1]));
        if last < 0.5 * prev {
            ts[n - 1] = 0.5 * (ts[n - 2] + t1);
        }
    }
    ts.push(t1);
    ts
}

/// Builds a graded, quality triangulation of the meshed region of `geom`.
pub fn generate_mesh(geom: &GapGeometry, grading: &Grading) -> Result<Mesh> {
    if !(grading.c_grade > 0.0 && grading.h_far > 0.0) {
        return Err(Error::Parameter("c_grade and h_far must be positive".into()));
    }
    let bl = geom.boundary_loops(grading.cusp_cutoff)?;
    let sizing = Sizing::new(geom, *grading);
    let mut mesh = mirrored_mesh(geom, &bl, &|p| sizing.at(p), grading.max_cells)?;
    mesh.axisymmetric = geom.is_axisymmetric();
    mesh.gap_segment = (geom.epsilon > 0.0).then(|| [geom.p2(), geom.p1()]);
    mesh.stats = mesh.compute_stats();
    Ok(mesh)
}

/// How a boundary curve of the meshed part maps under a reflection.
#[derive(Clone, Copy)]
enum Image {
    /// Polar curve: angle `t -> 2 about - t` on the image curve.
    Angle { curve: usize, about: f64 },
    /// Line: `t -> 1 - t` on the image curve.
    Reverse(usize),
}

/// Vertices, cells and boundary edges of a partial mesh.
struct Part {
    vertices: Vec<Point>,
    cells: Vec<[usize; 3]>,
    boundary: Vec<BoundaryEdge>,
}

/// Reflection across the frame axis `q_axis = 0`.
struct Reflection<'a> {
    frame: Frame,
    axis: usize,
    /// Curves lying on the mirror line; their edges become interior.
    mirror: &'a [usize],
    images: &'a [(usize, Image)],
    /// Whether `D1` edges map to `D2`.
    swap_inclusions: bool,
}

impl Reflection<'_> {
    fn point(&self, p: Point) -> Point {
        let mut q = self.frame.to_frame(p);
        q[self.axis] = -q[self.axis];
        self.frame.to_world(q)
    }

    fn apply(&self, part: &Part) -> Part {
        let on_line = |be: &BoundaryEdge| be.curve.is_some_and(|c| self.mirror.contains(&c));
        let nv = part.vertices.len();
        let mut on_mirror = vec![false; nv];
        for be in part.boundary.iter().filter(|be| on_line(be)) {
            on_mirror[be.v[0]] = true;
            on_mirror[be.v[1]] = true;
        }
        let mut vertices = part.vertices.clone();
        let mut image = vec![0usize; nv];
        for v in 0..nv {
            image[v] = if on_mirror[v] {
                let mut q = self.frame.to_frame(vertices[v]);
                q[self.axis] = 0.0;
                vertices[v] = self.frame.to_world(q);
                v
            } else {
                vertices.push(self.point(part.vertices[v]));
                vertices.len() - 1
            };
        }
        let mut cells = part.cells.clone();
        cells.extend(part.cells.iter().map(|c| [image[c[0]], image[c[2]], image[c[1]]]));
        let map = |curve: usize, t: f64| -> (usize, f64) {
            match self.images.iter().find(|(c, _)| *c == curve).map(|(_, im)| *im) {
                Some(Image::Angle { curve, about }) => (curve, 2.0 * about - t),
                Some(Image::Reverse(c)) => (c, 1.0 - t),
                None => unreachable!("curve {curve} has no image"),
            }
        };
        let mut boundary = Vec::with_capacity(2 * part.boundary.len());
        for be in part.boundary.iter().filter(|be| !on_line(be)) {
            boundary.push(*be);
            let ci = be.curve.expect("generated edges carry curves");
            let (c0, t0) = map(ci, be.t[0]);
            let (_, t1) = map(ci, be.t[1]);
            let tag = match be.tag {
                Tag::D1 if self.swap_inclusions => Tag::D2,
                t => t,
            };
            boundary.push(BoundaryEdge { v: [image[be.v[0]], image[be.v[1]]], tag, curve: Some(c0), t: [t0, t1] });
        }
        Part { vertices, cells, boundary }
    }
}

/// Meshes part of the region and reflects it into a mesh symmetric under
/// `x_d -> -x_d` (which swaps the inclusions) and, in 2D, under
/// `x_1 -> -x_1`. The 2D families are symmetric about both frame axes, so
/// the quarter `x_1, x_d >= 0` is meshed; the meridian domain is already a
/// half and only gets the second reflection. `full` is the boundary of the
/// whole region, whose curve indices are kept.
fn mirrored_mesh(geom: &GapGeometry, full: &BoundaryLoops, size: &dyn Fn(Point) -> f64, max_cells: usize) -> Result<Mesh> {
    let fr = geom.frame;
    let rot = fr.angle;
    let r = geom.outer_radius;
    let w = |q: Point| fr.to_world(q);
    let touching = geom.epsilon == 0.0;
    let mut curves = full.curves.clone();
    let nfull = curves.len();
    let piece = |curve: usize, t0: f64, t1: f64, tag: Tag| BoundaryPiece { curve, t0, t1, tag };
    let line = |curves: &mut Vec<Curve>, a: Point, b: Point| {
        curves.push(Curve::Line { a, b });
        curves.len() - 1
    };
    let end = |c: &Curve, t: f64| c.point(t);
    let about = |c: usize, curve: usize| (c, Image::Angle { curve, about: rot });
    let side = |c: usize, curve: usize| (c, Image::Angle { curve, about: rot + FRAC_PI_2 });
    // First reflection (2D only): mirror curves and images.
    let mut first: Option<(Vec<usize>, Vec<(usize, Image)>)> = None;
    let mut second = vec![about(0, 0), about(1, 2)];
    let top = |geom: &GapGeometry| w(geom.inclusion_1.point(FRAC_PI_2));
    let loops = match (geom.is_axisymmetric(), touching) {
        // Full curves: 0 outer, 1 D1, 2 D2, 3..=5 axis lines top to bottom.
        (true, false) => {
            second.extend([(3, Image::Reverse(5)), (4, Image::Reverse(4))]);
            let m = line(&mut curves, end(&full.curves[4], 0.5), [r, 0.0]);
            vec![vec![
                piece(0, 0.0, FRAC_PI_2, Tag::Outer),
                piece(3, 0.0, 1.0, Tag::Axis),
                piece(1, FRAC_PI_2, -FRAC_PI_2, Tag::D1),
                piece(4, 0.0, 0.5, Tag::Axis),
                piece(m, 0.0, 1.0, Tag::Outer),
            ]]
        }
        // 3 top axis, 4 and 5 the cut halves (D1, D2), 6 bottom axis.
        (true, true) => {
            second.extend([(3, Image::Reverse(6)), (4, Image::Reverse(5))]);
            let ar = full.loops[0][2].t1;
            let m = line(&mut curves, end(&full.curves[4], 1.0), [r, 0.0]);
            vec![vec![
                piece(0, 0.0, FRAC_PI_2, Tag::Outer),
                piece(3, 0.0, 1.0, Tag::Axis),
                piece(1, FRAC_PI_2, ar, Tag::D1),
                piece(4, 0.0, 1.0, Tag::D1),
                piece(m, 0.0, 1.0, Tag::Outer),
            ]]
        }
        (false, false) => {
            let a = line(&mut curves, w([0.0, r]), top(geom));
            let b = line(&mut curves, w(geom.inclusion_1.point(-FRAC_PI_2)), w([0.0, 0.0]));
            let m = line(&mut curves, w([0.0, 0.0]), w([r, 0.0]));
            let m_image = line(&mut curves, w([-r, 0.0]), w([0.0, 0.0]));
            first = Some((vec![a, b], vec![side(0, 0), side(1, 1), (m, Image::Reverse(m_image))]));
            vec![vec![
                piece(0, rot, rot + FRAC_PI_2, Tag::Outer),
                piece(a, 0.0, 1.0, Tag::Outer),
                piece(1, rot + FRAC_PI_2, rot - FRAC_PI_2, Tag::D1),
                piece(b, 0.0, 1.0, Tag::Outer),
                piece(m, 0.0, 1.0, Tag::Outer),
            ]]
        }
        // 3 right cut upper half, 4 its lower half, 5 left cut lower half,
        // 6 left cut upper half.
        (false, true) => {
            second.extend([(3, Image::Reverse(4)), (6, Image::Reverse(5))]);
            let ar = full.loops[1][0].t1 + 2.0 * PI;
            let a = line(&mut curves, w([0.0, r]), top(geom));
            let m = line(&mut curves, end(&full.curves[3], 1.0), w([r, 0.0]));
            let m_image = line(&mut curves, w([-r, 0.0]), end(&full.curves[6], 0.0));
            first = Some((vec![a], vec![side(0, 0), side(1, 1), (3, Image::Reverse(6)), (m, Image::Reverse(m_image))]));
            vec![vec![
                piece(0, rot, rot + FRAC_PI_2, Tag::Outer),
                piece(a, 0.0, 1.0, Tag::Outer),
                piece(1, rot + FRAC_PI_2, ar, Tag::D1),
                piece(3, 0.0, 1.0, Tag::D1),
                piece(m, 0.0, 1.0, Tag::Outer),
            ]]
        }
    };
    let copies = if first.is_some() { 4 } else { 2 };
    let meshed = mesh_loops(&BoundaryLoops { curves: curves.clone(), loops }, size, max_cells / copies, geom.epsilon)
        .map_err(|e| match e {
            Error::Budget { eps, cells, budget } => Error::Budget { eps, cells: copies * cells, budget: copies * budget },
            e => e,
        })?;
    let mut part = Part { vertices: meshed.vertices, cells: meshed.cells, boundary: meshed.boundary };
    if let Some((mirror, images)) = &first {
        let reflection = Reflection { frame: fr, axis: 0, mirror, images, swap_inclusions: false };
        part = reflection.apply(&part);
    }
    let mirror: Vec<usize> = (nfull..curves.len()).collect();
    let reflection = Reflection { frame: fr, axis: 1, mirror: &mirror, images: &second, swap_inclusions: true };
    let Part { mut vertices, cells, boundary } = reflection.apply(&part);
    // Polar points at +-pi/2 carry a cos() roundoff; pin them to the axis.
    for be in boundary.iter().filter(|be| be.tag == Tag::Axis) {
        for v in be.v {
            vertices[v][0] = 0.0;
        }
    }
    let mut mesh = Mesh {
        vertices,
        cells,
        boundary,
        curves: full.curves.clone(),
        axisymmetric: false,
        gap_segment: None,
        stats: SizingStats::default(),
    };
    if mesh.cells.len() > max_cells {
        return Err(Error::Budget { eps: geom.epsilon, cells: mesh.cells.len(), budget: max_cells });
    }
    mesh.stats = mesh.compute_stats();
    Ok(mesh)
}

/// Meshes the region bounded by `bl` (domain to the left of every loop) with
/// cells no larger than `size`. `eps` only labels budget errors.
pub fn mesh_loops(bl: &BoundaryLoops, size: &dyn Fn(Point) -> f64, max_cells: usize, eps: f64) -> Result<Mesh> {
    // Consecutive pieces share endpoints; each loop closes on its first vertex.
    let mut verts: Vec<Point> = Vec::new();
    let mut segs: Vec<(usize, usize, f64, f64, usize, Tag)> = Vec::new();
    for lp in &bl.loops {
        let first = verts.len();
        for (k, pc) in lp.iter().enumerate() {
            let curve = &bl.curves[pc.curve];
            let ts = march(curve, pc.t0, pc.t1, size);
            let start = verts.len();
            for &t in &ts[..ts.len() - 1] {
                verts.push(curve.point(t));
            }
            let n = ts.len() - 1;
            for j in 0..n {
                let a = start + j;
                let b = if j + 1 < n {
                    start + j + 1
                } else if k + 1 < lp.len() {
                    verts.len()
                } else {
                    first
                };
                segs.push((a, b, ts[j], ts[j + 1], pc.curve, pc.tag));
            }
        }
    }
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for v in &verts {
        for d in 0..2 {
            lo[d] = lo[d].min(v[d]);
            hi[d] = hi[d].max(v[d]);
        }
    }
    let mut tr = Triangulator::new(&bl.curves, [lo, hi]);
    // Insert in a fixed pseudo-random order for expected O(1) cavities.
    let mut order: Vec<usize> = (0..verts.len()).collect();
    let mut state = 0x2545_F491_4F6C_DD1Du64;
    for i in (1..order.len()).rev() {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        order.swap(i, (state % (i as u64 + 1)) as usize);
    }
    let mut id = vec![0u32; verts.len()];
    let mut hint = 0u32;
    for &i in &order {
        let (v, t) = tr.insert(verts[i], hint)?;
        id[i] = v;
        hint = t;
    }
    for &(a, b, ta, tb, curve, tag) in &segs {
        tr.add_segment(id[a], id[b], ta, tb, curve, tag);
    }
    tr.recover_segments()?;
    tr.classify()?;
    tr.refine(&RefineParams {
        min_angle_deg: QUALITY_ANGLE_DEG,
        size,
        max_cells,
        eps,
    })?;

    // Compact: keep vertices used by inside triangles.
    let mut map = vec![usize::MAX; tr.pts.len()];
    let mut vertices = Vec::new();
    let mut cells = Vec::new();
    for t in &tr.tris {
        if !(t.alive && t.inside) {
            continue;
        }
        let mut c = [0usize; 3];
        for k in 0..3 {
            let v = t.v[k] as usize;
            if v < 3 {
                return Err(Error::Mesh("domain cell touches the super-triangle".into()));
            }
            if map[v] == usize::MAX {
                map[v] = vertices.len();
                vertices.push(tr.pts[v]);
            }
            c[k] = map[v];
        }
        cells.push(c);
    }
    let mut boundary = Vec::new();
    for s in &tr.segs {
        if !s.alive {
            continue;
        }
        let (a, b) = (map[s.a as usize], map[s.b as usize]);
        if a == usize::MAX || b == usize::MAX {
            return Err(Error::Mesh("boundary segment not attached to the domain".into()));
        }
        boundary.push(BoundaryEdge { v: [a, b], tag: s.tag, curve: Some(s.curve), t: [s.ta, s.tb] });
    }
    let mut mesh = Mesh {
        vertices,
        cells,
        boundary,
        curves: bl.curves.clone(),
        axisymmetric: false,
        gap_segment: None,
        stats: SizingStats::default(),
    };
    mesh.stats = mesh.compute_stats();
    Ok(mesh)
}

pub(crate) fn triangle_angles(p: [Point; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for i in 0..3 {
        let a = p[i];
        let b = p[(i + 1) % 3];
        let c = p[(i + 2) % 3];
        let u = [b[0] - a[0], b[1] - a[1]];
        let v = [c[0] - a[0], c[1] - a[1]];
        let cross = u[0] * v[1] - u[1] * v[0];
        let dot = u[0] * v[0] + u[1] * v[1];
        out[i] = cross.abs().atan2(dot).to_degrees();
    }
    out
}

/// Parameter interval of the segment `a + s (b - a)`, `s in [0, 1]`, inside
/// the triangle (with a small tolerance).
pub(crate) fn clip_segment(tri: [Point; 3], a: Point, b: Point, tol: f64) -> Option<(f64, f64)> {
    let (mut s0, mut s1) = (0.0f64, 1.0f64);
    let area2 = (tri[1][0] - tri[0][0]) * (tri[2][1] - tri[0][1]) - (tri[1][1] - tri[0][1]) * (tri[2][0] - tri[0][0]);
    for i in 0..3 {
        let p = tri[i];
        let q = tri[(i + 1) % 3];
        // Inward normal of edge p->q for a CCW triangle.
        let n = [-(q[1] - p[1]), q[0] - p[0]];
        let len = n[0].hypot(n[1]);
        let fa = (n[0] * (a[0] - p[0]) + n[1] * (a[1] - p[1])) / len;
        let fb = (n[0] * (b[0] - p[0]) + n[1] * (b[1] - p[1])) / len;
        let slack = tol * (area2.abs().sqrt());
        let (fa, fb) = (fa + slack, fb + slack);
        if fa < 0.0 && fb < 0.0 {
            return None;
        }
        if fa < 0.0 {
            s0 = s0.max(fa / (fa - fb));
        } else if fb < 0.0 {
            s1 = s1.min(fa / (fa - fb));
        }
    }
    (s0 <= s1).then_some((s0, s1))
}

impl Mesh {
    pub fn cell_points(&self, c: usize) -> [Point; 3] {
        let [a, b, d] = self.cells[c];
        [self.vertices[a], self.vertices[b], self.vertices[d]]
    }

    pub fn cell_diameter(&self, c: usize) -> f64 {
        let p = self.cell_points(c);
        dist(p[0], p[1]).max(dist(p[1], p[2])).max(dist(p[2], p[0]))
    }

    pub fn cell_centroid(&self, c: usize) -> Point {
        let p = self.cell_points(c);
        [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0]
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn compute_stats(&self) -> SizingStats {
        let mut s = SizingStats { h_min: f64::INFINITY, h_max: 0.0, min_angle_deg: 180.0, gap_layers: 0 };
        for c in 0..self.cells.len() {
            let d = self.cell_diameter(c);
            s.h_min = s.h_min.min(d);
            s.h_max = s.h_max.max(d);
            let ang = triangle_angles(self.cell_points(c));
            s.min_angle_deg = s.min_angle_deg.min(ang[0].min(ang[1]).min(ang[2]));
        }
        if let Some([a, b]) = self.gap_segment {
            // A small outward slack keeps cells whose edge lies on the segment
            // (the symmetry axis in meridian meshes); vertex contacts stay
            // far below the length threshold.
            s.gap_layers = (0..self.cells.len())
                .filter(|&c| matches!(clip_segment(self.cell_points(c), a, b, 1e-9), Some((s0, s1)) if s1 - s0 > 1e-6))
                .count();
        }
        s
    }

    /// Conformity, orientation, angle and boundary-fit checks.
    pub fn check(&self) -> MeshReport {
        let mut problems = Vec::new();
        let mut edges: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
        let mut oriented = true;
        for (ci, c) in self.cells.iter().enumerate() {
            let p = self.cell_points(ci);
            let a2 = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[1][1] - p[0][1]) * (p[2][0] - p[0][0]);
            if !(a2 > 0.0) {
                oriented = false;
                problems.push(format!("cell {ci} is not positively oriented"));
            }
            for k in 0..3 {
                let (a, b) = (c[k], c[(k + 1) % 3]);
                let e = edges.entry((a.min(b), a.max(b))).or_insert((0, 0));
                if a < b {
                    e.0 += 1;
                } else {
                    e.1 += 1;
                }
            }
        }
        let mut conforming = true;
        let mut tagged: HashMap<(usize, usize), Tag> = HashMap::new();
        for be in &self.boundary {
            let [a, b] = be.v;
            if tagged.insert((a.min(b), a.max(b)), be.tag).is_some() {
                conforming = false;
                problems.push(format!("boundary edge ({a}, {b}) tagged twice"));
            }
        }
        for (&(a, b), &(f, r)) in &edges {
            let total = f + r;
            let is_tagged = tagged.contains_key(&(a, b));
            if total > 2 || f > 1 || r > 1 {
                conforming = false;
                problems.push(format!("edge ({a}, {b}) shared by {total} cells"));
            } else if total == 1 && !is_tagged {
                conforming = false;
                problems.push(format!("untagged boundary edge ({a}, {b})"));
            } else if total == 2 && is_tagged {
                conforming = false;
                problems.push(format!("tagged edge ({a}, {b}) is interior"));
            }
        }
        for &(a, b) in tagged.keys() {
            if !edges.contains_key(&(a, b)) {
                conforming = false;
                problems.push(format!("tagged edge ({a}, {b}) is not a mesh edge"));
            }
        }
        let stats = self.compute_stats();
        if stats.min_angle_deg < MIN_ANGLE_DEG {
            problems.push(format!("min angle {:.3} deg below {MIN_ANGLE_DEG}", stats.min_angle_deg));
        }
        let mut fit: f64 = 0.0;
        for be in &self.boundary {
            if let Some(ci) = be.curve {
                let curve = &self.curves[ci];
                let len = dist(self.vertices[be.v[0]], self.vertices[be.v[1]]);
                for &v in &be.v {
                    fit = fit.max(curve.distance(self.vertices[v]) / len);
                }
            }
        }
        if fit > 1e-3 {
            problems.push(format!("boundary vertex off its curve by {fit:e} x local size"));
        }
        MeshReport { conforming, oriented, min_angle_deg: stats.min_angle_deg, boundary_fit: fit, problems }
    }

    /// Largest `diameter / (c_grade * delta(x'))` over cells whose centroid
    /// lies in the gap strip.
    pub fn grading_ratio(&self, geom: &GapGeometry, c_grade: f64) -> f64 {
        (0..self.cells.len())
            .filter_map(|c| {
                let q = geom.to_frame(self.cell_centroid(c));
                geom.in_gap_strip(q).then(|| self.cell_diameter(c) / (c_grade * geom.gap_width(q[0]).unwrap()))
            })
            .fold(0.0, f64::max)
    }

    /// Splits every cell into four through its edge midpoints. Boundary
    /// midpoints are placed on the exact curve at the mean parameter.
    pub fn refine_uniform(&self) -> Mesh {
        let mut vertices = self.vertices.clone();
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut bmid: HashMap<(usize, usize), Point> = HashMap::new();
        for be in &self.boundary {
            if let Some(ci) = be.curve {
                let [a, b] = be.v;
                bmid.insert((a.min(b), a.max(b)), self.curves[ci].point(0.5 * (be.t[0] + be.t[1])));
            }
        }
        let mut cells = Vec::with_capacity(4 * self.cells.len());
        for c in &self.cells {
            let mut m = [0usize; 3];
            for k in 0..3 {
                let (a, b) = (c[k], c[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                m[k] = *mid.entry(key).or_insert_with(|| {
                    let p = bmid.get(&key).copied().unwrap_or_else(|| {
                        let (pa, pb) = (self.vertices[a], self.vertices[b]);
                        [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]
                    });
                    vertices.push(p);
                    vertices.len() - 1
                });
            }
            let [v0, v1, v2] = *c;
            cells.push([v0, m[0], m[2]]);
            cells.push([m[0], v1, m[1]]);
            cells.push([m[2], m[1], v2]);
            cells.push([m[0], m[1], m[2]]);
        }
        let mut boundary = Vec::with_capacity(2 * self.boundary.len());
        for be in &self.boundary {
            let [a, b] = be.v;
            let m = mid[&(a.min(b), a.max(b))];
            let tm = 0.5 * (be.t[0] + be.t[1]);
            boundary.push(BoundaryEdge { v: [a, m], tag: be.tag, curve: be.curve, t: [be.t[0], tm] });
            boundary.push(BoundaryEdge { v: [m, b], tag: be.tag, curve: be.curve, t: [tm, be.t[1]] });
        }
        let mut out = Mesh {
            vertices,
            cells,
            boundary,
            curves: self.curves.clone(),
            axisymmetric: self.axisymmetric,
            gap_segment: self.gap_segment,
            stats: SizingStats::default(),
        };
        out.stats = out.compute_stats();
        out
    }
}

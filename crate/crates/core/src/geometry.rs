//! Two-inclusion gap geometries.
//!
//! Inclusions are stored in the gap frame, where the closest points are
//! `P1 = (0, eps/2)` and `P2 = (0, -eps/2)` and the outer disk is centered at
//! the frame origin. [`Frame`] places the configuration in world coordinates.
//! The lower boundary of `D1` near the gap is the graph `x_d = eps/2 + h1(x')`
//! and the upper boundary of `D2` is `x_d = -eps/2 + h2(x')`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Default clearance between the inclusions and the outer boundary.
pub const DEFAULT_KAPPA1: f64 = 0.1;

/// Boundary tags, listed in DOF priority order (a node on two tagged curves
/// takes the first).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tag {
    Outer,
    D1,
    D2,
    Axis,
}

impl Tag {
    pub fn name(self) -> &'static str {
        match self {
            Tag::Outer => "OUTER",
            Tag::D1 => "D1",
            Tag::D2 => "D2",
            Tag::Axis => "AXIS",
        }
    }

    pub fn parse(s: &str) -> Result<Tag> {
        match s.trim().to_ascii_uppercase().as_str() {
            "OUTER" => Ok(Tag::Outer),
            "D1" => Ok(Tag::D1),
            "D2" => Ok(Tag::D2),
            "AXIS" => Ok(Tag::Axis),
            other => Err(Error::Tag(format!("unknown tag '{other}'"))),
        }
    }

    /// Inclusion index (0 or 1) for `D1`/`D2`.
    pub fn inclusion(self) -> Option<usize> {
        match self {
            Tag::D1 => Some(0),
            Tag::D2 => Some(1),
            _ => None,
        }
    }
}

/// Convex shape in polar form about its center, in its own body frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Shape {
    Circle { radius: f64 },
    /// `|x|^p + |y|^p = a^p`.
    Superellipse { semi_axis: f64, exponent: f64 },
}

impl Shape {
    pub fn size(&self) -> f64 {
        match *self {
            Shape::Circle { radius } => radius,
            Shape::Superellipse { semi_axis, .. } => semi_axis,
        }
    }

    pub fn radial(&self, theta: f64) -> f64 {
        match *self {
            Shape::Circle { radius } => radius,
            Shape::Superellipse { semi_axis, exponent: p } => {
                let s = theta.cos().abs().powf(p) + theta.sin().abs().powf(p);
                semi_axis * s.powf(-1.0 / p)
            }
        }
    }

    pub fn radial_d(&self, theta: f64) -> f64 {
        match *self {
            Shape::Circle { .. } => 0.0,
            Shape::Superellipse { exponent: p, .. } => {
                let (s, c) = theta.sin_cos();
                let big = c.abs().powf(p) + s.abs().powf(p);
                let dbig = p
                    * (s.abs().powf(p - 1.0) * s.signum() * c
                        - c.abs().powf(p - 1.0) * c.signum() * s);
                -self.radial(theta) * dbig / (p * big)
            }
        }
    }

    pub fn radial_dd(&self, theta: f64) -> f64 {
        match *self {
            Shape::Circle { .. } => 0.0,
            Shape::Superellipse { .. } => {
                let h = 1e-5;
                (self.radial_d(theta + h) - self.radial_d(theta - h)) / (2.0 * h)
            }
        }
    }
}

/// A shape placed at `center` and turned by `rotation`. Angles passed to the
/// methods are measured in the containing frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Inclusion {
    pub shape: Shape,
    pub center: Point,
    pub rotation: f64,
}

impl Inclusion {
    pub fn rho(&self, phi: f64) -> f64 {
        self.shape.radial(phi - self.rotation)
    }

    pub fn rho_d(&self, phi: f64) -> f64 {
        self.shape.radial_d(phi - self.rotation)
    }

    pub fn rho_dd(&self, phi: f64) -> f64 {
        self.shape.radial_dd(phi - self.rotation)
    }

    pub fn point(&self, phi: f64) -> Point {
        let r = self.rho(phi);
        [self.center[0] + r * phi.cos(), self.center[1] + r * phi.sin()]
    }

    /// `(x, y, x', y', x'', y'')` along the polar parametrization.
    fn jet(&self, phi: f64) -> [f64; 6] {
        let (s, c) = phi.sin_cos();
        let (r, rd, rdd) = (self.rho(phi), self.rho_d(phi), self.rho_dd(phi));
        [
            self.center[0] + r * c,
            self.center[1] + r * s,
            rd * c - r * s,
            rd * s + r * c,
            rdd * c - 2.0 * rd * s - r * c,
            rdd * s + 2.0 * rd * c - r * s,
        ]
    }

    /// Signed radial distance: negative inside.
    pub fn radial_gap(&self, p: Point) -> f64 {
        let d = [p[0] - self.center[0], p[1] - self.center[1]];
        let phi = d[1].atan2(d[0]);
        d[0].hypot(d[1]) - self.rho(phi)
    }

    pub fn contains(&self, p: Point) -> bool {
        self.radial_gap(p) < 0.0
    }

    pub fn translated(&self, d: Point) -> Inclusion {
        Inclusion { center: [self.center[0] + d[0], self.center[1] + d[1]], ..*self }
    }

    fn max_radius_from_origin(&self) -> f64 {
        (0..2048)
            .map(|k| {
                let p = self.point(2.0 * PI * k as f64 / 2048.0);
                p[0].hypot(p[1])
            })
            .fold(0.0, f64::max)
    }

    /// Angle on the lower arc whose abscissa is `x`.
    fn lower_angle(&self, x: f64) -> f64 {
        self.solve_abscissa(x, -PI, 0.0)
    }

    /// Angle on the upper arc whose abscissa is `x`.
    fn upper_angle(&self, x: f64) -> f64 {
        self.solve_abscissa(x, 0.0, PI)
    }

    fn solve_abscissa(&self, x: f64, lo: f64, hi: f64) -> f64 {
        if let Shape::Circle { radius } = self.shape {
            let c = ((x - self.center[0]) / radius).clamp(-1.0, 1.0);
            let a = c.acos();
            return if lo < 0.0 { -a } else { a };
        }
        // x(phi) is monotone on each half arc for the symmetric shapes used here.
        let f = |phi: f64| self.point(phi)[0] - x;
        let (mut a, mut b) = (lo, hi);
        let increasing = f(b) > f(a);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if (f(m) < 0.0) == increasing {
                a = m;
            } else {
                b = m;
            }
            if b - a < 1e-15 {
                break;
            }
        }
        0.5 * (a + b)
    }
}

/// Rigid placement of the gap frame in world coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub angle: f64,
    pub origin: Point,
}

impl Default for Frame {
    fn default() -> Self {
        Frame { angle: 0.0, origin: [0.0, 0.0] }
    }
}

impl Frame {
    pub fn to_world(&self, p: Point) -> Point {
        let (s, c) = self.angle.sin_cos();
        [self.origin[0] + c * p[0] - s * p[1], self.origin[1] + s * p[0] + c * p[1]]
    }

    pub fn to_frame(&self, p: Point) -> Point {
        let (s, c) = self.angle.sin_cos();
        let d = [p[0] - self.origin[0], p[1] - self.origin[1]];
        [c * d[0] + s * d[1], -s * d[0] + c * d[1]]
    }

    pub fn inclusion_to_world(&self, inc: &Inclusion) -> Inclusion {
        Inclusion { shape: inc.shape, center: self.to_world(inc.center), rotation: inc.rotation + self.angle }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    TwoDisks,
    /// Meridian half-plane `r = x1 >= 0` of two spheres in a ball.
    TwoSpheresAxisym,
    Superellipse,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::TwoDisks => "two_disks",
            Family::TwoSpheresAxisym => "two_spheres_axisym",
            Family::Superellipse => "superellipse",
        }
    }

    pub fn parse(s: &str) -> Result<Family> {
        match s.trim().to_ascii_lowercase().as_str() {
            "two_disks" => Ok(Family::TwoDisks),
            "two_spheres_axisym" => Ok(Family::TwoSpheresAxisym),
            "superellipse" => Ok(Family::Superellipse),
            other => Err(Error::Parameter(format!("unknown geometry family '{other}'"))),
        }
    }
}

/// Parametric boundary curve in world coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Curve {
    /// Parameter is the polar angle about the center.
    Polar(Inclusion),
    /// Parameter in `[0, 1]`.
    Line { a: Point, b: Point },
}

impl Curve {
    pub fn point(&self, t: f64) -> Point {
        match self {
            Curve::Polar(inc) => inc.point(t),
            Curve::Line { a, b } => [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])],
        }
    }

    /// Distance from `p` to the curve (radial for polar curves, which is
    /// within a curvature-dependent factor of the normal distance).
    pub fn distance(&self, p: Point) -> f64 {
        match self {
            Curve::Polar(inc) => inc.radial_gap(p).abs(),
            Curve::Line { a, b } => {
                let d = [b[0] - a[0], b[1] - a[1]];
                let l2 = d[0] * d[0] + d[1] * d[1];
                let t = (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / l2).clamp(0.0, 1.0);
                (p[0] - a[0] - t * d[0]).hypot(p[1] - a[1] - t * d[1])
            }
        }
    }
}

/// A parameter interval of a curve carrying one tag. Loops list pieces so that
/// the domain lies to the left of the direction of travel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPiece {
    pub curve: usize,
    pub t0: f64,
    pub t1: f64,
    pub tag: Tag,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryLoops {
    pub curves: Vec<Curve>,
    pub loops: Vec<Vec<BoundaryPiece>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapGeometry {
    pub family: Family,
    pub outer_radius: f64,
    /// Inclusions in frame coordinates.
    pub inclusion_1: Inclusion,
    pub inclusion_2: Inclusion,
    pub epsilon: f64,
    pub frame: Frame,
    /// Frame radius `R`; profiles are defined on `|x'| < 2R`.
    pub r_frame: f64,
    pub kappa0: f64,
    pub kappa1: f64,
}

pub fn build_two_disks(outer_radius: f64, inclusion_radius: f64, epsilon: f64) -> Result<GapGeometry> {
    GapGeometry::new(Family::TwoDisks, outer_radius, inclusion_radius, epsilon, DEFAULT_KAPPA1)
}

pub fn build_two_spheres_axisym(outer_radius: f64, inclusion_radius: f64, epsilon: f64) -> Result<GapGeometry> {
    GapGeometry::new(Family::TwoSpheresAxisym, outer_radius, inclusion_radius, epsilon, DEFAULT_KAPPA1)
}

pub fn build_superellipse(outer_radius: f64, semi_axis: f64, epsilon: f64) -> Result<GapGeometry> {
    GapGeometry::new(Family::Superellipse, outer_radius, semi_axis, epsilon, DEFAULT_KAPPA1)
}

pub const SUPERELLIPSE_EXPONENT: f64 = 2.5;

impl GapGeometry {
    /// Builds a family member; `size` is the inclusion radius (or semi-axis).
    pub fn new(family: Family, outer_radius: f64, size: f64, epsilon: f64, kappa1: f64) -> Result<GapGeometry> {
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::GeometryInfeasible(format!("epsilon must be >= 0, got {epsilon}")));
        }
        if !(size > 0.0) || !(outer_radius > 0.0) || !(kappa1 >= 0.0) {
            return Err(Error::GeometryInfeasible("radii must be positive and kappa1 >= 0".into()));
        }
        let (shape, rotation) = match family {
            Family::TwoDisks | Family::TwoSpheresAxisym => (Shape::Circle { radius: size }, 0.0),
            // Rotating by 45 degrees puts a diagonal vertex of the superellipse at
            // the gap; it has positive curvature for p = 2.5.
            Family::Superellipse => {
                (Shape::Superellipse { semi_axis: size, exponent: SUPERELLIPSE_EXPONENT }, FRAC_PI_4)
            }
        };
        let proto = Inclusion { shape, center: [0.0, 0.0], rotation };
        let d1 = proto.rho(-FRAC_PI_2);
        let d2 = proto.rho(FRAC_PI_2);
        let inclusion_1 = proto.translated([0.0, 0.5 * epsilon + d1]);
        let inclusion_2 = proto.translated([0.0, -0.5 * epsilon - d2]);
        let reach = inclusion_1.max_radius_from_origin().max(inclusion_2.max_radius_from_origin());
        let clearance = outer_radius - reach;
        if !(clearance > kappa1) {
            return Err(Error::GeometryInfeasible(format!(
                "dist(D1 u D2, outer boundary) = {clearance} does not exceed kappa1 = {kappa1}"
            )));
        }
        let mut g = GapGeometry {
            family,
            outer_radius,
            inclusion_1,
            inclusion_2,
            epsilon,
            frame: Frame::default(),
            r_frame: 0.5 * size,
            kappa0: 0.0,
            kappa1,
        };
        g.kappa0 = g.estimate_kappa0();
        Ok(g)
    }

    /// Rotates the whole configuration about the world origin.
    pub fn rotated(&self, angle: f64) -> Result<GapGeometry> {
        if self.is_axisymmetric() {
            return Err(Error::Domain("axisymmetric geometries are tied to the symmetry axis".into()));
        }
        let mut g = self.clone();
        let (s, c) = angle.sin_cos();
        let o = self.frame.origin;
        g.frame = Frame { angle: self.frame.angle + angle, origin: [c * o[0] - s * o[1], s * o[0] + c * o[1]] };
        Ok(g)
    }

    pub fn is_axisymmetric(&self) -> bool {
        self.family == Family::TwoSpheresAxisym
    }

    pub fn inclusion_size(&self) -> f64 {
        self.inclusion_1.shape.size()
    }

    pub fn p1(&self) -> Point {
        self.frame.to_world([0.0, 0.5 * self.epsilon])
    }

    pub fn p2(&self) -> Point {
        self.frame.to_world([0.0, -0.5 * self.epsilon])
    }

    pub fn to_frame(&self, p: Point) -> Point {
        self.frame.to_frame(p)
    }

    pub fn inclusion_world(&self, i: usize) -> Inclusion {
        let inc = if i == 0 { &self.inclusion_1 } else { &self.inclusion_2 };
        self.frame.inclusion_to_world(inc)
    }

    fn check_frame(&self, x: f64) -> Result<()> {
        if !(x.abs() < 2.0 * self.r_frame) {
            return Err(Error::Domain(format!("|x'| = {} outside the frame radius 2R = {}", x.abs(), 2.0 * self.r_frame)));
        }
        Ok(())
    }

    /// `(h1, h1', h1'')` at `x'`.
    pub fn h1_jet(&self, x: f64) -> Result<[f64; 3]> {
        self.check_frame(x)?;
        let inc = &self.inclusion_1;
        if let Shape::Circle { radius } = inc.shape {
            let q = (radius * radius - x * x).sqrt();
            return Ok([radius - q, x / q, radius * radius / (q * q * q)]);
        }
        let j = inc.jet(inc.lower_angle(x));
        Ok(graph_jet(j, 0.5 * self.epsilon))
    }

    /// `(h2, h2', h2'')` at `x'`.
    pub fn h2_jet(&self, x: f64) -> Result<[f64; 3]> {
        self.check_frame(x)?;
        let inc = &self.inclusion_2;
        if let Shape::Circle { radius } = inc.shape {
            let q = (radius * radius - x * x).sqrt();
            return Ok([q - radius, -x / q, -radius * radius / (q * q * q)]);
        }
        let j = inc.jet(inc.upper_angle(x));
        Ok(graph_jet(j, -0.5 * self.epsilon))
    }

    pub fn h1(&self, x: f64) -> Result<f64> {
        Ok(self.h1_jet(x)?[0])
    }

    pub fn h2(&self, x: f64) -> Result<f64> {
        Ok(self.h2_jet(x)?[0])
    }

    /// `delta(x') = eps + h1(x') - h2(x')`.
    pub fn gap_width(&self, x: f64) -> Result<f64> {
        Ok(self.epsilon + self.h1(x)? - self.h2(x)?)
    }

    /// Smallest sampled `(h1 - h2) / x'^2` on `0 < |x'| < 2R` (including the
    /// `x' -> 0` limit), capped at `1 / size` so that `C = 2 / kappa0` bounds
    /// `delta` from both sides on `|x'| <= R`.
    fn estimate_kappa0(&self) -> f64 {
        let n = 400;
        let limit = 0.5 * (self.h1_jet(0.0).unwrap()[2] - self.h2_jet(0.0).unwrap()[2]);
        let sampled = (1..=n)
            .map(|k| {
                let t = 2.0 * self.r_frame * k as f64 / (n as f64 + 1.0);
                (self.h1(t).unwrap() - self.h2(t).unwrap()) / (t * t)
            })
            .chain((1..=n).map(|k| {
                let t = -2.0 * self.r_frame * k as f64 / (n as f64 + 1.0);
                (self.h1(t).unwrap() - self.h2(t).unwrap()) / (t * t)
            }))
            .fold(limit, f64::min);
        sampled.min(1.0 / self.inclusion_size())
    }

    /// Translates `D1` by `-P1` and `D2` by `-P2`; the inclusions touch at the
    /// frame origin.
    pub fn touching_limit(&self) -> Result<GapGeometry> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Domain("touching_limit requires epsilon > 0".into()));
        }
        let h = 0.5 * self.epsilon;
        Ok(GapGeometry {
            inclusion_1: self.inclusion_1.translated([0.0, -h]),
            inclusion_2: self.inclusion_2.translated([0.0, h]),
            epsilon: 0.0,
            ..self.clone()
        })
    }

    /// Whether a frame point lies in the narrow region `|x'| < R` between the
    /// two profiles.
    pub fn in_gap_strip(&self, q: Point) -> bool {
        if !(q[0].abs() < self.r_frame) {
            return false;
        }
        let lo = -0.5 * self.epsilon + self.h2(q[0]).unwrap();
        let hi = 0.5 * self.epsilon + self.h1(q[0]).unwrap();
        q[1] > lo && q[1] < hi
    }

    /// Boundary of the meshed region in world coordinates. At `eps = 0` the
    /// cusp `|x'| < cusp_cutoff` is removed by straight cuts joining the two
    /// profiles; each cut is split at its midpoint, upper half tagged `D1`,
    /// lower half `D2`.
    pub fn boundary_loops(&self, cusp_cutoff: f64) -> Result<BoundaryLoops> {
        let touching = self.epsilon == 0.0;
        if touching && !(cusp_cutoff > 0.0 && cusp_cutoff < self.r_frame) {
            return Err(Error::Parameter(format!("cusp_cutoff must lie in (0, R) at eps = 0, got {cusp_cutoff}")));
        }
        let fr = self.frame;
        let rot = fr.angle;
        let outer = Curve::Polar(Inclusion {
            shape: Shape::Circle { radius: self.outer_radius },
            center: fr.to_world([0.0, 0.0]),
            rotation: rot,
        });
        let c1 = Curve::Polar(fr.inclusion_to_world(&self.inclusion_1));
        let c2 = Curve::Polar(fr.inclusion_to_world(&self.inclusion_2));
        let mut curves = vec![outer, c1, c2];
        let piece = |curve: usize, t0: f64, t1: f64, tag: Tag| BoundaryPiece { curve, t0, t1, tag };
        let cut_points = |x: f64| -> (f64, f64, Point, Point, Point) {
            let a1 = self.inclusion_1.lower_angle(x);
            let b1 = self.inclusion_2.upper_angle(x);
            let pa = self.inclusion_1.point(a1);
            let pb = self.inclusion_2.point(b1);
            let m = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
            (a1, b1, fr.to_world(pa), fr.to_world(m), fr.to_world(pb))
        };
        let mut loops = Vec::new();
        if !self.is_axisymmetric() {
            loops.push(vec![piece(0, rot, rot + 2.0 * PI, Tag::Outer)]);
            if !touching {
                loops.push(vec![piece(1, rot - FRAC_PI_2, rot - FRAC_PI_2 - 2.0 * PI, Tag::D1)]);
                loops.push(vec![piece(2, rot + FRAC_PI_2, rot + FRAC_PI_2 - 2.0 * PI, Tag::D2)]);
            } else {
                let (ar, br, par, mr, pbr) = cut_points(cusp_cutoff);
                let (al, bl, pal, ml, pbl) = cut_points(-cusp_cutoff);
                let n = curves.len();
                curves.push(Curve::Line { a: par, b: mr });
                curves.push(Curve::Line { a: mr, b: pbr });
                curves.push(Curve::Line { a: pbl, b: ml });
                curves.push(Curve::Line { a: ml, b: pal });
                loops.push(vec![
                    piece(1, rot + al, rot + ar - 2.0 * PI, Tag::D1),
                    piece(n, 0.0, 1.0, Tag::D1),
                    piece(n + 1, 0.0, 1.0, Tag::D2),
                    piece(2, rot + br, rot + bl - 2.0 * PI, Tag::D2),
                    piece(n + 2, 0.0, 1.0, Tag::D2),
                    piece(n + 3, 0.0, 1.0, Tag::D1),
                ]);
            }
        } else {
            let top1 = self.inclusion_1.point(FRAC_PI_2);
            let bot2 = self.inclusion_2.point(-FRAC_PI_2);
            let r = self.outer_radius;
            let mut lp = vec![piece(0, -FRAC_PI_2, FRAC_PI_2, Tag::Outer)];
            let mut line = |a: Point, b: Point, tag: Tag, lp: &mut Vec<BoundaryPiece>| {
                curves.push(Curve::Line { a, b });
                lp.push(piece(curves.len() - 1, 0.0, 1.0, tag));
            };
            line([0.0, r], top1, Tag::Axis, &mut lp);
            if !touching {
                lp.push(piece(1, FRAC_PI_2, -FRAC_PI_2, Tag::D1));
                line(self.inclusion_1.point(-FRAC_PI_2), self.inclusion_2.point(FRAC_PI_2), Tag::Axis, &mut lp);
                lp.push(piece(2, FRAC_PI_2, -FRAC_PI_2, Tag::D2));
            } else {
                let (ar, br, par, mr, pbr) = cut_points(cusp_cutoff);
                lp.push(piece(1, FRAC_PI_2, ar, Tag::D1));
                line(par, mr, Tag::D1, &mut lp);
                line(mr, pbr, Tag::D2, &mut lp);
                lp.push(piece(2, br, -FRAC_PI_2, Tag::D2));
            }
            line(bot2, [0.0, -r], Tag::Axis, &mut lp);
            loops.push(lp);
        }
        Ok(BoundaryLoops { curves, loops })
    }

    /// Closed polylines of the boundary loops, one `x y` vertex per line and a
    /// blank line between loops.
    pub fn polyline_text(&self, cusp_cutoff: f64, samples_per_piece: usize) -> Result<String> {
        let bl = self.boundary_loops(cusp_cutoff)?;
        let mut out = String::new();
        for lp in &bl.loops {
            let mut first = None;
            for pc in lp {
                let c = &bl.curves[pc.curve];
                for k in 0..samples_per_piece {
                    let t = pc.t0 + (pc.t1 - pc.t0) * k as f64 / samples_per_piece as f64;
                    let p = c.point(t);
                    first.get_or_insert(p);
                    out.push_str(&format!("{} {}\n", p[0], p[1]));
                }
            }
            if let Some(p) = first {
                out.push_str(&format!("{} {}\n", p[0], p[1]));
            }
            out.push('\n');
        }
        Ok(out)
    }
}

fn graph_jet(j: [f64; 6], shift: f64) -> [f64; 3] {
    let [_, y, xd, yd, xdd, ydd] = j;
    [y - shift, yd / xd, (ydd * xd - xdd * yd) / (xd * xd * xd)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn superellipse_radial_derivative_matches_difference_quotient() {
        let s = Shape::Superellipse { semi_axis: 1.3, exponent: 2.5 };
        for k in 0..50 {
            let t = -3.0 + 0.12 * k as f64;
            let fd = (s.radial(t + 1e-6) - s.radial(t - 1e-6)) / 2e-6;
            assert!((fd - s.radial_d(t)).abs() < 1e-6, "{t}");
        }
    }

    #[test]
    fn superellipse_points_satisfy_implicit_equation() {
        let s = Shape::Superellipse { semi_axis: 2.0, exponent: 2.5 };
        for k in 0..40 {
            let t = 0.157 * k as f64;
            let r = s.radial(t);
            let v = (r * t.cos()).abs().powf(2.5) + (r * t.sin()).abs().powf(2.5);
            assert!((v - 2f64.powf(2.5)).abs() < 1e-12);
        }
    }

    #[test]
    fn frame_round_trip() {
        let f = Frame { angle: 0.7, origin: [1.0, -2.0] };
        let p = [0.3, 0.9];
        let q = f.to_frame(f.to_world(p));
        assert!((q[0] - p[0]).abs() < 1e-14 && (q[1] - p[1]).abs() < 1e-14);
    }
}

//! Incremental constrained Delaunay triangulation with Ruppert-style
//! refinement.
//!
//! The triangulation always covers a large super-triangle. Boundary segments
//! are constraint edges that cavities never cross; segments are kept
//! unencroached by splitting them at the parametric midpoint of their exact
//! curve. Triangles carry an `inside` flag once the domain has been classified.

use std::collections::{HashMap, VecDeque};

use robust::{incircle, orient2d, Coord};

use crate::error::{Error, Result};
use crate::geometry::{Curve, Point, Tag};

pub(crate) const NONE: u32 = u32::MAX;

#[derive(Clone, Debug)]
pub(crate) struct Tri {
    pub v: [u32; 3],
    /// `nb[i]` is the neighbor across the edge opposite `v[i]`.
    pub nb: [u32; 3],
    pub alive: bool,
    pub inside: bool,
}

#[derive(Clone, Debug)]
pub(crate) struct Seg {
    pub a: u32,
    pub b: u32,
    pub ta: f64,
    pub tb: f64,
    pub curve: usize,
    pub tag: Tag,
    pub alive: bool,
}

enum Walk {
    Found(u32),
    Crossed(u32),
}

fn key(a: u32, b: u32) -> (u32, u32) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn c(p: Point) -> Coord<f64> {
    Coord { x: p[0], y: p[1] }
}

pub(crate) struct Triangulator<'a> {
    pub pts: Vec<Point>,
    vtri: Vec<u32>,
    pub tris: Vec<Tri>,
    free: Vec<u32>,
    pub segs: Vec<Seg>,
    edge_seg: HashMap<(u32, u32), u32>,
    curves: &'a [Curve],
    stamp: Vec<u32>,
    stamp_id: u32,
    rng: u64,
    classified: bool,
    n_inside: usize,
}

pub(crate) struct RefineParams<'s> {
    pub min_angle_deg: f64,
    pub size: &'s dyn Fn(Point) -> f64,
    pub max_cells: usize,
    pub eps: f64,
}

impl<'a> Triangulator<'a> {
    pub fn new(curves: &'a [Curve], bbox: [Point; 2]) -> Self {
        let cx = 0.5 * (bbox[0][0] + bbox[1][0]);
        let cy = 0.5 * (bbox[0][1] + bbox[1][1]);
        let span = (bbox[1][0] - bbox[0][0]).max(bbox[1][1] - bbox[0][1]).max(1e-300);
        let r = 20.0 * span;
        let pts = vec![[cx - r, cy - r], [cx + r, cy - r], [cx, cy + r]];
        Triangulator {
            pts,
            vtri: vec![0, 0, 0],
            tris: vec![Tri { v: [0, 1, 2], nb: [NONE; 3], alive: true, inside: false }],
            free: Vec::new(),
            segs: Vec::new(),
            edge_seg: HashMap::new(),
            curves,
            stamp: vec![0],
            stamp_id: 0,
            rng: 0x9E37_79B9_7F4A_7C15,
            classified: false,
            n_inside: 0,
        }
    }

    fn next_rand(&mut self) -> u64 {
        self.rng ^= self.rng << 13;
        self.rng ^= self.rng >> 7;
        self.rng ^= self.rng << 17;
        self.rng
    }

    fn orient(&self, a: u32, b: u32, p: Point) -> f64 {
        orient2d(c(self.pts[a as usize]), c(self.pts[b as usize]), c(p))
    }

    fn in_circle(&self, t: u32, p: Point) -> bool {
        let v = self.tris[t as usize].v;
        incircle(c(self.pts[v[0] as usize]), c(self.pts[v[1] as usize]), c(self.pts[v[2] as usize]), c(p)) > 0.0
    }

    pub fn is_constraint(&self, a: u32, b: u32) -> bool {
        self.edge_seg.contains_key(&key(a, b))
    }

    fn walk(&mut self, p: Point, start: u32, stop_at_constraints: bool) -> Result<Walk> {
        let mut t = start;
        let limit = 4 * self.tris.len() + 100;
        for _ in 0..limit {
            let tri = &self.tris[t as usize];
            debug_assert!(tri.alive);
            let off = (self.next_rand() % 3) as usize;
            let mut moved = false;
            for k in 0..3 {
                let i = (k + off) % 3;
                let tri = &self.tris[t as usize];
                let (a, b) = (tri.v[(i + 1) % 3], tri.v[(i + 2) % 3]);
                if self.orient(a, b, p) < 0.0 {
                    if stop_at_constraints {
                        if let Some(&s) = self.edge_seg.get(&key(a, b)) {
                            return Ok(Walk::Crossed(s));
                        }
                    }
                    let n = tri.nb[i];
                    if n == NONE {
                        return Err(Error::Mesh("point outside the super-triangle".into()));
                    }
                    t = n;
                    moved = true;
                    break;
                }
            }
            if !moved {
                return Ok(Walk::Found(t));
            }
        }
        Err(Error::Mesh("point location did not terminate".into()))
    }

    fn new_stamp(&mut self) -> u32 {
        self.stamp_id = self.stamp_id.wrapping_add(1);
        if self.stamp_id == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.stamp_id = 1;
        }
        self.stamp_id
    }

    /// Triangles whose circumcircle contains `p`, grown from `t0` without
    /// crossing constraints and pruned until `p` sees every boundary edge.
    fn cavity(&mut self, p: Point, t0: u32) -> Result<(Vec<u32>, Vec<(u32, u32, u32)>)> {
        let id = self.new_stamp();
        let mut cav = vec![t0];
        self.stamp[t0 as usize] = id;
        let mut stack = vec![t0];
        while let Some(t) = stack.pop() {
            for i in 0..3 {
                let tri = &self.tris[t as usize];
                let n = tri.nb[i];
                if n == NONE || self.stamp[n as usize] == id {
                    continue;
                }
                let (a, b) = (tri.v[(i + 1) % 3], tri.v[(i + 2) % 3]);
                if self.is_constraint(a, b) {
                    continue;
                }
                if self.in_circle(n, p) {
                    self.stamp[n as usize] = id;
                    cav.push(n);
                    stack.push(n);
                }
            }
        }
        loop {
            let mut bnd = Vec::new();
            let mut bad = None;
            for &t in &cav {
                let tri = &self.tris[t as usize];
                for i in 0..3 {
                    let n = tri.nb[i];
                    if n != NONE && self.stamp[n as usize] == id {
                        continue;
                    }
                    let (a, b) = (tri.v[(i + 1) % 3], tri.v[(i + 2) % 3]);
                    if self.orient(a, b, p) <= 0.0 {
                        bad = Some(t);
                    }
                    bnd.push((a, b, n));
                }
            }
            match bad {
                None => return Ok((cav, bnd)),
                Some(t) if t == t0 => {
                    return Err(Error::Mesh(format!("cannot insert ({}, {}): lies on a constraint", p[0], p[1])))
                }
                Some(t) => {
                    self.stamp[t as usize] = 0;
                    cav.retain(|&x| x != t);
                }
            }
        }
    }

    fn alloc(&mut self, tri: Tri) -> u32 {
        if let Some(t) = self.free.pop() {
            self.tris[t as usize] = tri;
            t
        } else {
            self.tris.push(tri);
            self.stamp.push(0);
            (self.tris.len() - 1) as u32
        }
    }

    /// Replaces the cavity with a fan around the new vertex `pv`.
    fn fill(&mut self, pv: u32, cav: &[u32], bnd: &[(u32, u32, u32)], inside: bool) -> Vec<u32> {
        for &t in cav {
            let tri = &mut self.tris[t as usize];
            if tri.inside {
                self.n_inside -= 1;
            }
            tri.alive = false;
            tri.inside = false;
            self.free.push(t);
        }
        let mut fan = Vec::with_capacity(bnd.len());
        for &(a, b, n) in bnd {
            let t = self.alloc(Tri { v: [pv, a, b], nb: [n, NONE, NONE], alive: true, inside });
            if inside {
                self.n_inside += 1;
            }
            if n != NONE {
                let nt = &mut self.tris[n as usize];
                for j in 0..3 {
                    if nt.v[(j + 1) % 3] == b && nt.v[(j + 2) % 3] == a {
                        nt.nb[j] = t;
                    }
                }
            }
            self.vtri[a as usize] = t;
            self.vtri[b as usize] = t;
            fan.push(t);
        }
        for &t in &fan {
            let [_, a, b] = self.tris[t as usize].v;
            for &u in &fan {
                let v = self.tris[u as usize].v;
                if v[1] == b {
                    self.tris[t as usize].nb[1] = u;
                }
                if v[2] == a {
                    self.tris[t as usize].nb[2] = u;
                }
            }
        }
        self.vtri[pv as usize] = fan[0];
        fan
    }

    fn add_vertex(&mut self, p: Point) -> u32 {
        self.pts.push(p);
        self.vtri.push(NONE);
        (self.pts.len() - 1) as u32
    }

    /// Plain insertion (used for the initial boundary vertices).
    pub fn insert(&mut self, p: Point, hint: u32) -> Result<(u32, u32)> {
        let t0 = match self.walk(p, hint, false)? {
            Walk::Found(t) => t,
            Walk::Crossed(_) => unreachable!(),
        };
        let (cav, bnd) = self.cavity(p, t0)?;
        let pv = self.add_vertex(p);
        let fan = self.fill(pv, &cav, &bnd, false);
        Ok((pv, fan[0]))
    }

    pub fn add_segment(&mut self, a: u32, b: u32, ta: f64, tb: f64, curve: usize, tag: Tag) -> u32 {
        self.segs.push(Seg { a, b, ta, tb, curve, tag, alive: true });
        (self.segs.len() - 1) as u32
    }

    /// Triangle holding the directed edge `a -> b`, with the index of the
    /// opposite vertex.
    fn directed_edge(&self, a: u32, b: u32) -> Option<(u32, usize)> {
        let start = self.vtri[a as usize];
        if start == NONE {
            return None;
        }
        // Rotate around `a` in both directions (the fan may hit the hull).
        for dir in 0..2 {
            let mut t = start;
            loop {
                let tri = &self.tris[t as usize];
                let i = tri.v.iter().position(|&x| x == a)?;
                if tri.v[(i + 1) % 3] == b {
                    return Some((t, (i + 2) % 3));
                }
                let n = if dir == 0 { tri.nb[(i + 1) % 3] } else { tri.nb[(i + 2) % 3] };
                if n == NONE || n == start {
                    break;
                }
                t = n;
            }
        }
        None
    }

    fn edge_exists(&self, a: u32, b: u32) -> bool {
        self.directed_edge(a, b).is_some() || self.directed_edge(b, a).is_some()
    }

    fn register(&mut self, s: u32) {
        let sg = &self.segs[s as usize];
        self.edge_seg.insert(key(sg.a, sg.b), s);
    }

    fn encroached_by_apex(&self, s: u32) -> bool {
        let sg = &self.segs[s as usize];
        let (pa, pb) = (self.pts[sg.a as usize], self.pts[sg.b as usize]);
        for (u, v) in [(sg.a, sg.b), (sg.b, sg.a)] {
            if let Some((t, k)) = self.directed_edge(u, v) {
                let cv = self.tris[t as usize].v[k];
                if cv < 3 {
                    continue;
                }
                if encroaches(self.pts[cv as usize], pa, pb) {
                    return true;
                }
            }
        }
        false
    }

    /// Splits a segment at its curve midpoint. Returns the new vertex, the new
    /// sub-segments and the fan triangles.
    fn split_segment(&mut self, s: u32) -> Result<(u32, [u32; 2], Vec<u32>)> {
        let sg = self.segs[s as usize].clone();
        let tm = 0.5 * (sg.ta + sg.tb);
        let m = self.curves[sg.curve].point(tm);
        self.edge_seg.remove(&key(sg.a, sg.b));
        self.segs[s as usize].alive = false;
        let hint = self.vtri[sg.a as usize];
        let t0 = match self.walk(m, hint, false)? {
            Walk::Found(t) => t,
            Walk::Crossed(_) => unreachable!(),
        };
        let (cav, bnd) = self.cavity(m, t0)?;
        let pv = self.add_vertex(m);
        let fan = self.fill(pv, &cav, &bnd, false);
        let s1 = self.add_segment(sg.a, pv, sg.ta, tm, sg.curve, sg.tag);
        let s2 = self.add_segment(pv, sg.b, tm, sg.tb, sg.curve, sg.tag);
        for x in [s1, s2] {
            let (a, b) = (self.segs[x as usize].a, self.segs[x as usize].b);
            if self.edge_exists(a, b) {
                self.register(x);
            }
        }
        if self.classified {
            self.classify_fan(pv, sg.a, sg.b, &fan)?;
        }
        Ok((pv, [s1, s2], fan))
    }

    /// Fan triangles between `m -> b` and `m -> a` (counterclockwise) lie left
    /// of the path `a -> m -> b`, i.e. on the domain side.
    fn classify_fan(&mut self, m: u32, a: u32, b: u32, fan: &[u32]) -> Result<()> {
        let find = |x: u32, tris: &Vec<Tri>| fan.iter().copied().find(|&t| tris[t as usize].v[1] == x);
        let mut t = find(b, &self.tris).ok_or_else(|| Error::Mesh("split segment missing from fan".into()))?;
        let mut left = Vec::new();
        for _ in 0..fan.len() {
            left.push(t);
            let y = self.tris[t as usize].v[2];
            if y == a {
                break;
            }
            t = find(y, &self.tris).ok_or_else(|| Error::Mesh("open fan".into()))?;
        }
        if self.tris[t as usize].v[2] != a {
            return Err(Error::Mesh("split segment missing from fan".into()));
        }
        let _ = m;
        for &t in fan {
            let want = left.contains(&t);
            let tri = &mut self.tris[t as usize];
            if tri.inside != want {
                tri.inside = want;
                if want {
                    self.n_inside += 1;
                } else {
                    self.n_inside -= 1;
                }
            }
        }
        Ok(())
    }

    /// Inserts every segment as an edge and removes encroachment.
    pub fn recover_segments(&mut self) -> Result<()> {
        let mut queue: VecDeque<u32> = (0..self.segs.len() as u32).collect();
        let mut guard = 0usize;
        while let Some(s) = queue.pop_front() {
            guard += 1;
            if guard > 50_000_000 {
                return Err(Error::Mesh("segment recovery did not terminate".into()));
            }
            if !self.segs[s as usize].alive {
                continue;
            }
            let (a, b) = (self.segs[s as usize].a, self.segs[s as usize].b);
            if self.edge_exists(a, b) {
                self.register(s);
                if !self.encroached_by_apex(s) {
                    continue;
                }
            }
            let (_, kids, _) = self.split_segment(s)?;
            queue.extend(kids);
        }
        // A final sweep: splits above can encroach segments checked earlier.
        let mut changed = true;
        while changed {
            changed = false;
            for s in 0..self.segs.len() as u32 {
                if self.segs[s as usize].alive && self.encroached_by_apex(s) {
                    let (_, kids, _) = self.split_segment(s)?;
                    for k in kids {
                        let (a, b) = (self.segs[k as usize].a, self.segs[k as usize].b);
                        if !self.edge_exists(a, b) {
                            return Err(Error::Mesh("sub-segment missing after split".into()));
                        }
                    }
                    changed = true;
                }
            }
        }
        Ok(())
    }

    /// Flood fill from the left side of every segment.
    pub fn classify(&mut self) -> Result<()> {
        for t in self.tris.iter_mut() {
            t.inside = false;
        }
        let mut stack = Vec::new();
        for s in &self.segs {
            if !s.alive {
                continue;
            }
            let (t, _) = self
                .directed_edge(s.a, s.b)
                .ok_or_else(|| Error::Mesh("segment is not an edge after recovery".into()))?;
            stack.push(t);
        }
        while let Some(t) = stack.pop() {
            if self.tris[t as usize].inside {
                continue;
            }
            self.tris[t as usize].inside = true;
            let tri = self.tris[t as usize].clone();
            for i in 0..3 {
                let n = tri.nb[i];
                if n == NONE {
                    return Err(Error::Mesh("domain is not closed: flood fill reached the hull".into()));
                }
                if !self.is_constraint(tri.v[(i + 1) % 3], tri.v[(i + 2) % 3]) && !self.tris[n as usize].inside {
                    stack.push(n);
                }
            }
        }
        self.n_inside = self.tris.iter().filter(|t| t.alive && t.inside).count();
        self.classified = true;
        Ok(())
    }

    fn is_bad(&self, t: u32, prm: &RefineParams) -> bool {
        let v = self.tris[t as usize].v;
        let p = [self.pts[v[0] as usize], self.pts[v[1] as usize], self.pts[v[2] as usize]];
        let l = [d2(p[1], p[2]), d2(p[2], p[0]), d2(p[0], p[1])];
        let lmax = l[0].max(l[1]).max(l[2]);
        let cen = [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0];
        if lmax.sqrt() > (prm.size)(cen) {
            return true;
        }
        // Smallest angle sits opposite the shortest edge.
        let (i, _) = l.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &x)| if x < acc.1 { (i, x) } else { acc });
        let (a2, b2, c2) = (l[i], l[(i + 1) % 3], l[(i + 2) % 3]);
        let cosv = (b2 + c2 - a2) / (2.0 * (b2 * c2).sqrt());
        cosv > prm.min_angle_deg.to_radians().cos()
    }

    /// Ruppert refinement of the inside triangles.
    pub fn refine(&mut self, prm: &RefineParams) -> Result<()> {
        let mut bad: VecDeque<u32> = VecDeque::new();
        // (segment, forced): forced splits come from circumcenters that lie
        // across or inside the diametral circle of a segment.
        let mut enc: VecDeque<(u32, bool)> = VecDeque::new();
        for t in 0..self.tris.len() as u32 {
            let tri = &self.tris[t as usize];
            if tri.alive && tri.inside && self.is_bad(t, prm) {
                bad.push_back(t);
            }
        }
        for s in 0..self.segs.len() as u32 {
            if self.segs[s as usize].alive && self.encroached_by_apex(s) {
                enc.push_back((s, false));
            }
        }
        let mut guard = 0usize;
        loop {
            guard += 1;
            if guard > 40 * prm.max_cells + 1_000_000 {
                return Err(Error::Mesh("refinement did not terminate".into()));
            }
            if self.n_inside > prm.max_cells {
                return Err(Error::Budget { eps: prm.eps, cells: self.n_inside, budget: prm.max_cells });
            }
            if let Some((s, forced)) = enc.pop_front() {
                if !self.segs[s as usize].alive || !(forced || self.encroached_by_apex(s)) {
                    continue;
                }
                let (pv, kids, fan) = self.split_segment(s)?;
                self.after_insert(pv, &kids, &fan, prm, &mut bad, &mut enc);
                continue;
            }
            let Some(t) = bad.pop_front() else { break };
            let tri = &self.tris[t as usize];
            if !tri.alive || !tri.inside || !self.is_bad(t, prm) {
                continue;
            }
            let v = tri.v;
            let cc = circumcenter(self.pts[v[0] as usize], self.pts[v[1] as usize], self.pts[v[2] as usize]);
            let t0 = match self.walk(cc, t, true)? {
                Walk::Crossed(s) => {
                    enc.push_back((s, true));
                    bad.push_back(t);
                    continue;
                }
                Walk::Found(t0) => t0,
            };
            if !self.tris[t0 as usize].inside {
                return Err(Error::Mesh("circumcenter located outside the domain".into()));
            }
            let (cav, bnd) = self.cavity(cc, t0)?;
            let mut hit = false;
            for &(a, b, _) in &bnd {
                if let Some(&s) = self.edge_seg.get(&key(a, b)) {
                    if encroaches(cc, self.pts[a as usize], self.pts[b as usize]) {
                        enc.push_back((s, true));
                        hit = true;
                    }
                }
            }
            if hit {
                bad.push_back(t);
                continue;
            }
            let pv = self.add_vertex(cc);
            let fan = self.fill(pv, &cav, &bnd, true);
            self.after_insert(pv, &[], &fan, prm, &mut bad, &mut enc);
        }
        Ok(())
    }

    fn after_insert(
        &mut self,
        pv: u32,
        kids: &[u32],
        fan: &[u32],
        prm: &RefineParams,
        bad: &mut VecDeque<u32>,
        enc: &mut VecDeque<(u32, bool)>,
    ) {
        for &t in fan {
            let tri = &self.tris[t as usize];
            if tri.inside && self.is_bad(t, prm) {
                bad.push_back(t);
            }
            let (a, b) = (tri.v[1], tri.v[2]);
            if let Some(&s) = self.edge_seg.get(&key(a, b)) {
                if encroaches(self.pts[pv as usize], self.pts[a as usize], self.pts[b as usize]) {
                    enc.push_back((s, false));
                }
            }
        }
        for &k in kids {
            if self.encroached_by_apex(k) {
                enc.push_back((k, false));
            }
        }
    }
}

fn d2(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// `p` lies strictly inside the diametral circle of `ab`.
fn encroaches(p: Point, a: Point, b: Point) -> bool {
    (a[0] - p[0]) * (b[0] - p[0]) + (a[1] - p[1]) * (b[1] - p[1]) < 0.0
}

pub(crate) fn circumcenter(a: Point, b: Point, c: Point) -> Point {
    let (bx, by) = (b[0] - a[0], b[1] - a[1]);
    let (cx, cy) = (c[0] - a[0], c[1] - a[1]);
    let d = 2.0 * (bx * cy - by * cx);
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    [a[0] + (cy * b2 - by * c2) / d, a[1] + (bx * c2 - cx * b2) / d]
}

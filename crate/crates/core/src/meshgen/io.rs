//! Plain-text mesh format:
//!
//! ```text
//! NV NC
//! x y            (NV lines)
//! i j k          (NC lines)
//! EDGES NE
//! i j TAG        (NE lines)
//! ```
//!
//! Curve information is not stored; imported boundary edges refine by chord
//! midpoints.

use crate::error::{Error, Result};
use crate::geometry::Tag;

use super::{BoundaryEdge, Mesh, SizingStats};

pub fn write_mesh(mesh: &Mesh) -> String {
    let mut s = format!("{} {}\n", mesh.vertices.len(), mesh.cells.len());
    for p in &mesh.vertices {
        s.push_str(&format!("{} {}\n", p[0], p[1]));
    }
    for c in &mesh.cells {
        s.push_str(&format!("{} {} {}\n", c[0], c[1], c[2]));
    }
    s.push_str(&format!("EDGES {}\n", mesh.boundary.len()));
    for e in &mesh.boundary {
        s.push_str(&format!("{} {} {}\n", e.v[0], e.v[1], e.tag.name()));
    }
    s
}

pub fn read_mesh(text: &str) -> Result<Mesh> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let bad = |m: &str| Error::Mesh(format!("mesh file: {m}"));
    let mut next = || lines.next().ok_or_else(|| bad("unexpected end of file"));
    let nums = |l: &str| -> Vec<String> { l.split_whitespace().map(String::from).collect() };
    let head = nums(next()?);
    if head.len() != 2 {
        return Err(bad("header must be 'NV NC'"));
    }
    let nv: usize = head[0].parse().map_err(|_| bad("bad NV"))?;
    let nc: usize = head[1].parse().map_err(|_| bad("bad NC"))?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let f = nums(next()?);
        if f.len() != 2 {
            return Err(bad("vertex line must be 'x y'"));
        }
        let x: f64 = f[0].parse().map_err(|_| bad("bad coordinate"))?;
        let y: f64 = f[1].parse().map_err(|_| bad("bad coordinate"))?;
        vertices.push([x, y]);
    }
    let mut cells = Vec::with_capacity(nc);
    for _ in 0..nc {
        let f = nums(next()?);
        if f.len() < 3 {
            return Err(bad("cell line must be 'i j k'"));
        }
        let mut c = [0usize; 3];
        for k in 0..3 {
            c[k] = f[k].parse().map_err(|_| bad("bad vertex index"))?;
            if c[k] >= nv {
                return Err(bad("vertex index out of range"));
            }
        }
        cells.push(c);
    }
    let eh = nums(next()?);
    if eh.len() != 2 || eh[0] != "EDGES" {
        return Err(bad("expected 'EDGES NE'"));
    }
    let ne: usize = eh[1].parse().map_err(|_| bad("bad NE"))?;
    let mut boundary = Vec::with_capacity(ne);
    let mut axisymmetric = false;
    for _ in 0..ne {
        let f = nums(next()?);
        if f.len() != 3 {
            return Err(bad("edge line must be 'i j TAG'"));
        }
        let a: usize = f[0].parse().map_err(|_| bad("bad edge index"))?;
        let b: usize = f[1].parse().map_err(|_| bad("bad edge index"))?;
        if a >= nv || b >= nv {
            return Err(bad("edge index out of range"));
        }
        let tag = Tag::parse(&f[2])?;
        axisymmetric |= tag == Tag::Axis;
        boundary.push(BoundaryEdge { v: [a, b], tag, curve: None, t: [0.0, 0.0] });
    }
    let mut mesh = Mesh {
        vertices,
        cells,
        boundary,
        curves: Vec::new(),
        axisymmetric,
        gap_segment: None,
        stats: SizingStats::default(),
    };
    mesh.stats = mesh.compute_stats();
    Ok(mesh)
}

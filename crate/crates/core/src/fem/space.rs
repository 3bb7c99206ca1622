//! Node numbering, shape functions and point location.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::geometry::{Point, Tag};
use crate::meshgen::{clip_segment, Mesh};

/// Scalar Lagrange space of degree 1 or 2 replicated over `components`.
///
/// Cell-local node order is `[v0, v1, v2, e01, e12, e20]`. Global nodes are
/// the mesh vertices followed by the edge nodes in first-seen order; DOFs are
/// interleaved, `dof = node * components + component`.
#[derive(Debug)]
pub struct FeSpace {
    pub mesh: Arc<Mesh>,
    pub degree: usize,
    pub components: usize,
    pub cell_nodes: Vec<[usize; 6]>,
    pub node_coords: Vec<Point>,
    /// Highest-priority tag of each boundary node (`Outer > D1 > D2 > Axis`).
    pub node_tag: Vec<Option<Tag>>,
    /// Nodes of each boundary edge in `mesh.boundary` order: both ends, then
    /// the midpoint node for degree 2.
    pub boundary_edge_nodes: Vec<Vec<usize>>,
    /// Cell adjacent to each boundary edge.
    pub boundary_edge_cell: Vec<usize>,
    locator: OnceLock<Locator>,
}

impl FeSpace {
    pub fn new(mesh: Arc<Mesh>, degree: usize, components: usize) -> Result<Arc<FeSpace>> {
        if !(degree == 1 || degree == 2) {
            return Err(Error::Parameter(format!("degree must be 1 or 2, got {degree}")));
        }
        if !(components == 1 || components == 2) {
            return Err(Error::Parameter(format!("components must be 1 or 2, got {components}")));
        }
        let nv = mesh.vertices.len();
        let mut node_coords = mesh.vertices.clone();
        let mut edge_node: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edge_cell: HashMap<(usize, usize), usize> = HashMap::new();
        let mut cell_nodes = Vec::with_capacity(mesh.cells.len());
        for (ci, c) in mesh.cells.iter().enumerate() {
            let mut n = [c[0], c[1], c[2], 0, 0, 0];
            for k in 0..3 {
                let (a, b) = (c[k], c[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                edge_cell.entry(key).or_insert(ci);
                if degree == 2 {
                    n[3 + k] = *edge_node.entry(key).or_insert_with(|| {
                        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
                        node_coords.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
                        node_coords.len() - 1
                    });
                }
            }
            cell_nodes.push(n);
        }
        let mut node_tag: Vec<Option<Tag>> = vec![None; node_coords.len()];
        let mut boundary_edge_nodes = Vec::with_capacity(mesh.boundary.len());
        let mut boundary_edge_cell = Vec::with_capacity(mesh.boundary.len());
        for be in &mesh.boundary {
            let [a, b] = be.v;
            let key = (a.min(b), a.max(b));
            let cell = *edge_cell
                .get(&key)
                .ok_or_else(|| Error::Mesh(format!("boundary edge ({a}, {b}) is not a mesh edge")))?;
            let mut nodes = vec![a, b];
            if degree == 2 {
                nodes.push(edge_node[&key]);
            }
            for &n in &nodes {
                node_tag[n] = Some(match node_tag[n] {
                    Some(t) => t.min(be.tag),
                    None => be.tag,
                });
            }
            boundary_edge_nodes.push(nodes);
            boundary_edge_cell.push(cell);
        }
        debug_assert!(node_coords.len() >= nv);
        Ok(Arc::new(FeSpace {
            mesh,
            degree,
            components,
            cell_nodes,
            node_coords,
            node_tag,
            boundary_edge_nodes,
            boundary_edge_cell,
            locator: OnceLock::new(),
        }))
    }

    pub fn n_nodes(&self) -> usize {
        self.node_coords.len()
    }

    pub fn n_dofs(&self) -> usize {
        self.n_nodes() * self.components
    }

    pub fn nodes_per_cell(&self) -> usize {
        if self.degree == 2 {
            6
        } else {
            3
        }
    }

    pub fn local_nodes(&self, cell: usize) -> &[usize] {
        &self.cell_nodes[cell][..self.nodes_per_cell()]
    }

    pub fn cell_dofs(&self, cell: usize) -> Vec<usize> {
        let nc = self.components;
        self.local_nodes(cell).iter().flat_map(|&n| (0..nc).map(move |k| n * nc + k)).collect()
    }

    /// Gradients of the barycentric coordinates and the cell area.
    pub fn barycentric_gradients(&self, cell: usize) -> ([[f64; 2]; 3], f64) {
        let p = self.mesh.cell_points(cell);
        let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[1][1] - p[0][1]) * (p[2][0] - p[0][0]);
        let mut g = [[0.0; 2]; 3];
        for i in 0..3 {
            let a = p[(i + 1) % 3];
            let b = p[(i + 2) % 3];
            g[i] = [(a[1] - b[1]) / det, (b[0] - a[0]) / det];
        }
        (g, 0.5 * det)
    }

    /// Barycentric coordinates of `x` in `cell`.
    pub fn barycentric(&self, cell: usize, x: Point) -> [f64; 3] {
        let p = self.mesh.cell_points(cell);
        let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[1][1] - p[0][1]) * (p[2][0] - p[0][0]);
        let l1 = ((x[0] - p[0][0]) * (p[2][1] - p[0][1]) - (x[1] - p[0][1]) * (p[2][0] - p[0][0])) / det;
        let l2 = ((p[1][0] - p[0][0]) * (x[1] - p[0][1]) - (p[1][1] - p[0][1]) * (x[0] - p[0][0])) / det;
        [1.0 - l1 - l2, l1, l2]
    }

    /// Shape-function values at barycentric point `l`.
    pub fn shape_values(&self, l: [f64; 3]) -> [f64; 6] {
        if self.degree == 1 {
            return [l[0], l[1], l[2], 0.0, 0.0, 0.0];
        }
        [
            l[0] * (2.0 * l[0] - 1.0),
            l[1] * (2.0 * l[1] - 1.0),
            l[2] * (2.0 * l[2] - 1.0),
            4.0 * l[0] * l[1],
            4.0 * l[1] * l[2],
            4.0 * l[2] * l[0],
        ]
    }

    /// Shape-function gradients at barycentric point `l`, given the
    /// barycentric gradients `g`.
    pub fn shape_gradients(&self, l: [f64; 3], g: &[[f64; 2]; 3]) -> [[f64; 2]; 6] {
        let mut out = [[0.0; 2]; 6];
        if self.degree == 1 {
            out[..3].copy_from_slice(g);
            return out;
        }
        for d in 0..2 {
            for i in 0..3 {
                out[i][d] = (4.0 * l[i] - 1.0) * g[i][d];
            }
            for (k, (i, j)) in [(0, 1), (1, 2), (2, 0)].into_iter().enumerate() {
                out[3 + k][d] = 4.0 * (l[i] * g[j][d] + l[j] * g[i][d]);
            }
        }
        out
    }

    /// Physical point of barycentric coordinates `l` in `cell`.
    pub fn map_point(&self, cell: usize, l: [f64; 3]) -> Point {
        let p = self.mesh.cell_points(cell);
        [
            l[0] * p[0][0] + l[1] * p[1][0] + l[2] * p[2][0],
            l[0] * p[0][1] + l[1] * p[1][1] + l[2] * p[2][1],
        ]
    }

    pub fn locator(&self) -> &Locator {
        self.locator.get_or_init(|| Locator::new(&self.mesh))
    }

    /// Cell containing `p`; the lowest index wins on shared edges.
    pub fn locate(&self, p: Point) -> Result<usize> {
        self.locator().locate(&self.mesh, p).ok_or(Error::Location(p[0], p[1]))
    }

    /// DOFs fixed by Dirichlet data: every component of every node on an
    /// `Outer`, `D1` or `D2` edge.
    pub fn dirichlet_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.n_dofs()];
        for (n, t) in self.node_tag.iter().enumerate() {
            if matches!(t, Some(Tag::Outer | Tag::D1 | Tag::D2)) {
                for k in 0..self.components {
                    mask[n * self.components + k] = true;
                }
            }
        }
        mask
    }

    /// Nodes whose priority tag is `tag`.
    pub fn tagged_nodes(&self, tag: Tag) -> Vec<usize> {
        (0..self.n_nodes()).filter(|&n| self.node_tag[n] == Some(tag)).collect()
    }
}

#[derive(Clone, Copy, Debug)]
struct BvhNode {
    lo: Point,
    hi: Point,
    /// Leaf: `start..end` into `order`; inner: children `left`, `left + 1`
    /// encoded as `start = left`, `end = usize::MAX`.
    start: usize,
    end: usize,
}

/// Bounding-volume hierarchy over mesh cells.
#[derive(Debug)]
pub struct Locator {
    nodes: Vec<BvhNode>,
    order: Vec<usize>,
}

const LEAF: usize = 8;

impl Locator {
    pub fn new(mesh: &Mesh) -> Locator {
        let n = mesh.cells.len();
        let mut boxes = Vec::with_capacity(n);
        for c in 0..n {
            let p = mesh.cell_points(c);
            let lo = [p[0][0].min(p[1][0]).min(p[2][0]), p[0][1].min(p[1][1]).min(p[2][1])];
            let hi = [p[0][0].max(p[1][0]).max(p[2][0]), p[0][1].max(p[1][1]).max(p[2][1])];
            boxes.push((lo, hi));
        }
        let mut order: Vec<usize> = (0..n).collect();
        let mut nodes = vec![BvhNode { lo: [0.0; 2], hi: [0.0; 2], start: 0, end: 0 }];
        let mut stack = vec![(0usize, 0usize, n)];
        while let Some((id, s, e)) = stack.pop() {
            let mut lo = [f64::INFINITY; 2];
            let mut hi = [f64::NEG_INFINITY; 2];
            for &c in &order[s..e] {
                for d in 0..2 {
                    lo[d] = lo[d].min(boxes[c].0[d]);
                    hi[d] = hi[d].max(boxes[c].1[d]);
                }
            }
            if e - s <= LEAF {
                nodes[id] = BvhNode { lo, hi, start: s, end: e };
                continue;
            }
            let axis = if hi[0] - lo[0] >= hi[1] - lo[1] { 0 } else { 1 };
            let mid = s + (e - s) / 2;
            let key = |c: &usize| boxes[*c].0[axis] + boxes[*c].1[axis];
            order[s..e].select_nth_unstable_by(mid - s, |a, b| key(a).total_cmp(&key(b)));
            let left = nodes.len();
            nodes.push(BvhNode { lo, hi, start: 0, end: 0 });
            nodes.push(BvhNode { lo, hi, start: 0, end: 0 });
            nodes[id] = BvhNode { lo, hi, start: left, end: usize::MAX };
            stack.push((left, s, mid));
            stack.push((left + 1, mid, e));
        }
        Locator { nodes, order }
    }

    /// Calls `visit` for every cell whose bounding box meets `[lo, hi]`.
    pub fn query(&self, lo: Point, hi: Point, mut visit: impl FnMut(usize)) {
        if self.order.is_empty() {
            return;
        }
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let nd = self.nodes[id];
            if nd.lo[0] > hi[0] || nd.hi[0] < lo[0] || nd.lo[1] > hi[1] || nd.hi[1] < lo[1] {
                continue;
            }
            if nd.end == usize::MAX {
                stack.push(nd.start);
                stack.push(nd.start + 1);
            } else {
                for &c in &self.order[nd.start..nd.end] {
                    visit(c);
                }
            }
        }
    }

    pub fn locate(&self, mesh: &Mesh, p: Point) -> Option<usize> {
        let mut best: Option<usize> = None;
        self.query(p, p, |c| {
            if best.is_some_and(|b| b < c) {
                return;
            }
            let t = mesh.cell_points(c);
            let det = (t[1][0] - t[0][0]) * (t[2][1] - t[0][1]) - (t[1][1] - t[0][1]) * (t[2][0] - t[0][0]);
            let l1 = ((p[0] - t[0][0]) * (t[2][1] - t[0][1]) - (p[1] - t[0][1]) * (t[2][0] - t[0][0])) / det;
            let l2 = ((t[1][0] - t[0][0]) * (p[1] - t[0][1]) - (t[1][1] - t[0][1]) * (p[0] - t[0][0])) / det;
            let tol = 1e-12;
            if l1 >= -tol && l2 >= -tol && 1.0 - l1 - l2 >= -tol {
                best = Some(c);
            }
        });
        best
    }

    /// Cells crossed by the segment `a b` with the parameter interval inside
    /// each, sorted by cell index.
    pub fn segment_cells(&self, mesh: &Mesh, a: Point, b: Point) -> Vec<(usize, f64, f64)> {
        let lo = [a[0].min(b[0]), a[1].min(b[1])];
        let hi = [a[0].max(b[0]), a[1].max(b[1])];
        let mut out = Vec::new();
        self.query(lo, hi, |c| {
            if let Some((s0, s1)) = clip_segment(mesh.cell_points(c), a, b, 1e-12) {
                out.push((c, s0, s1));
            }
        });
        out.sort_by_key(|x| x.0);
        out
    }
}

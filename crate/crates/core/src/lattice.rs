//! Geometry of the box `Λ_N` on the rescaled square lattice `δZ²`, its dual
//! and its medial lattice.
//!
//! All geometry is integer. Positions that mix primal vertices, dual vertices
//! and edge midpoints use *doubled* coordinates: a primal vertex `(x, y)` sits
//! at `(2x, 2y)`, a dual vertex `(x + ½, y + ½)` at `(2x + 1, 2y + 1)`, and the
//! midpoint of a primal edge (a medial vertex) at a point with exactly one odd
//! coordinate. The scale `δ` is metadata used only when results are reported
//! in physical units.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{Error, Result};

/// Physical length of one lattice step, as a positive rational `num / den`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Scale {
    num: u64,
    den: u64,
}

impl Scale {
    pub const UNIT: Scale = Scale { num: 1, den: 1 };

    pub fn new(num: u64, den: u64) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::InvalidInput(format!(
                "scale must be a positive rational, got {num}/{den}"
            )));
        }
        let g = gcd(num, den);
        Ok(Scale {
            num: num / g,
            den: den / g,
        })
    }

    /// `1 / den`, the usual `δ = 1/n` mesh.
    pub fn inverse(den: u64) -> Result<Self> {
        Self::new(1, den)
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl Default for Scale {
    fn default() -> Self {
        Scale::UNIT
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Orientation {
    Horizontal,
    Vertical,
}

/// A primal edge, identified by its lower-left endpoint and orientation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct EdgeId {
    pub x: i32,
    pub y: i32,
    pub orientation: Orientation,
}

impl EdgeId {
    pub fn horizontal(x: i32, y: i32) -> Self {
        EdgeId {
            x,
            y,
            orientation: Orientation::Horizontal,
        }
    }

    pub fn vertical(x: i32, y: i32) -> Self {
        EdgeId {
            x,
            y,
            orientation: Orientation::Vertical,
        }
    }

    pub fn endpoints(&self) -> ((i32, i32), (i32, i32)) {
        match self.orientation {
            Orientation::Horizontal => ((self.x, self.y), (self.x + 1, self.y)),
            Orientation::Vertical => ((self.x, self.y), (self.x, self.y + 1)),
        }
    }

    /// Midpoint in doubled coordinates.
    pub fn midpoint2(&self) -> (i32, i32) {
        match self.orientation {
            Orientation::Horizontal => (2 * self.x + 1, 2 * self.y),
            Orientation::Vertical => (2 * self.x, 2 * self.y + 1),
        }
    }

    pub fn as_planar(&self) -> PlanarEdge {
        let (a, b) = self.endpoints();
        PlanarEdge::new((2 * a.0, 2 * a.1), (2 * b.0, 2 * b.1))
    }
}

/// A unit segment of either the primal lattice or the dual lattice, stored in
/// doubled coordinates with its endpoints in lexicographic order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct PlanarEdge {
    pub a: (i32, i32),
    pub b: (i32, i32),
}

impl PlanarEdge {
    pub fn new(a: (i32, i32), b: (i32, i32)) -> Self {
        if a <= b {
            PlanarEdge { a, b }
        } else {
            PlanarEdge { a: b, b: a }
        }
    }

    pub fn is_primal(&self) -> bool {
        self.a.0 % 2 == 0 && self.a.1 % 2 == 0
    }

    /// Endpoints as real coordinates (undoing the doubling).
    pub fn endpoints_f64(&self) -> ((f64, f64), (f64, f64)) {
        let h = |p: (i32, i32)| (p.0 as f64 / 2.0, p.1 as f64 / 2.0);
        (h(self.a), h(self.b))
    }
}

/// The edge of the other lattice crossing `e` in its middle. Applying it twice
/// returns `e`.
pub fn dual_edge(e: PlanarEdge) -> PlanarEdge {
    let mx = (e.a.0 + e.b.0) / 2;
    let my = (e.a.1 + e.b.1) / 2;
    let dx = (e.b.0 - e.a.0) / 2;
    let dy = (e.b.1 - e.a.1) / 2;
    // rotate the half-vector by a quarter turn
    let (rx, ry) = (-dy, dx);
    PlanarEdge::new((mx - rx, my - ry), (mx + rx, my + ry))
}

/// Boundary condition on `∂Λ_N`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundarySpec {
    Free,
    Wired,
    /// Disjoint groups of boundary vertices, each wired internally.
    Partition(Vec<Vec<u32>>),
}

impl BoundarySpec {
    pub fn label(&self) -> &'static str {
        match self {
            BoundarySpec::Free => "free",
            BoundarySpec::Wired => "wired",
            BoundarySpec::Partition(_) => "partition",
        }
    }

    /// Checks that partition groups are disjoint sets of boundary vertices.
    pub fn validate(&self, boundary: &[u32]) -> Result<()> {
        if let BoundarySpec::Partition(groups) = self {
            let mut seen = std::collections::HashSet::new();
            let bset: std::collections::HashSet<u32> = boundary.iter().copied().collect();
            for g in groups {
                for v in g {
                    if !bset.contains(v) {
                        return Err(Error::InvalidInput(format!(
                            "partition vertex {v} is not a boundary vertex"
                        )));
                    }
                    if !seen.insert(*v) {
                        return Err(Error::InvalidInput(format!(
                            "partition groups overlap at vertex {v}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Wiring groups, resolved against a concrete boundary vertex list.
    pub fn groups(&self, boundary: &[u32]) -> Vec<Vec<u32>> {
        match self {
            BoundarySpec::Free => Vec::new(),
            BoundarySpec::Wired => vec![boundary.to_vec()],
            BoundarySpec::Partition(g) => g.iter().filter(|g| g.len() > 1).cloned().collect(),
        }
    }

    /// Partial order of wirings: `self ≤ other` iff every pair wired by `self`
    /// is wired by `other`.
    pub fn is_finer_than(&self, other: &BoundarySpec, boundary: &[u32]) -> bool {
        let mine = self.groups(boundary);
        let theirs = other.groups(boundary);
        let mut owner = std::collections::HashMap::new();
        for (i, g) in theirs.iter().enumerate() {
            for v in g {
                owner.insert(*v, i);
            }
        }
        mine.iter().all(|g| {
            let first = owner.get(&g[0]);
            first.is_some() && g.iter().all(|v| owner.get(v) == first)
        })
    }
}

/// A finite graph on which the random-cluster measure lives.
///
/// Implemented by the lattice box and by small ad-hoc graphs used in oracle
/// tests.
pub trait EdgeGraph: Sync {
    fn num_vertices(&self) -> usize;
    fn num_edges(&self) -> usize;
    fn endpoints(&self, e: usize) -> (u32, u32);
    fn boundary_vertices(&self) -> &[u32];

    /// Visits every edge in index order.
    fn for_each_edge<F: FnMut(usize, u32, u32)>(&self, mut f: F) {
        for e in 0..self.num_edges() {
            let (a, b) = self.endpoints(e);
            f(e, a, b);
        }
    }
}

/// An arbitrary small graph given by an edge list.
#[derive(Clone, Debug)]
pub struct SmallGraph {
    n: usize,
    edges: Vec<(u32, u32)>,
    boundary: Vec<u32>,
}

impl SmallGraph {
    /// Every vertex is treated as a boundary vertex unless `boundary` is given.
    pub fn new(n: usize, edges: Vec<(u32, u32)>, boundary: Option<Vec<u32>>) -> Result<Self> {
        for &(a, b) in &edges {
            if a as usize >= n || b as usize >= n || a == b {
                return Err(Error::InvalidInput(format!("bad edge ({a},{b})")));
            }
        }
        let boundary = boundary.unwrap_or_else(|| (0..n as u32).collect());
        Ok(SmallGraph { n, edges, boundary })
    }

    /// The `w × h` vertex grid, with boundary = vertices of degree < 4.
    pub fn grid(w: usize, h: usize) -> Self {
        let idx = |x: usize, y: usize| (y * w + x) as u32;
        let mut edges = Vec::new();
        for y in 0..h {
            for x in 0..w {
                if x + 1 < w {
                    edges.push((idx(x, y), idx(x + 1, y)));
                }
            }
        }
        for y in 0..h {
            for x in 0..w {
                if y + 1 < h {
                    edges.push((idx(x, y), idx(x, y + 1)));
                }
            }
        }
        let mut deg = vec![0u32; w * h];
        for &(a, b) in &edges {
            deg[a as usize] += 1;
            deg[b as usize] += 1;
        }
        let boundary = (0..(w * h) as u32).filter(|&v| deg[v as usize] < 4).collect();
        SmallGraph {
            n: w * h,
            edges,
            boundary,
        }
    }
}

impl EdgeGraph for SmallGraph {
    fn num_vertices(&self) -> usize {
        self.n
    }
    fn num_edges(&self) -> usize {
        self.edges.len()
    }
    fn endpoints(&self, e: usize) -> (u32, u32) {
        self.edges[e]
    }
    fn boundary_vertices(&self) -> &[u32] {
        &self.boundary
    }
}

/// The box `Λ_N^δ = [-N, N]² ∩ Z²` (lattice units) at mesh `δ`.
///
/// Vertex `(x, y)` has index `(y + N)·L + (x + N)` with `L = 2N + 1`. Edges are
/// numbered horizontal first (row-major by lower-left endpoint), then vertical.
/// Dual vertices `(i + ½, j + ½)`, `i, j ∈ [-N-1, N]`, are numbered
/// `(j + N + 1)·(2N + 2) + (i + N + 1)`; the outer ring of them lies outside the
/// box.
#[derive(Clone, Debug)]
pub struct Domain {
    n: i32,
    scale: Scale,
    boundary: Vec<u32>,
}

impl Domain {
    pub fn new(half_width: u32, scale: Scale) -> Result<Self> {
        if half_width == 0 {
            return Err(Error::InvalidInput("half-width N must be at least 1".into()));
        }
        if half_width > 1 << 14 {
            return Err(Error::Resource(format!(
                "half-width {half_width} exceeds the supported maximum 16384"
            )));
        }
        let n = half_width as i32;
        let l = 2 * n + 1;
        let mut boundary = Vec::with_capacity(8 * n as usize);
        for y in -n..=n {
            for x in -n..=n {
                if x.abs() == n || y.abs() == n {
                    boundary.push(((y + n) * l + (x + n)) as u32);
                }
            }
        }
        Ok(Domain {
            n,
            scale,
            boundary,
        })
    }

    /// Box of physical half-width `extent` at mesh `1/den`.
    pub fn physical(extent: f64, den: u64) -> Result<Self> {
        let n = (extent * den as f64).round();
        if !(n >= 1.0) {
            return Err(Error::InvalidInput(format!(
                "extent {extent} is below one lattice step"
            )));
        }
        Domain::new(n as u32, Scale::inverse(den)?)
    }

    pub fn half_width(&self) -> u32 {
        self.n as u32
    }

    pub fn n(&self) -> i32 {
        self.n
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    /// Vertices per side.
    pub fn side(&self) -> usize {
        (2 * self.n + 1) as usize
    }

    pub fn num_horizontal(&self) -> usize {
        2 * self.n as usize * self.side()
    }

    pub fn contains(&self, x: i32, y: i32) -> bool {
        x.abs() <= self.n && y.abs() <= self.n
    }

    #[inline]
    pub fn vertex_index(&self, x: i32, y: i32) -> u32 {
        debug_assert!(self.contains(x, y));
        ((y + self.n) * (2 * self.n + 1) + (x + self.n)) as u32
    }

    #[inline]
    pub fn vertex_coords(&self, v: u32) -> (i32, i32) {
        let l = 2 * self.n + 1;
        let v = v as i32;
        (v % l - self.n, v / l - self.n)
    }

    pub fn is_boundary(&self, v: u32) -> bool {
        let (x, y) = self.vertex_coords(v);
        x.abs() == self.n || y.abs() == self.n
    }

    pub fn edge_id(&self, e: usize) -> EdgeId {
        let h = self.num_horizontal();
        let n = self.n;
        if e < h {
            let w = 2 * n as usize;
            EdgeId::horizontal((e % w) as i32 - n, (e / w) as i32 - n)
        } else {
            let e = e - h;
            let l = self.side();
            EdgeId::vertical((e % l) as i32 - n, (e / l) as i32 - n)
        }
    }

    /// Index of an edge, if it lies in the box.
    pub fn edge_index(&self, id: EdgeId) -> Option<usize> {
        let n = self.n;
        let ((x0, y0), (x1, y1)) = id.endpoints();
        if !self.contains(x0, y0) || !self.contains(x1, y1) {
            return None;
        }
        Some(match id.orientation {
            Orientation::Horizontal => {
                (id.y + n) as usize * (2 * n) as usize + (id.x + n) as usize
            }
            Orientation::Vertical => {
                self.num_horizontal() + (id.y + n) as usize * self.side() + (id.x + n) as usize
            }
        })
    }

    /// Index of the edge whose midpoint is at doubled position `(mx, my)`.
    pub fn edge_at_midpoint(&self, mx: i32, my: i32) -> Option<usize> {
        match (mx.rem_euclid(2), my.rem_euclid(2)) {
            (1, 0) => self.edge_index(EdgeId::horizontal((mx - 1) / 2, my / 2)),
            (0, 1) => self.edge_index(EdgeId::vertical(mx / 2, (my - 1) / 2)),
            _ => None,
        }
    }

    /// Number of faces of the box graph, counting the outer face.
    pub fn num_faces(&self) -> usize {
        (2 * self.n as usize).pow(2) + 1
    }

    // ---- dual lattice ----

    /// Dual vertices per side, including the exterior ring.
    pub fn dual_side(&self) -> usize {
        (2 * self.n + 2) as usize
    }

    pub fn num_dual_vertices(&self) -> usize {
        self.dual_side() * self.dual_side()
    }

    /// Index of dual vertex `(i + ½, j + ½)`.
    #[inline]
    pub fn dual_index(&self, i: i32, j: i32) -> u32 {
        let s = 2 * self.n + 2;
        ((j + self.n + 1) * s + (i + self.n + 1)) as u32
    }

    #[inline]
    pub fn dual_coords(&self, d: u32) -> (i32, i32) {
        let s = 2 * self.n + 2;
        let d = d as i32;
        (d % s - self.n - 1, d / s - self.n - 1)
    }

    /// True for dual vertices outside `Λ_N`.
    pub fn dual_is_exterior(&self, d: u32) -> bool {
        let (i, j) = self.dual_coords(d);
        i < -self.n || i >= self.n || j < -self.n || j >= self.n
    }

    /// The two dual vertices separated by primal edge `e`.
    #[inline]
    pub fn dual_endpoints(&self, e: usize) -> (u32, u32) {
        let id = self.edge_id(e);
        match id.orientation {
            Orientation::Horizontal => (self.dual_index(id.x, id.y - 1), self.dual_index(id.x, id.y)),
            Orientation::Vertical => (self.dual_index(id.x - 1, id.y), self.dual_index(id.x, id.y)),
        }
    }

    // ---- geometry helpers ----

    /// `L∞` norm of a primal vertex.
    #[inline]
    pub fn linf(&self, v: u32) -> i32 {
        let (x, y) = self.vertex_coords(v);
        x.abs().max(y.abs())
    }

    /// Primal vertices at Euclidean distance `≤ r` from `c` (lattice units).
    pub fn vertices_in_ball(&self, c: (f64, f64), r: f64) -> Vec<u32> {
        let mut out = Vec::new();
        let n = self.n;
        let (x0, x1) = ((c.0 - r).ceil() as i32, (c.0 + r).floor() as i32);
        let (y0, y1) = ((c.1 - r).ceil() as i32, (c.1 + r).floor() as i32);
        for y in y0.max(-n)..=y1.min(n) {
            for x in x0.max(-n)..=x1.min(n) {
                let (dx, dy) = (x as f64 - c.0, y as f64 - c.1);
                if dx * dx + dy * dy <= r * r {
                    out.push(self.vertex_index(x, y));
                }
            }
        }
        out
    }

    /// Dual vertices at Euclidean distance `≤ r` from `c` (lattice units).
    pub fn dual_vertices_in_ball(&self, c: (f64, f64), r: f64) -> Vec<u32> {
        let mut out = Vec::new();
        let n = self.n;
        let (i0, i1) = ((c.0 - r - 0.5).ceil() as i32, (c.0 + r - 0.5).floor() as i32);
        let (j0, j1) = ((c.1 - r - 0.5).ceil() as i32, (c.1 + r - 0.5).floor() as i32);
        for j in j0.max(-n - 1)..=j1.min(n) {
            for i in i0.max(-n - 1)..=i1.min(n) {
                let (dx, dy) = (i as f64 + 0.5 - c.0, j as f64 + 0.5 - c.1);
                if dx * dx + dy * dy <= r * r {
                    out.push(self.dual_index(i, j));
                }
            }
        }
        out
    }

    /// Primal vertices of the square `Λ_r(c)` (closed `L∞` ball).
    pub fn vertices_in_box(&self, c: (i32, i32), r: i32) -> Vec<u32> {
        let n = self.n;
        let mut out = Vec::new();
        for y in (c.1 - r).max(-n)..=(c.1 + r).min(n) {
            for x in (c.0 - r).max(-n)..=(c.0 + r).min(n) {
                out.push(self.vertex_index(x, y));
            }
        }
        out
    }

    pub fn to_lattice(&self, physical: f64) -> f64 {
        physical / self.scale.as_f64()
    }

    pub fn to_physical(&self, lattice: f64) -> f64 {
        lattice * self.scale.as_f64()
    }

    pub fn medial(&self) -> MedialGraph<'_> {
        MedialGraph { domain: self }
    }
}

impl Domain {
    /// The box with opposite sides joined by extra edges, a torus of period
    /// `2N + 1` with no boundary. Edges `0..num_edges()` are the box edges in
    /// box order; the wrap edges follow.
    pub fn periodic_graph(&self) -> SmallGraph {
        let n = self.n;
        let mut edges: Vec<(u32, u32)> = (0..self.num_edges()).map(|e| self.endpoints(e)).collect();
        for y in -n..=n {
            edges.push((self.vertex_index(n, y), self.vertex_index(-n, y)));
        }
        for x in -n..=n {
            edges.push((self.vertex_index(x, n), self.vertex_index(x, -n)));
        }
        SmallGraph {
            n: self.num_vertices(),
            edges,
            boundary: Vec::new(),
        }
    }
}

impl EdgeGraph for Domain {
    fn num_vertices(&self) -> usize {
        self.side() * self.side()
    }

    fn num_edges(&self) -> usize {
        2 * self.num_horizontal()
    }

    #[inline]
    fn endpoints(&self, e: usize) -> (u32, u32) {
        let h = self.num_horizontal();
        let l = self.side();
        if e < h {
            let w = l - 1;
            let v = (e / w) * l + e % w;
            (v as u32, v as u32 + 1)
        } else {
            let v = e - h;
            (v as u32, (v + l) as u32)
        }
    }

    fn boundary_vertices(&self) -> &[u32] {
        &self.boundary
    }

    fn for_each_edge<F: FnMut(usize, u32, u32)>(&self, mut f: F) {
        let l = self.side();
        let w = l - 1;
        let mut e = 0;
        for row in 0..l {
            let base = (row * l) as u32;
            for c in 0..w as u32 {
                f(e, base + c, base + c + 1);
                e += 1;
            }
        }
        let vcount = w * l;
        for v in 0..vcount as u32 {
            f(e, v, v + l as u32);
            e += 1;
        }
    }
}

/// Diagonal directions from a medial vertex, in port order.
pub const PORT_DIRS: [(i32, i32); 4] = [(1, 1), (-1, 1), (-1, -1), (1, -1)];

/// Port names, matching [`PORT_DIRS`].
pub const NE: usize = 0;
pub const NW: usize = 1;
pub const SW: usize = 2;
pub const SE: usize = 3;

/// Port index for a diagonal direction.
#[inline]
pub fn port_of(dir: (i32, i32)) -> usize {
    match dir {
        (1, 1) => NE,
        (-1, 1) => NW,
        (-1, -1) => SW,
        _ => SE,
    }
}

/// The medial lattice of a box: one vertex per primal edge, edges joining
/// midpoints at distance `1/√2`.
///
/// Faces of the medial graph are diamonds centred at primal vertices and dual
/// vertices. Face ids: primal vertex `v` ↦ `v`; dual vertex `d` ↦
/// `num_vertices + d`; the unbounded region ↦ [`MedialGraph::outer_face`].
#[derive(Clone, Copy, Debug)]
pub struct MedialGraph<'a> {
    domain: &'a Domain,
}

impl<'a> MedialGraph<'a> {
    pub fn domain(&self) -> &'a Domain {
        self.domain
    }

    pub fn num_vertices(&self) -> usize {
        self.domain.num_edges()
    }

    /// Doubled position of medial vertex `m`.
    pub fn position(&self, m: usize) -> (i32, i32) {
        self.domain.edge_id(m).midpoint2()
    }

    /// Medial vertex at doubled position `p`, if it exists.
    pub fn vertex_at(&self, p: (i32, i32)) -> Option<usize> {
        self.domain.edge_at_midpoint(p.0, p.1)
    }

    /// The neighbour across port `port` of `m`, if inside the box.
    pub fn neighbor(&self, m: usize, port: usize) -> Option<usize> {
        let (x, y) = self.position(m);
        let (dx, dy) = PORT_DIRS[port];
        self.vertex_at((x + dx, y + dy))
    }

    pub fn degree(&self, m: usize) -> usize {
        (0..4).filter(|&p| self.neighbor(m, p).is_some()).count()
    }

    /// Every medial edge once, as `(m, port, m')` with `m < m'`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        (0..self.num_vertices()).flat_map(move |m| {
            (0..4).filter_map(move |p| match self.neighbor(m, p) {
                Some(n) if m < n => Some((m, p, n)),
                _ => None,
            })
        })
    }

    pub fn num_edges(&self) -> usize {
        // 4 sides around each interior dual face
        4 * (2 * self.domain.n as usize).pow(2)
    }

    /// The two faces on either side of the medial segment leaving doubled
    /// position `p` in direction `dir`, as doubled centres `(primal, dual)`.
    pub fn side_faces(p: (i32, i32), dir: (i32, i32)) -> ((i32, i32), (i32, i32)) {
        let a = (p.0 + dir.0, p.1);
        let b = (p.0, p.1 + dir.1);
        if a.0.rem_euclid(2) == 0 {
            (a, b)
        } else {
            (b, a)
        }
    }

    pub fn num_primal_faces(&self) -> usize {
        self.domain.num_vertices()
    }

    pub fn num_faces(&self) -> usize {
        self.domain.num_vertices() + self.domain.num_dual_vertices() + 1
    }

    pub fn outer_face(&self) -> u32 {
        (self.domain.num_vertices() + self.domain.num_dual_vertices()) as u32
    }

    /// Face id for a doubled centre, `None` outside the face grid.
    pub fn face_at(&self, c: (i32, i32)) -> Option<u32> {
        let d = self.domain;
        let n = d.n;
        if c.0.rem_euclid(2) == 0 && c.1.rem_euclid(2) == 0 {
            let (x, y) = (c.0 / 2, c.1 / 2);
            d.contains(x, y).then(|| d.vertex_index(x, y))
        } else if c.0.rem_euclid(2) == 1 && c.1.rem_euclid(2) == 1 {
            let (i, j) = ((c.0 - 1) / 2, (c.1 - 1) / 2);
            (i >= -n - 1 && i <= n && j >= -n - 1 && j <= n)
                .then(|| (d.num_vertices() as u32) + d.dual_index(i, j))
        } else {
            None
        }
    }

    /// Doubled centre of a (non-outer) face id.
    pub fn face_center(&self, f: u32) -> (i32, i32) {
        let d = self.domain;
        let nv = d.num_vertices() as u32;
        if f < nv {
            let (x, y) = d.vertex_coords(f);
            (2 * x, 2 * y)
        } else {
            let (i, j) = d.dual_coords(f - nv);
            (2 * i + 1, 2 * j + 1)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_box_counts() {
        let d = Domain::new(1, Scale::UNIT).unwrap();
        assert_eq!(d.num_vertices(), 9);
        assert_eq!(d.num_edges(), 12);
        assert_eq!(d.boundary_vertices().len(), 8);
        assert_eq!(d.medial().num_vertices(), 12);
        let d2 = Domain::new(2, Scale::UNIT).unwrap();
        assert_eq!(d2.num_vertices(), 25);
        assert_eq!(d2.num_edges(), 40);
    }

    #[test]
    fn periodic_graph_is_four_regular() {
        let d = Domain::new(3, Scale::UNIT).unwrap();
        let t = d.periodic_graph();
        assert_eq!(t.num_edges(), 2 * d.num_vertices());
        assert!(t.boundary_vertices().is_empty());
        let mut deg = vec![0; t.num_vertices()];
        t.for_each_edge(|e, a, b| {
            if e < d.num_edges() {
                assert_eq!((a, b), d.endpoints(e));
            }
            deg[a as usize] += 1;
            deg[b as usize] += 1;
        });
        assert!(deg.iter().all(|&k| k == 4));
    }

    #[test]
    fn zero_half_width_rejected() {
        assert!(Domain::new(0, Scale::UNIT).is_err());
        assert!(Scale::new(0, 3).is_err());
    }

    #[test]
    fn euler_relation_primal_and_medial() {
        for n in 1..=6 {
            let d = Domain::new(n, Scale::UNIT).unwrap();
            let (v, e, f) = (d.num_vertices() as i64, d.num_edges() as i64, d.num_faces() as i64);
            assert_eq!(v - e + f, 2);
            let m = d.medial();
            let counted = m.edges().count();
            assert_eq!(counted, m.num_edges());
            // faces of the medial graph: interior dual diamonds, interior primal
            // diamonds, one unbounded face
            let inner_primal = (2 * n as i64 - 1).pow(2);
            let inner_dual = (2 * n as i64).pow(2);
            let fm = inner_primal + inner_dual + 1;
            assert_eq!(m.num_vertices() as i64 - counted as i64 + fm, 2);
        }
    }

    #[test]
    fn boundary_is_degree_below_four() {
        let d = Domain::new(3, Scale::UNIT).unwrap();
        let mut deg = vec![0; d.num_vertices()];
        d.for_each_edge(|_, a, b| {
            deg[a as usize] += 1;
            deg[b as usize] += 1;
        });
        for v in 0..d.num_vertices() as u32 {
            assert_eq!(deg[v as usize] < 4, d.is_boundary(v));
        }
        assert_eq!(d.boundary_vertices().len(), 8 * 3);
    }

    #[test]
    fn edge_numbering_roundtrip() {
        let d = Domain::new(3, Scale::UNIT).unwrap();
        let mut seen = Vec::new();
        d.for_each_edge(|e, a, b| {
            assert_eq!(d.endpoints(e), (a, b));
            let id = d.edge_id(e);
            assert_eq!(d.edge_index(id), Some(e));
            let ((x0, y0), (x1, y1)) = id.endpoints();
            assert_eq!((d.vertex_index(x0, y0), d.vertex_index(x1, y1)), (a, b));
            let (mx, my) = id.midpoint2();
            assert_eq!(d.edge_at_midpoint(mx, my), Some(e));
            seen.push(e);
        });
        assert_eq!(seen.len(), d.num_edges());
    }

    #[test]
    fn dual_edge_examples() {
        let h = EdgeId::horizontal(0, 0).as_planar();
        let dh = dual_edge(h);
        assert_eq!(dh, PlanarEdge::new((1, -1), (1, 1)));
        assert_eq!(dh.endpoints_f64(), ((0.5, -0.5), (0.5, 0.5)));
        let v = EdgeId::vertical(0, 0).as_planar();
        assert_eq!(dual_edge(v), PlanarEdge::new((-1, 1), (1, 1)));
        assert!(!dh.is_primal());
        assert_eq!(dual_edge(dh), h);
        assert_eq!(dual_edge(dual_edge(v)), v);
    }

    #[test]
    fn dual_endpoints_match_dual_edge() {
        let d = Domain::new(2, Scale::UNIT).unwrap();
        for e in 0..d.num_edges() {
            let de = dual_edge(d.edge_id(e).as_planar());
            let (p, q) = d.dual_endpoints(e);
            let c = |x: u32| {
                let (i, j) = d.dual_coords(x);
                (2 * i + 1, 2 * j + 1)
            };
            assert_eq!(PlanarEdge::new(c(p), c(q)), de);
        }
    }

    #[test]
    fn medial_degrees() {
        let d = Domain::new(2, Scale::UNIT).unwrap();
        let m = d.medial();
        for v in 0..m.num_vertices() {
            let id = d.edge_id(v);
            let ((x0, y0), (x1, y1)) = id.endpoints();
            let on_side = match id.orientation {
                Orientation::Horizontal => y0.abs() == 2,
                Orientation::Vertical => x0.abs() == 2,
            };
            let _ = (x1, y1);
            assert_eq!(m.degree(v), if on_side { 2 } else { 4 });
        }
    }

    #[test]
    fn medial_edge_borders_primal_and_dual_face() {
        let d = Domain::new(2, Scale::UNIT).unwrap();
        let m = d.medial();
        for (a, port, _) in m.edges() {
            let (p, q) = MedialGraph::side_faces(m.position(a), PORT_DIRS[port]);
            assert!(m.face_at(p).unwrap() < d.num_vertices() as u32);
            assert!(m.face_at(q).unwrap() >= d.num_vertices() as u32);
        }
    }

    #[test]
    fn wiring_partial_order() {
        let d = Domain::new(1, Scale::UNIT).unwrap();
        let b = d.boundary_vertices().to_vec();
        let part = BoundarySpec::Partition(vec![vec![b[0], b[1]], vec![b[2], b[3]]]);
        part.validate(&b).unwrap();
        assert!(BoundarySpec::Free.is_finer_than(&part, &b));
        assert!(part.is_finer_than(&BoundarySpec::Wired, &b));
        assert!(!BoundarySpec::Wired.is_finer_than(&part, &b));
        let bad = BoundarySpec::Partition(vec![vec![b[0]], vec![b[0]]]);
        assert!(bad.validate(&b).is_err());
        // the centre vertex is not on the boundary
        assert!(BoundarySpec::Partition(vec![vec![4]]).validate(&b).is_err());
    }

    #[test]
    fn balls() {
        let d = Domain::new(4, Scale::UNIT).unwrap();
        assert_eq!(d.vertices_in_ball((0.0, 0.0), 1.0).len(), 5);
        assert_eq!(d.dual_vertices_in_ball((0.0, 0.0), 0.75).len(), 4);
        assert_eq!(d.vertices_in_box((0, 0), 1).len(), 9);
    }
}

//! Loop representation of a percolation configuration on the medial lattice.
//!
//! At the medial vertex sitting on primal edge `e`, the four incident medial
//! edges are paired so that neither strand crosses `e` when it is open, nor
//! its dual edge when `e` is closed. Strands that would leave the box are
//! joined outside it:
//!
//! * free: the two outer strands next to a boundary vertex are joined around
//!   that vertex (the dual exterior acts as one wired dual vertex);
//! * wired (and partitions): the two outer strands next to an exterior dual
//!   vertex are joined around it (one exterior dual vertex per boundary edge).
//!
//! With these conventions the number of loops is `k(ω) + k(ω*) − 1`.
//!
//! Interiors are not stored as bitmaps. Extraction records the nesting tree of
//! loops and, for each medial face, the innermost loop containing it; `int(ℓ)`
//! is the set of faces whose ancestor chain passes through `ℓ`.

use std::collections::HashMap;

use crate::error::{invalid, Result};
use crate::geometry::{self, diameter_sq};
use crate::lattice::{BoundarySpec, Domain, EdgeGraph, MedialGraph, Orientation, PORT_DIRS};
use crate::sampler::FkConfig;

/// Marker for "no loop".
pub const NONE: u32 = u32::MAX;

/// Partner of `port` at a medial vertex of the given pairing type.
#[inline]
fn partner(type_a: bool, port: usize) -> usize {
    if type_a {
        port ^ 1
    } else {
        3 - port
    }
}

/// True when the strands at medial vertex `e` are {NE–NW, SE–SW}.
#[inline]
pub fn pairing_is_vertical_split(orientation: Orientation, open: bool) -> bool {
    matches!(
        (orientation, open),
        (Orientation::Horizontal, true) | (Orientation::Vertical, false)
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Loop {
    /// Offset into the traversal arrays of the owning [`LoopSet`].
    start: u32,
    len: u32,
    /// Medial edges inside the box traversed by the loop.
    pub medial_edges: u32,
    /// Joins made outside the box.
    pub outer_arcs: u32,
    pub parent: u32,
    pub depth: u32,
}

#[derive(Clone, Debug)]
pub struct LoopSet {
    domain: Domain,
    wired_convention: bool,
    loops: Vec<Loop>,
    /// Medial vertices in traversal order, all loops concatenated.
    trail: Vec<u32>,
    /// Owning loop of each `(medial vertex, port)` slot.
    slot_owner: Vec<u32>,
    /// Innermost loop containing each face.
    face_inner: Vec<u32>,
    /// Loops in an order where parents precede children.
    topo: Vec<u32>,
}

/// Face id of a doubled centre under the given convention; exterior faces that
/// belong to the unbounded region map to the outer face.
fn face_id(m: &MedialGraph<'_>, c: (i32, i32), wired: bool) -> u32 {
    let d = m.domain();
    let n = d.n();
    let outer = m.outer_face();
    if c.0.rem_euclid(2) == 0 {
        return m.face_at(c).unwrap_or(outer);
    }
    let (i, j) = ((c.0 - 1) / 2, (c.1 - 1) / 2);
    let ext_i = i < -n || i >= n;
    let ext_j = j < -n || j >= n;
    if !(ext_i || ext_j) {
        return m.face_at(c).unwrap_or(outer);
    }
    if wired && !(ext_i && ext_j) {
        m.face_at(c).unwrap_or(outer)
    } else {
        outer
    }
}

/// Extracts the loops of `cfg` on the box `d`.
pub fn extract_loops(d: &Domain, cfg: &FkConfig) -> LoopSet {
    let m = d.medial();
    let ne = d.num_edges();
    assert_eq!(cfg.open.len(), ne, "configuration does not match domain");
    let wired = !matches!(cfg.bc, BoundarySpec::Free);
    let n = d.n();

    let mut type_a = Vec::with_capacity(ne);
    let mut pos = Vec::with_capacity(ne);
    for e in 0..ne {
        let id = d.edge_id(e);
        type_a.push(pairing_is_vertical_split(id.orientation, cfg.open[e]));
        pos.push(id.midpoint2());
    }

    // neighbour slot across each port; outer slots are paired by group
    let mut link = vec![NONE; 4 * ne];
    let mut groups: HashMap<(i32, i32), Vec<u32>> = HashMap::new();
    for e in 0..ne {
        for p in 0..4 {
            let (dx, dy) = PORT_DIRS[p];
            let q = (pos[e].0 + dx, pos[e].1 + dy);
            let inside = (q.0.abs() <= 2 * n && q.1.abs() <= 2 * n)
                .then(|| d.edge_at_midpoint(q.0, q.1))
                .flatten();
            match inside {
                Some(e2) => link[4 * e + p] = (4 * e2 + (p + 2) % 4) as u32,
                None => {
                    let (pf, df) = MedialGraph::side_faces(pos[e], (dx, dy));
                    let key = if wired { df } else { pf };
                    groups.entry(key).or_default().push((4 * e + p) as u32);
                }
            }
        }
    }
    let mut is_outer = vec![false; 4 * ne];
    for slots in groups.values() {
        assert_eq!(slots.len(), 2, "outer strands must pair up");
        link[slots[0] as usize] = slots[1];
        link[slots[1] as usize] = slots[0];
        is_outer[slots[0] as usize] = true;
        is_outer[slots[1] as usize] = true;
    }

    let mut slot_owner = vec![NONE; 4 * ne];
    let mut loops = Vec::new();
    let mut trail = Vec::with_capacity(ne * 2);
    for s0 in 0..4 * ne {
        if slot_owner[s0] != NONE {
            continue;
        }
        let id = loops.len() as u32;
        let start = trail.len() as u32;
        let (mut medial_edges, mut outer_arcs) = (0u32, 0u32);
        let mut cur = s0;
        loop {
            let e = cur / 4;
            let out = 4 * e + partner(type_a[e], cur % 4);
            slot_owner[cur] = id;
            slot_owner[out] = id;
            trail.push(e as u32);
            if is_outer[out] {
                outer_arcs += 1;
            } else {
                medial_edges += 1;
            }
            cur = link[out] as usize;
            if cur == s0 {
                break;
            }
        }
        loops.push(Loop {
            start,
            len: trail.len() as u32 - start,
            medial_edges,
            outer_arcs,
            parent: NONE,
            depth: 0,
        });
    }

    // face adjacency across strands, then a search from the outer face
    let nf = m.num_faces();
    let outer = m.outer_face();
    let mut deg = vec![0u32; nf + 1];
    let mut crossings = Vec::with_capacity(2 * ne);
    for e in 0..ne {
        for p in 0..4 {
            let s = 4 * e + p;
            let t = link[s] as usize;
            if s > t {
                continue;
            }
            let (pf, df) = MedialGraph::side_faces(pos[e], PORT_DIRS[p]);
            let (f, g) = if is_outer[s] {
                let inner = if wired { df } else { pf };
                (face_id(&m, inner, wired), outer)
            } else {
                (face_id(&m, pf, wired), face_id(&m, df, wired))
            };
            crossings.push((f, g, slot_owner[s]));
            deg[f as usize] += 1;
            deg[g as usize] += 1;
        }
    }
    if wired {
        // boundary vertices belong to the wired exterior: no strand separates
        // their faces from the unbounded region
        for &v in d.boundary_vertices() {
            crossings.push((v, outer, NONE));
            deg[v as usize] += 1;
            deg[outer as usize] += 1;
        }
    }
    let mut offs = vec![0u32; nf + 1];
    for f in 0..nf {
        offs[f + 1] = offs[f] + deg[f];
    }
    let mut fill = offs.clone();
    let mut adj = vec![(0u32, 0u32); offs[nf] as usize];
    for &(f, g, l) in &crossings {
        adj[fill[f as usize] as usize] = (g, l);
        fill[f as usize] += 1;
        adj[fill[g as usize] as usize] = (f, l);
        fill[g as usize] += 1;
    }
    let mut face_inner = vec![NONE; nf];
    let mut seen = vec![false; nf];
    let mut discovered = vec![false; loops.len()];
    let mut topo = Vec::with_capacity(loops.len());
    let mut queue = std::collections::VecDeque::new();
    seen[outer as usize] = true;
    queue.push_back(outer);
    while let Some(f) = queue.pop_front() {
        let here = face_inner[f as usize];
        for &(g, l) in &adj[offs[f as usize] as usize..offs[f as usize + 1] as usize] {
            if seen[g as usize] {
                continue;
            }
            seen[g as usize] = true;
            let inner = if l == NONE {
                here
            } else if l == here {
                loops[l as usize].parent
            } else {
                if !discovered[l as usize] {
                    discovered[l as usize] = true;
                    loops[l as usize].parent = here;
                    loops[l as usize].depth = if here == NONE {
                        0
                    } else {
                        loops[here as usize].depth + 1
                    };
                    topo.push(l);
                }
                l
            };
            face_inner[g as usize] = inner;
            queue.push_back(g);
        }
    }

    LoopSet {
        domain: d.clone(),
        wired_convention: wired,
        loops,
        trail,
        slot_owner,
        face_inner,
        topo,
    }
}

/// Per-ball classification of one loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LoopBallRelation {
    pub loop_id: u32,
    /// Bit `i` set iff ball `i` lies in `int(ℓ)` and `ℓ` avoids it.
    pub surround: u32,
    /// Bit `i` set iff `ℓ` meets the closed ball `i`.
    pub intersect: u32,
}

impl LoopBallRelation {
    pub fn surround_count(&self) -> u32 {
        self.surround.count_ones()
    }

    pub fn surround_vector(&self, k: usize) -> Vec<u8> {
        (0..k).map(|i| (self.surround >> i & 1) as u8).collect()
    }
}

/// Classification of the loops around a family of disjoint balls.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoopClassification {
    pub n_balls: usize,
    /// Every loop that meets or surrounds at least one ball.
    pub relations: Vec<LoopBallRelation>,
}

impl LoopClassification {
    /// `𝓛_{X,ε}` restricted to loops surrounding at least one ball.
    pub fn avoiding(&self) -> impl Iterator<Item = &LoopBallRelation> {
        self.relations.iter().filter(|r| r.intersect == 0)
    }

    /// `𝓛^odd_{X,ε}`.
    pub fn odd(&self) -> Vec<u32> {
        self.avoiding()
            .filter(|r| r.surround_count() % 2 == 1)
            .map(|r| r.loop_id)
            .collect()
    }

    pub fn surrounding_exactly(&self, k: u32) -> Vec<&LoopBallRelation> {
        self.avoiding().filter(|r| r.surround_count() == k).collect()
    }

    pub fn intersecting(&self) -> Vec<u32> {
        self.relations
            .iter()
            .filter(|r| r.intersect != 0)
            .map(|r| r.loop_id)
            .collect()
    }

    /// For balls ordered `(0, y, x, x+y)`: the sets `𝓛²` and `𝓛²₁`.
    pub fn four_ball_sets(&self) -> (Vec<u32>, Vec<u32>) {
        let two = self.surrounding_exactly(2);
        let l2: Vec<u32> = two.iter().map(|r| r.loop_id).collect();
        let l21: Vec<u32> = two
            .iter()
            .filter(|r| (r.surround & 0b0011).count_ones() == 1)
            .map(|r| r.loop_id)
            .collect();
        (l2, l21)
    }
}

impl LoopSet {
    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.loops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loops.is_empty()
    }

    pub fn loops(&self) -> &[Loop] {
        &self.loops
    }

    pub fn get(&self, l: u32) -> &Loop {
        &self.loops[l as usize]
    }

    pub fn uses_wired_convention(&self) -> bool {
        self.wired_convention
    }

    /// Loops in an order where every loop comes after its parent.
    pub fn topological_order(&self) -> &[u32] {
        &self.topo
    }

    /// Medial vertices visited by loop `l`, in order. A vertex appears twice
    /// when both of its strands belong to `l`.
    pub fn vertices_of(&self, l: u32) -> &[u32] {
        let lp = &self.loops[l as usize];
        &self.trail[lp.start as usize..(lp.start + lp.len) as usize]
    }

    /// Doubled coordinates of the medial vertices of loop `l`.
    pub fn points_of(&self, l: u32) -> Vec<(i32, i32)> {
        self.vertices_of(l)
            .iter()
            .map(|&e| self.domain.edge_id(e as usize).midpoint2())
            .collect()
    }

    /// Loop owning the strand leaving medial vertex `m` through `port`.
    pub fn owner(&self, m: usize, port: usize) -> u32 {
        self.slot_owner[4 * m + port]
    }

    /// Total medial edges inside the box covered by the loops.
    pub fn total_medial_edges(&self) -> usize {
        self.loops.iter().map(|l| l.medial_edges as usize).sum()
    }

    pub fn face_inner(&self, f: u32) -> u32 {
        self.face_inner[f as usize]
    }

    pub fn num_faces(&self) -> usize {
        self.face_inner.len()
    }

    /// Loops containing face `f`, innermost first.
    pub fn chain(&self, f: u32) -> Chain<'_> {
        Chain {
            set: self,
            cur: self.face_inner[f as usize],
        }
    }

    pub fn contains(&self, l: u32, f: u32) -> bool {
        let depth = self.loops[l as usize].depth;
        self.chain(f)
            .find(|&k| self.loops[k as usize].depth <= depth)
            .is_some_and(|k| k == l)
    }

    /// Faces in `int(ℓ)` (bounded faces only).
    pub fn interior_faces(&self, l: u32) -> Vec<u32> {
        (0..self.face_inner.len() as u32)
            .filter(|&f| self.contains(l, f))
            .collect()
    }

    /// Euclidean diameter of the loop's medial vertices, lattice units.
    pub fn diameter(&self, l: u32) -> f64 {
        (diameter_sq(&self.points_of(l)) as f64).sqrt() / 2.0
    }

    /// Face id at a doubled centre, with exterior faces mapped as during
    /// extraction.
    pub fn face_at(&self, c: (i32, i32)) -> u32 {
        face_id(&self.domain.medial(), c, self.wired_convention)
    }

    /// Classifies the loops against balls `B_r(x_i)` (lattice units).
    pub fn classify(&self, centers: &[(f64, f64)], r: f64) -> Result<LoopClassification> {
        check_disjoint(centers, r)?;
        if centers.len() > 32 {
            return invalid("at most 32 balls");
        }
        let mut count: HashMap<u32, Vec<u32>> = HashMap::new();
        let mut totals = Vec::with_capacity(centers.len());
        for (i, &c) in centers.iter().enumerate() {
            let faces = geometry::faces_meeting_disk(c, r);
            totals.push(faces.len() as u32);
            for fc in faces {
                let f = self.face_at(fc);
                for l in self.chain(f) {
                    count.entry(l).or_insert_with(|| vec![0; centers.len()])[i] += 1;
                }
            }
        }
        let mut relations: Vec<LoopBallRelation> = count
            .into_iter()
            .map(|(l, c)| {
                let mut rel = LoopBallRelation {
                    loop_id: l,
                    surround: 0,
                    intersect: 0,
                };
                for (i, &k) in c.iter().enumerate() {
                    if k == totals[i] {
                        rel.surround |= 1 << i;
                    } else if k > 0 {
                        rel.intersect |= 1 << i;
                    }
                }
                // a loop surrounding a ball it also meets cannot happen, but
                // a loop meeting one ball may surround another
                rel
            })
            .collect();
        // loops that meet a ball without containing any of its faces' chains
        // never occur: the faces on both sides of a strand touch the ball
        relations.sort_by_key(|r| r.loop_id);
        Ok(LoopClassification {
            n_balls: centers.len(),
            relations,
        })
    }

    /// Surround vector of loop `l` against balls `B_r(x_i)`.
    pub fn surround_count(&self, l: u32, centers: &[(f64, f64)], r: f64) -> Result<(Vec<u8>, bool)> {
        let cls = self.classify(centers, r)?;
        Ok(match cls.relations.iter().find(|x| x.loop_id == l) {
            Some(rel) => (rel.surround_vector(centers.len()), rel.intersect != 0),
            None => (vec![0; centers.len()], false),
        })
    }

    /// The event that more than `λ/η²` loops of diameter at least `ηε/2` meet
    /// `B_ε(centre)` (lattice units).
    pub fn loop_tail_event(&self, centre: (f64, f64), eps: f64, eta: f64, lambda: f64) -> Result<bool> {
        if !(eta > 0.0 && eta < 1.0) {
            return invalid(format!("eta must lie in (0,1), got {eta}"));
        }
        Ok(self.count_large_loops(centre, eps, eta * eps / 2.0)? as f64 > lambda / (eta * eta))
    }

    /// Number of loops meeting `B_ε(centre)` with diameter at least `dmin`.
    pub fn count_large_loops(&self, centre: (f64, f64), eps: f64, dmin: f64) -> Result<usize> {
        let cls = self.classify(&[centre], eps)?;
        Ok(cls
            .intersecting()
            .into_iter()
            .filter(|&l| self.diameter(l) >= dmin)
            .count())
    }
}

/// Ancestor walk from a face.
pub struct Chain<'a> {
    set: &'a LoopSet,
    cur: u32,
}

impl Iterator for Chain<'_> {
    type Item = u32;

    fn next(&mut self) -> Option<u32> {
        if self.cur == NONE {
            return None;
        }
        let l = self.cur;
        self.cur = self.set.loops[l as usize].parent;
        Some(l)
    }
}

/// Rejects ball families whose members are not at mutual distance `> 2r`.
pub fn check_disjoint(centers: &[(f64, f64)], r: f64) -> Result<()> {
    if !(r > 0.0) {
        return invalid(format!("radius must be positive, got {r}"));
    }
    for i in 0..centers.len() {
        for j in i + 1..centers.len() {
            let d = ((centers[i].0 - centers[j].0).powi(2) + (centers[i].1 - centers[j].1).powi(2)).sqrt();
            if d <= 2.0 * r {
                return invalid(format!("balls {i} and {j} overlap (distance {d}, radius {r})"));
            }
        }
    }
    Ok(())
}

/// `k(ω) + k(ω*) − 1` under the conventions of [`extract_loops`].
pub fn euler_loop_count(d: &Domain, cfg: &FkConfig) -> usize {
    let k = cfg.cluster_count(d);
    let ks = cfg.dual_cluster_count(d);
    k + ks - 1
}

/// Checks the pairing at every medial vertex against `cfg`; returns the number
/// of violations.
pub fn pairing_violations(d: &Domain, cfg: &FkConfig, set: &LoopSet) -> usize {
    let mut bad = 0;
    for e in 0..d.num_edges() {
        let id = d.edge_id(e);
        let a = pairing_is_vertical_split(id.orientation, cfg.open[e]);
        // strands paired at e must stay on one side of the open one of e, e*
        for p in 0..4 {
            let q = partner(a, p);
            let (dp, dq) = (PORT_DIRS[p], PORT_DIRS[q]);
            let crosses_horizontal_line = dp.1 != dq.1;
            let crosses_vertical_line = dp.0 != dq.0;
            let blocked_horizontal = match id.orientation {
                Orientation::Horizontal => cfg.open[e],
                Orientation::Vertical => !cfg.open[e],
            };
            if (blocked_horizontal && crosses_horizontal_line)
                || (!blocked_horizontal && crosses_vertical_line)
            {
                bad += 1;
            }
            if set.owner(e, p) != set.owner(e, q) {
                bad += 1;
            }
        }
    }
    bad
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Scale;
    use crate::sampler::chain_rng;
    use rand::Rng;

    fn boxed(n: u32) -> Domain {
        Domain::new(n, Scale::UNIT).unwrap()
    }

    #[test]
    fn all_closed_small_box() {
        let d = boxed(1);
        let cfg = FkConfig::all_closed(&d, BoundarySpec::Free);
        let set = extract_loops(&d, &cfg);
        assert_eq!(set.len(), 9);
        assert_eq!(euler_loop_count(&d, &cfg), 9);
    }

    #[test]
    fn all_open_small_box() {
        let d = boxed(1);
        let cfg = FkConfig::all_open(&d, BoundarySpec::Free);
        let set = extract_loops(&d, &cfg);
        // one primal cluster, four enclosed dual vertices plus the exterior
        assert_eq!(set.len(), 5);
        assert_eq!(euler_loop_count(&d, &cfg), 5);
    }

    #[test]
    fn euler_identity_exhaustive_n1() {
        let d = boxed(1);
        for bc in [BoundarySpec::Free, BoundarySpec::Wired] {
            for mask in 0u64..1 << 12 {
                let cfg = FkConfig::from_mask(&d, bc.clone(), mask);
                let set = extract_loops(&d, &cfg);
                assert_eq!(set.len(), euler_loop_count(&d, &cfg), "mask {mask} {bc:?}");
                assert_eq!(set.total_medial_edges(), d.medial().num_edges());
                assert_eq!(pairing_violations(&d, &cfg, &set), 0);
            }
        }
    }

    #[test]
    fn euler_identity_random_n2_to_n6() {
        let mut rng = chain_rng(7, 0);
        for n in 2..=6 {
            let d = boxed(n);
            for _ in 0..100 {
                let open: Vec<bool> = (0..d.num_edges()).map(|_| rng.gen_bool(0.5)).collect();
                for bc in [BoundarySpec::Free, BoundarySpec::Wired] {
                    let cfg = FkConfig { open: open.clone(), bc };
                    let set = extract_loops(&d, &cfg);
                    assert_eq!(set.len(), euler_loop_count(&d, &cfg));
                }
            }
        }
    }

    #[test]
    fn every_medial_vertex_used_twice() {
        let d = boxed(2);
        let mut rng = chain_rng(8, 0);
        for _ in 0..200 {
            let open: Vec<bool> = (0..d.num_edges()).map(|_| rng.gen_bool(0.5)).collect();
            let cfg = FkConfig { open, bc: BoundarySpec::Free };
            let set = extract_loops(&d, &cfg);
            let mut uses = vec![0; d.num_edges()];
            for l in 0..set.len() as u32 {
                for &e in set.vertices_of(l) {
                    uses[e as usize] += 1;
                }
            }
            assert!(uses.iter().all(|&u| u == 2));
        }
    }

    #[test]
    fn isolated_vertex_loop_and_heights_of_faces() {
        // all closed: every primal vertex is surrounded by its own loop
        let d = boxed(3);
        let cfg = FkConfig::all_closed(&d, BoundarySpec::Free);
        let set = extract_loops(&d, &cfg);
        let c = set.face_at((0, 0));
        let l = set.face_inner(c);
        assert_ne!(l, NONE);
        assert_eq!(set.interior_faces(l), vec![c]);
        assert_eq!(set.get(l).medial_edges, 4);
        // tiny square far from the balls: zero surround vector
        let (v, hit) = set.surround_count(l, &[(2.0, 2.0)], 0.6).unwrap();
        assert_eq!((v, hit), (vec![0], false));
    }

    #[test]
    fn hand_built_circuit_surrounds_one_ball() {
        // an open circuit of radius 3 around the origin, everything else closed;
        // wired so the exterior is primal
        let d = boxed(6);
        let mut cfg = FkConfig::all_closed(&d, BoundarySpec::Free);
        for e in 0..d.num_edges() {
            let ((x0, y0), (x1, y1)) = d.edge_id(e).endpoints();
            let on = |x: i32, y: i32| x.abs().max(y.abs()) == 3;
            if on(x0, y0) && on(x1, y1) {
                cfg.open[e] = true;
            }
        }
        let set = extract_loops(&d, &cfg);
        let centers = [(0.0, 0.0), (5.0, 5.0)];
        let cls = set.classify(&centers, 1.0).unwrap();
        let odd = cls.odd();
        // the inner side of the circuit and nothing else encloses ball 0 alone
        assert!(!odd.is_empty());
        for l in &odd {
            let (v, hit) = set.surround_count(*l, &centers, 1.0).unwrap();
            assert_eq!(v, vec![1, 0]);
            assert!(!hit);
        }
        assert!(set.classify(&[(0.0, 0.0), (1.5, 0.0)], 1.0).is_err());
    }

    #[test]
    fn interiors_agree_with_winding_numbers() {
        let d = boxed(5);
        let mut rng = chain_rng(9, 0);
        let mut checked = 0;
        for _ in 0..50 {
            let open: Vec<bool> = (0..d.num_edges()).map(|_| rng.gen_bool(0.5)).collect();
            let cfg = FkConfig { open, bc: BoundarySpec::Free };
            let set = extract_loops(&d, &cfg);
            for l in 0..set.len() as u32 {
                if set.get(l).outer_arcs > 0 {
                    continue;
                }
                let poly: Vec<(f64, f64)> = set
                    .points_of(l)
                    .iter()
                    .map(|&(a, b)| (a as f64, b as f64))
                    .collect();
                for f in 0..(set.num_faces() - 1) as u32 {
                    let c = d.medial().face_center(f);
                    let p = (c.0 as f64, c.1 as f64);
                    let wind = geometry::winding_number(&poly, p) != 0;
                    assert_eq!(wind, set.contains(l, f));
                    assert_eq!(wind, geometry::ray_cast_inside(&poly, p));
                }
                checked += 1;
            }
        }
        assert!(checked > 100);
    }

    #[test]
    fn tail_event_edge_cases() {
        let d = boxed(4);
        let cfg = FkConfig::all_open(&d, BoundarySpec::Wired);
        let set = extract_loops(&d, &cfg);
        // all open and wired: only tiny loops around dual vertices
        assert!(set.count_large_loops((0.0, 0.0), 1.0, 0.5).unwrap() > 0);
        assert!(set.loop_tail_event((0.0, 0.0), 1.0, 0.5, 0.0).unwrap());
        assert!(!set.loop_tail_event((0.0, 0.0), 1.0, 0.5, 1e6).unwrap());
        assert!(set.loop_tail_event((0.0, 0.0), 1.0, 1.5, 0.0).is_err());
    }

    #[test]
    fn four_ball_sets_are_exclusive() {
        let d = boxed(12);
        let mut rng = chain_rng(10, 0);
        let centers = [(0.0, 0.0), (0.0, 4.0), (8.0, 0.0), (8.0, 4.0)];
        for _ in 0..300 {
            let open: Vec<bool> = (0..d.num_edges()).map(|_| rng.gen_bool(0.5)).collect();
            let cfg = FkConfig { open, bc: BoundarySpec::Wired };
            let set = extract_loops(&d, &cfg);
            let cls = set.classify(&centers, 1.0).unwrap();
            let (l2, l21) = cls.four_ball_sets();
            assert!(l21.iter().all(|l| l2.contains(l)));
            assert!(l21.is_empty() || l21.len() == l2.len());
        }
    }
}

//! Per-sample measurements and Monte Carlo estimators.
//!
//! Arm events use square boxes `Λ_r = [-r, r]²` (lattice units). A primal arm
//! from `Λ_r` to `∂Λ_R` exists iff some cluster has a vertex of `L∞` norm
//! `≤ r` and one of norm `≥ R`; a dual arm iff some dual cluster has a dual
//! vertex of norm `≤ r + ½` and one of norm `≥ R + ½`. Ball observables use
//! Euclidean balls; a face belongs to a ball when its closed diamond meets the
//! closed disk.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, regime, Error, Result};
use crate::estimator::{Accumulator, EstimatorResult, MIN_BATCHES};
use crate::heightfield;
use crate::lattice::{BoundarySpec, Domain, EdgeGraph, EdgeId};
use crate::loops::{extract_loops, LoopSet};
use crate::sampler::{dual_forest, FkConfig};
use crate::testfn::TestFunction;
use crate::unionfind::UnionFind;

pub use crate::testfn::TestFunction as TestFn;

/// One recorded sample: the chain it came from and the configuration.
pub type Sample<'a> = (u64, &'a FkConfig);

/// Annulus and arm pattern.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArmSpec {
    pub r: u32,
    pub big_r: u32,
    /// Number of arms (`2k` for `π_{2k}`, 1 for `π₁`).
    pub arms: u32,
}

impl ArmSpec {
    pub fn new(r: u32, big_r: u32, arms: u32) -> Result<Self> {
        if r > big_r {
            return invalid(format!("inner radius {r} exceeds outer radius {big_r}"));
        }
        if arms == 0 || (arms > 1 && arms % 2 == 1) {
            return invalid(format!("arm count must be 1 or even, got {arms}"));
        }
        Ok(ArmSpec { r, big_r, arms })
    }

    /// Checks `1 ≤ r ≤ R ≤ N/2`, `N = 2n` the side of the box.
    pub fn validate(&self, d: &Domain) -> Result<()> {
        if self.r < 1 || self.big_r > d.half_width() {
            return regime(format!(
                "arm radii ({}, {}) need 1 <= r <= R <= half-width {}",
                self.r,
                self.big_r,
                d.half_width()
            ));
        }
        Ok(())
    }
}

/// Cluster labels of the primal configuration, wiring included.
pub fn primal_forest(d: &Domain, cfg: &FkConfig) -> UnionFind {
    cfg.cluster_forest(d)
}

/// Doubled `L∞` norm of a dual vertex (an odd integer).
#[inline]
fn dual_norm2(d: &Domain, v: u32) -> i32 {
    let (i, j) = d.dual_coords(v);
    (2 * i + 1).abs().max((2 * j + 1).abs())
}

/// `out[r]`: largest norm over clusters whose smallest norm buckets to `≤ r`.
fn reach(
    labels: &[u32],
    count: usize,
    n: usize,
    norm: impl Fn(u32) -> i32,
    bucket: impl Fn(i32) -> usize,
) -> Vec<i32> {
    let mut lo = vec![i32::MAX; count];
    let mut hi = vec![i32::MIN; count];
    for (v, &l) in labels.iter().enumerate() {
        let k = norm(v as u32);
        let l = l as usize;
        lo[l] = lo[l].min(k);
        hi[l] = hi[l].max(k);
    }
    let mut out = vec![i32::MIN; n + 1];
    for l in 0..count {
        if lo[l] != i32::MAX {
            let a = bucket(lo[l]);
            if a < out.len() {
                out[a] = out[a].max(hi[l]);
            }
        }
    }
    for r in 1..out.len() {
        out[r] = out[r].max(out[r - 1]);
    }
    out
}

/// Radii reached by clusters touching each box `Λ_r`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArmProfile {
    /// `primal[r]`: largest norm of a vertex connected to `Λ_r`.
    pub primal: Vec<i32>,
    /// `dual[r]`: largest doubled norm of a dual vertex dual-connected to a
    /// dual vertex of norm `≤ r + ½`.
    pub dual: Vec<i32>,
}

impl ArmProfile {
    pub fn compute(d: &Domain, cfg: &FkConfig) -> Self {
        Self::from_connectivity(d, &Connectivity::compute(d, cfg))
    }

    pub fn from_connectivity(d: &Domain, conn: &Connectivity) -> Self {
        let n = d.n() as usize;
        let primal = reach(&conn.primal, conn.primal_count, n, |v| d.linf(v), |k| k as usize);
        // bucket a dual cluster by the smallest r with 2r + 1 >= its min norm
        let dual = reach(&conn.dual, conn.dual_count, n, |v| dual_norm2(d, v), |k| ((k - 1) / 2).max(0) as usize);
        ArmProfile { primal, dual }
    }

    /// `Λ_r ↔ ∂Λ_R`.
    pub fn one_arm(&self, r: u32, big_r: u32) -> bool {
        self.primal[r as usize] >= big_r as i32
    }

    /// `Λ_r *↔ Λ_R^c`.
    pub fn dual_arm(&self, r: u32, big_r: u32) -> bool {
        self.dual[r as usize] >= 2 * big_r as i32 + 1
    }

    /// Primal and dual arm.
    pub fn two_arm(&self, r: u32, big_r: u32) -> bool {
        self.one_arm(r, big_r) && self.dual_arm(r, big_r)
    }
}

/// Open crossing of the rectangle `[x0, x1] × [y0, y1]` using its own edges:
/// left to right when `horizontal`, bottom to top otherwise.
pub fn crosses(d: &Domain, cfg: &FkConfig, x0: i32, x1: i32, y0: i32, y1: i32, horizontal: bool) -> bool {
    debug_assert!(d.contains(x0, y0) && d.contains(x1, y1));
    let w = (x1 - x0 + 1) as usize;
    let h = (y1 - y0 + 1) as usize;
    let mut uf = UnionFind::new(w * h + 2);
    let (src, dst) = ((w * h) as u32, (w * h + 1) as u32);
    let idx = |x: i32, y: i32| ((y - y0) as usize * w + (x - x0) as usize) as u32;
    for y in y0..=y1 {
        for x in x0..=x1 {
            if x < x1 && cfg.open[d.edge_index(EdgeId::horizontal(x, y)).unwrap()] {
                uf.union(idx(x, y), idx(x + 1, y));
            }
            if y < y1 && cfg.open[d.edge_index(EdgeId::vertical(x, y)).unwrap()] {
                uf.union(idx(x, y), idx(x, y + 1));
            }
        }
    }
    if horizontal {
        for y in y0..=y1 {
            uf.union(src, idx(x0, y));
            uf.union(dst, idx(x1, y));
        }
    } else {
        for x in x0..=x1 {
            uf.union(src, idx(x, y0));
            uf.union(dst, idx(x, y1));
        }
    }
    uf.same(src, dst)
}

/// Dual crossing of the rectangle whose dual vertices are
/// `(i + ½, j + ½)` for `i ∈ [i0, i1]`, `j ∈ [j0, j1]`.
pub fn dual_crosses(d: &Domain, cfg: &FkConfig, i0: i32, i1: i32, j0: i32, j1: i32, horizontal: bool) -> bool {
    let w = (i1 - i0 + 1) as usize;
    let h = (j1 - j0 + 1) as usize;
    let mut uf = UnionFind::new(w * h + 2);
    let (src, dst) = ((w * h) as u32, (w * h + 1) as u32);
    let idx = |i: i32, j: i32| ((j - j0) as usize * w + (i - i0) as usize) as u32;
    for j in j0..=j1 {
        for i in i0..=i1 {
            // dual edge to the right crosses the vertical primal edge at x = i + 1
            if i < i1 && !cfg.open[d.edge_index(EdgeId::vertical(i + 1, j)).unwrap()] {
                uf.union(idx(i, j), idx(i + 1, j));
            }
            if j < j1 && !cfg.open[d.edge_index(EdgeId::horizontal(i, j + 1)).unwrap()] {
                uf.union(idx(i, j), idx(i, j + 1));
            }
        }
    }
    if horizontal {
        for j in j0..=j1 {
            uf.union(src, idx(i0, j));
            uf.union(dst, idx(i1, j));
        }
    } else {
        for i in i0..=i1 {
            uf.union(src, idx(i, j0));
            uf.union(dst, idx(i, j1));
        }
    }
    uf.same(src, dst)
}

/// Fraction of the eight images of `H(r, r)` under the symmetries of the
/// square (four quadrant squares, two directions each) that are crossed.
pub fn symmetric_crossing_fraction(d: &Domain, cfg: &FkConfig, r: i32) -> f64 {
    let mut hits = 0;
    for &(x0, y0) in &[(0, 0), (-r, 0), (-r, -r), (0, -r)] {
        for horizontal in [true, false] {
            hits += crosses(d, cfg, x0, x0 + r, y0, y0 + r, horizontal) as u32;
        }
    }
    hits as f64 / 8.0
}

/// Open circuit surrounding `Λ_{r1}` inside the annulus `r1 ≤ |z|∞ ≤ r2`:
/// true iff no closed dual path crosses the annulus.
pub fn open_circuit(d: &Domain, cfg: &FkConfig, r1: i32, r2: i32) -> bool {
    open_circuit_at(d, cfg, (0, 0), r1, r2)
}

/// [`open_circuit`] for the annulus centred at `c`.
pub fn open_circuit_at(d: &Domain, cfg: &FkConfig, c: (i32, i32), r1: i32, r2: i32) -> bool {
    assert!(r1 >= 1 && r2 > r1);
    assert!(c.0.abs() + r2 <= d.n() && c.1.abs() + r2 <= d.n());
    // dual vertices (i + 1/2, j + 1/2) relative to c with -r2-1 <= i, j <= r2
    let w = (2 * r2 + 2) as usize;
    let mut uf = UnionFind::new(w * w + 2);
    let (inner, outer) = ((w * w) as u32, (w * w + 1) as u32);
    let idx = |i: i32, j: i32| ((j + r2 + 1) as usize * w + (i + r2 + 1) as usize) as u32;
    let norm = |x: i32, y: i32| x.abs().max(y.abs());
    let ring = |x: i32, y: i32| (r1..=r2).contains(&norm(x, y));
    for y in -r2..=r2 {
        for x in -r2..=r2 {
            if !ring(x, y) {
                continue;
            }
            // horizontal edge (x,y)-(x+1,y) separates dual (x, y-1) and (x, y)
            if x < r2 && ring(x + 1, y) && !cfg.open[d.edge_index(EdgeId::horizontal(c.0 + x, c.1 + y)).unwrap()] {
                uf.union(idx(x, y - 1), idx(x, y));
            }
            // vertical edge (x,y)-(x,y+1) separates dual (x-1, y) and (x, y)
            if y < r2 && ring(x, y + 1) && !cfg.open[d.edge_index(EdgeId::vertical(c.0 + x, c.1 + y)).unwrap()] {
                uf.union(idx(x - 1, y), idx(x, y));
            }
        }
    }
    for j in -r2 - 1..=r2 {
        for i in -r2 - 1..=r2 {
            let k = (2 * i + 1).abs().max((2 * j + 1).abs());
            if k == 2 * r1 - 1 {
                uf.union(inner, idx(i, j));
            } else if k == 2 * r2 + 1 {
                uf.union(outer, idx(i, j));
            }
        }
    }
    !uf.same(inner, outer)
}

/// Horizontal open crossing of `Λ_r(c)` using its own edges.
pub fn box_crossed(d: &Domain, cfg: &FkConfig, c: (i32, i32), r: i32) -> bool {
    crosses(d, cfg, c.0 - r, c.0 + r, c.1 - r, c.1 + r, true)
}

/// Number of distinct open clusters of the annulus `r ≤ |z|∞ ≤ R` (its own
/// edges only) joining its inner and outer boundaries.
pub fn crossing_clusters(d: &Domain, cfg: &FkConfig, r: i32, big_r: i32) -> usize {
    let nv = d.num_vertices();
    let mut uf = UnionFind::new(nv);
    let inside = |x: i32, y: i32| {
        let k = x.abs().max(y.abs());
        k >= r && k <= big_r
    };
    for y in -big_r..=big_r {
        for x in -big_r..=big_r {
            if !inside(x, y) {
                continue;
            }
            if x < big_r && inside(x + 1, y) && cfg.open[d.edge_index(EdgeId::horizontal(x, y)).unwrap()] {
                uf.union(d.vertex_index(x, y), d.vertex_index(x + 1, y));
            }
            if y < big_r && inside(x, y + 1) && cfg.open[d.edge_index(EdgeId::vertical(x, y)).unwrap()] {
                uf.union(d.vertex_index(x, y), d.vertex_index(x, y + 1));
            }
        }
    }
    let mut inner_roots = std::collections::HashSet::new();
    let mut both = std::collections::HashSet::new();
    for v in d.vertices_in_box((0, 0), r) {
        if d.linf(v) == r {
            inner_roots.insert(uf.find(v));
        }
    }
    for v in d.vertices_in_box((0, 0), big_r) {
        if d.linf(v) == big_r {
            let root = uf.find(v);
            if inner_roots.contains(&root) {
                both.insert(root);
            }
        }
    }
    both.len()
}

/// `π_{2k}` event: `π₂` (primal and dual arm) for `k = 1`, at least `k`
/// disjoint crossing clusters of the annulus otherwise.
pub fn two_k_arm_event(d: &Domain, cfg: &FkConfig, profile: Option<&ArmProfile>, spec: &ArmSpec) -> bool {
    let k = spec.arms / 2;
    if k <= 1 {
        match profile {
            Some(p) => p.two_arm(spec.r, spec.big_r),
            None => ArmProfile::compute(d, cfg).two_arm(spec.r, spec.big_r),
        }
    } else {
        crossing_clusters(d, cfg, spec.r as i32, spec.big_r as i32) >= k as usize
    }
}

/// Connection indicators between two Euclidean balls (lattice units): primal
/// (`s = 1`) through vertices in the balls, dual (`s = 0`) through dual
/// vertices in the balls.
#[derive(Clone, Debug)]
pub struct Connectivity {
    primal: Vec<u32>,
    primal_count: usize,
    dual: Vec<u32>,
    dual_count: usize,
}

impl Connectivity {
    pub fn compute(d: &Domain, cfg: &FkConfig) -> Self {
        let (mut primal, primal_count) = primal_forest(d, cfg).labels();
        primal.truncate(d.num_vertices());
        let (dual, dual_count) = dual_forest(d, &cfg.open, &cfg.bc).labels();
        Connectivity {
            primal,
            primal_count,
            dual,
            dual_count,
        }
    }

    pub fn primal_label(&self, v: u32) -> u32 {
        self.primal[v as usize]
    }

    pub fn balls_connected(&self, d: &Domain, a: (f64, f64), b: (f64, f64), eps: f64, primal: bool) -> bool {
        let labels = |c: (f64, f64)| -> std::collections::HashSet<u32> {
            if primal {
                d.vertices_in_ball(c, eps).into_iter().map(|v| self.primal[v as usize]).collect()
            } else {
                d.dual_vertices_in_ball(c, eps).into_iter().map(|v| self.dual[v as usize]).collect()
            }
        };
        let la = labels(a);
        !la.is_disjoint(&labels(b))
    }

    /// Fraction of pairs `(u, u + k·e)` that are connected, over base points
    /// `|u|∞ ≤ window` and the four axis directions.
    pub fn two_point_fraction(&self, d: &Domain, k: i32, window: i32) -> f64 {
        let (mut hit, mut tot) = (0u64, 0u64);
        for y in -window..=window {
            for x in -window..=window {
                let a = self.primal[d.vertex_index(x, y) as usize];
                for (dx, dy) in [(k, 0), (-k, 0), (0, k), (0, -k)] {
                    let b = self.primal[d.vertex_index(x + dx, y + dy) as usize];
                    hit += (a == b) as u64;
                    tot += 1;
                }
            }
        }
        hit as f64 / tot as f64
    }
}

fn finish(acc: &Accumulator) -> Result<EstimatorResult> {
    if acc.is_empty() {
        return Err(Error::InvalidInput("no samples".into()));
    }
    Ok(acc.result(MIN_BATCHES))
}

/// `π₁(r, R) = φ[Λ_r ↔ ∂Λ_R]`.
pub fn estimate_pi1<'a>(d: &Domain, spec: &ArmSpec, samples: impl IntoIterator<Item = Sample<'a>>) -> Result<EstimatorResult> {
    ArmSpec::new(spec.r, spec.big_r, 1)?;
    spec.validate(d)?;
    let mut acc = Accumulator::new();
    for (c, cfg) in samples {
        let p = ArmProfile::compute(d, cfg);
        acc.push(c, p.one_arm(spec.r, spec.big_r) as u8 as f64);
    }
    finish(&acc)
}

/// `π_{2k}(r, R)`; `spec.arms = 2k`.
pub fn estimate_pi2k<'a>(d: &Domain, spec: &ArmSpec, samples: impl IntoIterator<Item = Sample<'a>>) -> Result<EstimatorResult> {
    if spec.arms < 2 {
        return invalid("estimate_pi2k needs an even arm count >= 2");
    }
    spec.validate(d)?;
    let mut acc = Accumulator::new();
    for (c, cfg) in samples {
        acc.push(c, two_k_arm_event(d, cfg, None, spec) as u8 as f64);
    }
    finish(&acc)
}

/// Crossing frequency of `H(r, r)` (averaged over the symmetries of the box)
/// for one family of samples.
pub fn crossing_estimate<'a>(d: &Domain, r: u32, samples: impl IntoIterator<Item = Sample<'a>>) -> Result<EstimatorResult> {
    if r < 1 || r as i32 > d.n() {
        return regime(format!("crossing square side {r} does not fit in the box"));
    }
    let mut acc = Accumulator::new();
    for (c, cfg) in samples {
        acc.push(c, symmetric_crossing_fraction(d, cfg, r as i32));
    }
    finish(&acc)
}

/// `Δ(r, R) = φ¹_{Λ_R}[H(r,r)] − φ⁰_{Λ_R}[H(r,r)]` from independent wired and
/// free families on the same box.
pub fn estimate_delta<'a, 'b>(
    r: u32,
    wired_domain: &Domain,
    wired: impl IntoIterator<Item = Sample<'a>>,
    free_domain: &Domain,
    free: impl IntoIterator<Item = Sample<'b>>,
) -> Result<EstimatorResult> {
    if wired_domain.half_width() != free_domain.half_width() || wired_domain.scale() != free_domain.scale() {
        return invalid("wired and free families live on different domains");
    }
    let w = crossing_estimate(wired_domain, r, wired)?;
    let f = crossing_estimate(free_domain, r, free)?;
    Ok(EstimatorResult::difference(&w, &f))
}

/// Rejects test functions that do not fit well inside the box.
fn check_support(d: &Domain, f: &TestFunction) -> Result<()> {
    let reach = f.reach() / d.scale().as_f64();
    if reach + 1.0 >= d.n() as f64 {
        return regime(format!("test function reaches {reach:.2} lattice steps, box half-width {}", d.n()));
    }
    Ok(())
}

/// Sample mean of `A_F(𝓛)` for mean-zero `F` (physical units).
pub fn estimate_af<'a>(d: &Domain, f: &TestFunction, samples: impl IntoIterator<Item = Sample<'a>>) -> Result<EstimatorResult> {
    if !f.is_mean_zero() {
        return invalid("A_F is estimated for mean-zero F only");
    }
    check_support(d, f)?;
    let mut acc = Accumulator::new();
    for (c, cfg) in samples {
        let set = extract_loops(d, cfg);
        acc.push(c, heightfield::a_f(&set, f)?);
    }
    finish(&acc)
}

fn lattice_balls(d: &Domain, centers: &[(f64, f64)], eps: f64) -> (Vec<(f64, f64)>, f64) {
    let s = d.scale().as_f64();
    (centers.iter().map(|c| (c.0 / s, c.1 / s)).collect(), eps / s)
}

/// `𝓛^odd_{{x,y},ε} = ∅` (physical units).
pub fn tilde_pi1_event(set: &LoopSet, x: (f64, f64), y: (f64, f64), eps: f64) -> Result<bool> {
    let (c, e) = lattice_balls(set.domain(), &[x, y], eps);
    Ok(set.classify(&c, e)?.odd().is_empty())
}

/// `π̃₁(x, y, ε)`.
pub fn estimate_tilde_pi1<'a>(
    d: &Domain,
    x: (f64, f64),
    y: (f64, f64),
    eps: f64,
    samples: impl IntoIterator<Item = Sample<'a>>,
) -> Result<EstimatorResult> {
    TestFunction::dipole(x, y, eps)?;
    check_support(d, &TestFunction::dipole(x, y, eps)?)?;
    let mut acc = Accumulator::new();
    for (c, cfg) in samples {
        let set = extract_loops(d, cfg);
        acc.push(c, tilde_pi1_event(&set, x, y, eps)? as u8 as f64);
    }
    finish(&acc)
}

/// Per-sample values `(1{|𝓛²₁| ≥ 1, 𝓛^odd = ∅}, (−1)^{|𝓛²|} 1{𝓛²₁ = 𝓛^odd = ∅})`
/// for balls at `0, y, x, x + y` shifted by `origin` (physical units).
pub fn tilde_pi2_delta_values(set: &LoopSet, origin: (f64, f64), x: (f64, f64), y: (f64, f64), eps: f64) -> Result<(f64, f64)> {
    let f = TestFunction::four_ball(origin, x, y, eps)?;
    let (c, e) = lattice_balls(set.domain(), &f.centers, eps);
    let cls = set.classify(&c, e)?;
    let odd = cls.odd();
    let (l2, l21) = cls.four_ball_sets();
    if !l21.is_empty() && l2.len() > l21.len() {
        return Err(Error::Aborted(
            "loops surrounding one ball of each pair coexist with loops surrounding a pair".into(),
        ));
    }
    let pi2 = (!l21.is_empty() && odd.is_empty()) as u8 as f64;
    let delta = if l21.is_empty() && odd.is_empty() {
        if l2.len() % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    } else {
        0.0
    };
    Ok((pi2, delta))
}

/// Checks `|x|/16 ≥ |y| ≥ 4ε`.
pub fn check_four_ball_regime(x: (f64, f64), y: (f64, f64), eps: f64) -> Result<()> {
    let nx = x.0.hypot(x.1);
    let ny = y.0.hypot(y.1);
    if !(nx / 16.0 >= ny && ny >= 4.0 * eps) {
        return regime(format!("need |x|/16 >= |y| >= 4 eps, got |x|={nx}, |y|={ny}, eps={eps}"));
    }
    Ok(())
}

/// `(π̃₂, Δ̃)` at `(x, y, ε)`.
pub fn estimate_tilde_pi2_and_delta<'a>(
    d: &Domain,
    x: (f64, f64),
    y: (f64, f64),
    eps: f64,
    samples: impl IntoIterator<Item = Sample<'a>>,
) -> Result<(EstimatorResult, EstimatorResult)> {
    check_four_ball_regime(x, y, eps)?;
    check_support(d, &TestFunction::four_ball((0.0, 0.0), x, y, eps)?)?;
    let mut a = Accumulator::new();
    let mut b = Accumulator::new();
    for (c, cfg) in samples {
        let set = extract_loops(d, cfg);
        let (p, q) = tilde_pi2_delta_values(&set, (0.0, 0.0), x, y, eps)?;
        a.push(c, p);
        b.push(c, q);
    }
    Ok((finish(&a)?, finish(&b)?))
}

/// One sample of the normalisation factor: `None` when some loop avoiding
/// `B_ε(centre)` surrounds it, else `Π cos(∫_{int ℓ} (1/2ε²) 1_{B_ε})`.
/// Lattice units.
pub fn cdelta_value(set: &LoopSet, centre: (f64, f64), eps_lat: f64) -> Result<Option<f64>> {
    let cls = set.classify(&[centre], eps_lat)?;
    if !cls.odd().is_empty() {
        return Ok(None);
    }
    let s = set.domain().scale().as_f64();
    let f = TestFunction::new(vec![(centre.0 * s, centre.1 * s)], vec![1], eps_lat * s)?;
    Ok(Some(heightfield::a_f(set, &f)?))
}

/// Minimum acceptance rate of the conditioning in [`estimate_cdelta`].
pub const MIN_ACCEPTANCE: f64 = 1e-3;

/// `𝐜^δ(ε)` from wired samples on `Λ_R`, with the acceptance rate of the
/// conditioning. `eps` is in physical units.
pub fn estimate_cdelta<'a>(d: &Domain, eps: f64, samples: impl IntoIterator<Item = Sample<'a>>) -> Result<(EstimatorResult, f64)> {
    let eps_lat = eps / d.scale().as_f64();
    if (d.n() as f64) < 32.0 * eps_lat {
        return regime(format!("box half-width {} below 32 eps = {}", d.n(), 32.0 * eps_lat));
    }
    let mut acc = Accumulator::new();
    let (mut seen, mut kept) = (0u64, 0u64);
    for (c, cfg) in samples {
        if !matches!(cfg.bc, BoundarySpec::Wired) {
            return invalid("the normalisation factor is estimated under wired boundary conditions");
        }
        let set = extract_loops(d, cfg);
        seen += 1;
        match cdelta_value(&set, (0.0, 0.0), eps_lat)? {
            Some(v) => {
                kept += 1;
                acc.push_weighted(c, v, 1.0);
            }
            None => acc.push_weighted(c, 0.0, 0.0),
        }
    }
    let rate = kept as f64 / seen.max(1) as f64;
    if rate < MIN_ACCEPTANCE {
        return Err(Error::Aborted(format!(
            "acceptance rate {rate:.2e} below {MIN_ACCEPTANCE:.0e} ({kept} of {seen} samples)"
        )));
    }
    Ok((finish(&acc)?, rate))
}

/// `φ[0 ↔ x]` for `x` at lattice distance `k` along an axis, averaged over
/// translations `|u|∞ ≤ window` and the four axis directions.
pub fn estimate_two_point<'a>(d: &Domain, k: u32, window: u32, samples: impl IntoIterator<Item = Sample<'a>>) -> Result<EstimatorResult> {
    if (k + window) as i32 >= d.n() {
        return regime(format!("distance {k} with window {window} leaves the box"));
    }
    let mut acc = Accumulator::new();
    for (c, cfg) in samples {
        if k == 0 {
            acc.push(c, 1.0);
            continue;
        }
        let conn = Connectivity::compute(d, cfg);
        acc.push(c, conn.two_point_fraction(d, k as i32, window as i32));
    }
    finish(&acc)
}

/// `P[σ_0 = σ_x] − 1/4 = (3/4) φ[0 ↔ x]` for the 4-state Potts model.
pub fn potts_correlation(two_point: &EstimatorResult) -> EstimatorResult {
    let mut r = two_point.clone();
    r.estimate *= 0.75;
    r.stderr *= 0.75;
    for b in r.batches.iter_mut() {
        b.sum *= 0.75;
    }
    r
}

/// `(L(1)∩R(1), L(1)∩R(0))` indicators for balls at `0, y` and `x, x + y`
/// shifted by `origin` (lattice units).
pub fn influence_pair(conn: &Connectivity, d: &Domain, origin: (f64, f64), x: (f64, f64), y: (f64, f64), eps: f64) -> (bool, bool) {
    let at = |v: (f64, f64)| (origin.0 + v.0, origin.1 + v.1);
    let l1 = conn.balls_connected(d, at((0.0, 0.0)), at(y), eps, true);
    let r1 = conn.balls_connected(d, at(x), at((x.0 + y.0, x.1 + y.1)), eps, true);
    let r0 = conn.balls_connected(d, at(x), at((x.0 + y.0, x.1 + y.1)), eps, false);
    (l1 && r1, l1 && r0)
}

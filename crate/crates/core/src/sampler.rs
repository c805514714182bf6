//! Swendsen–Wang dynamics for the random-cluster measure with integer cluster
//! weight, built on the Edwards–Sokal coupling with the Potts model.
//!
//! Random streams: chain `c` of a run with master seed `s` uses
//! `ChaCha8Rng::seed_from_u64(s)` switched to stream `c`. Chains never share
//! a stream, so runs are reproducible regardless of how chains are scheduled.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::lattice::{BoundarySpec, Domain, EdgeGraph};
use crate::unionfind::UnionFind;

/// Edge weight `p` and cluster weight `q`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub p: f64,
    pub q: u32,
}

impl ModelParams {
    /// `p_c = 2/3`, `q = 4`.
    pub const CRITICAL: ModelParams = ModelParams {
        p: 2.0 / 3.0,
        q: 4,
    };

    pub fn new(p: f64, q: u32) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) || q == 0 {
            return invalid(format!("need 0 < p <= 1 and q >= 1, got p={p}, q={q}"));
        }
        Ok(ModelParams { p, q })
    }

    /// Threshold `t` such that `P[u32 < t] = p` up to `2^-32`.
    fn threshold(&self) -> u64 {
        (self.p * 4294967296.0).floor() as u64
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::CRITICAL
    }
}

/// Seeds chain `chain` of a run with master seed `master`.
pub fn chain_rng(master: u64, chain: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(chain);
    rng
}

/// A percolation configuration on a graph, together with its boundary
/// condition. The dual configuration is implicit: a dual edge is open iff its
/// primal edge is closed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FkConfig {
    pub open: Vec<bool>,
    pub bc: BoundarySpec,
}

impl FkConfig {
    pub fn all_closed<G: EdgeGraph>(g: &G, bc: BoundarySpec) -> Self {
        FkConfig {
            open: vec![false; g.num_edges()],
            bc,
        }
    }

    pub fn all_open<G: EdgeGraph>(g: &G, bc: BoundarySpec) -> Self {
        FkConfig {
            open: vec![true; g.num_edges()],
            bc,
        }
    }

    /// Configuration whose open edges are the set bits of `mask`.
    pub fn from_mask<G: EdgeGraph>(g: &G, bc: BoundarySpec, mask: u64) -> Self {
        FkConfig {
            open: (0..g.num_edges()).map(|e| mask >> e & 1 == 1).collect(),
            bc,
        }
    }

    pub fn mask(&self) -> u64 {
        self.open
            .iter()
            .enumerate()
            .fold(0, |m, (e, &o)| m | (o as u64) << e)
    }

    pub fn num_open(&self) -> usize {
        self.open.iter().filter(|&&o| o).count()
    }

    pub fn is_dual_open(&self, e: usize) -> bool {
        !self.open[e]
    }

    /// Union-find over the vertices plus one virtual vertex per wiring group
    /// (index `num_vertices + g`), with open edges and wiring merged.
    pub fn cluster_forest<G: EdgeGraph>(&self, g: &G) -> UnionFind {
        let groups = self.bc.groups(g.boundary_vertices());
        let nv = g.num_vertices();
        let mut uf = UnionFind::new(nv + groups.len());
        join_groups(&mut uf, nv, &groups);
        g.for_each_edge(|e, a, b| {
            if self.open[e] {
                uf.union(a, b);
            }
        });
        uf
    }

    /// `k(ω^ξ)`: clusters after identifying the vertices of each wiring group.
    pub fn cluster_count<G: EdgeGraph>(&self, g: &G) -> usize {
        self.cluster_forest(g).count_sets()
    }

    /// Connected components of the dual configuration on a lattice box. The
    /// exterior ring of dual vertices is counted as one vertex under free bc
    /// and as one vertex per boundary dual edge under wired bc.
    pub fn dual_cluster_count(&self, d: &Domain) -> usize {
        dual_forest(d, &self.open, &self.bc).count_sets()
    }
}

fn join_groups(uf: &mut UnionFind, nv: usize, groups: &[Vec<u32>]) {
    for (i, g) in groups.iter().enumerate() {
        let hub = (nv + i) as u32;
        for &v in g {
            uf.union(hub, v);
        }
    }
}

/// Dual forest used for the loop-count identity. Index layout is that of
/// [`Domain::dual_index`]; under free bc all exterior dual vertices are merged
/// into one, under wired bc the exterior ring is left split (each exterior dual
/// vertex is then its own component unless joined through the box).
pub fn dual_forest(d: &Domain, open: &[bool], bc: &BoundarySpec) -> UnionFind {
    let nd = d.num_dual_vertices();
    let mut uf = UnionFind::new(nd);
    let exterior: Vec<u32> = (0..nd as u32).filter(|&x| d.dual_is_exterior(x)).collect();
    if matches!(bc, BoundarySpec::Free) {
        for w in exterior.windows(2) {
            uf.union(w[0], w[1]);
        }
    }
    for (e, &o) in open.iter().enumerate() {
        if !o {
            let (a, b) = d.dual_endpoints(e);
            uf.union(a, b);
        }
    }
    // under wired bc the corner exterior dual vertices touch no dual edge; they
    // are not faces of the dual graph and are dropped from the count by
    // attaching them to their neighbour on the ring
    if !matches!(bc, BoundarySpec::Free) {
        let n = d.n();
        for &(i, j, ni, nj) in &[
            (-n - 1, -n - 1, -n, -n - 1),
            (n, -n - 1, n - 1, -n - 1),
            (-n - 1, n, -n, n),
            (n, n, n - 1, n),
        ] {
            uf.union(d.dual_index(i, j), d.dual_index(ni, nj));
        }
    }
    uf
}

/// A Potts spin configuration with colours in `1..=q`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PottsConfig {
    pub colors: Vec<u8>,
}

/// Reusable buffers for one chain.
#[derive(Clone, Debug, Default)]
struct Workspace {
    uf: UnionFind,
    root_color: Vec<u8>,
    color: Vec<u8>,
}

impl Workspace {
    /// Colours every cluster of `cfg` uniformly in `0..q`; the cluster holding
    /// the first wiring group gets colour 0.
    fn color_clusters<G: EdgeGraph, R: RngCore>(
        &mut self,
        g: &G,
        cfg: &FkConfig,
        q: u32,
        rng: &mut R,
    ) {
        let nv = g.num_vertices();
        let groups = cfg.bc.groups(g.boundary_vertices());
        let total = nv + groups.len();
        self.uf.reset(total);
        join_groups(&mut self.uf, nv, &groups);
        g.for_each_edge(|e, a, b| {
            if cfg.open[e] {
                self.uf.union(a, b);
            }
        });
        const UNSET: u8 = u8::MAX;
        self.root_color.clear();
        self.root_color.resize(total, UNSET);
        if !groups.is_empty() {
            let r = self.uf.find(nv as u32);
            self.root_color[r as usize] = 0;
        }
        self.color.clear();
        self.color.resize(nv, 0);
        let pow2 = q.is_power_of_two();
        let mut bits = 0u64;
        let mut avail = 0u32;
        let shift = q.trailing_zeros();
        for v in 0..nv as u32 {
            let r = self.uf.find(v) as usize;
            if self.root_color[r] == UNSET {
                let c = if pow2 {
                    if avail < shift {
                        bits = rng.next_u64();
                        avail = 64;
                    }
                    let c = (bits & (q as u64 - 1)) as u8;
                    bits >>= shift;
                    avail -= shift;
                    c
                } else {
                    rng.gen_range(0..q) as u8
                };
                self.root_color[r] = c;
            }
            self.color[v as usize] = self.root_color[r];
        }
    }
}

/// One Swendsen–Wang sweep: colour the clusters of `cfg`, then reopen each
/// monochromatic edge independently with probability `p`.
pub fn es_update<G: EdgeGraph, R: RngCore>(
    g: &G,
    cfg: &mut FkConfig,
    params: ModelParams,
    rng: &mut R,
) {
    let mut ws = Workspace::default();
    sweep_with(&mut ws, g, cfg, params, rng);
}

fn sweep_with<G: EdgeGraph, R: RngCore>(
    ws: &mut Workspace,
    g: &G,
    cfg: &mut FkConfig,
    params: ModelParams,
    rng: &mut R,
) {
    ws.color_clusters(g, cfg, params.q, rng);
    let thr = params.threshold();
    let color = &ws.color;
    let open = &mut cfg.open;
    g.for_each_edge(|e, a, b| {
        open[e] = color[a as usize] == color[b as usize] && (rng.next_u32() as u64) < thr;
    });
}

/// Uniform colouring of the clusters of `cfg` (colours `1..=q`).
pub fn potts_from_fk<G: EdgeGraph, R: RngCore>(
    g: &G,
    cfg: &FkConfig,
    q: u32,
    rng: &mut R,
) -> PottsConfig {
    let mut ws = Workspace::default();
    ws.color_clusters(g, cfg, q, rng);
    // the pinned colour of the wired cluster is itself a uniform draw for the
    // spin marginal, so rotate all colours by a common uniform shift
    let shift = if cfg.bc.groups(g.boundary_vertices()).is_empty() {
        0
    } else {
        rng.gen_range(0..q) as u8
    };
    PottsConfig {
        colors: ws
            .color
            .iter()
            .map(|&c| ((c as u32 + shift as u32) % q) as u8 + 1)
            .collect(),
    }
}

/// Running diagnostics of a chain.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ChainStats {
    pub sweeps: u64,
    pub samples_emitted: u64,
    /// Open-edge fraction after each sweep.
    pub density_trace: Vec<f64>,
}

impl ChainStats {
    /// Integrated autocorrelation time of the open-edge density.
    pub fn tau_int(&self) -> f64 {
        crate::estimator::tau_int(&self.density_trace)
    }
}

/// Default burn-in: `8·N` sweeps.
pub fn default_burn_in(n: u32) -> u64 {
    8 * n as u64
}

/// Default thinning: `N/8` sweeps, at least one.
pub fn default_thin(n: u32) -> u64 {
    (n as u64 / 8).max(1)
}

/// A single Markov chain.
#[derive(Clone, Debug)]
pub struct Chain<'g, G: EdgeGraph> {
    graph: &'g G,
    params: ModelParams,
    cfg: FkConfig,
    rng: ChaCha8Rng,
    ws: Workspace,
    stats: ChainStats,
    track_density: bool,
}

impl<'g, G: EdgeGraph> Chain<'g, G> {
    /// A chain started from the all-closed state.
    pub fn new(graph: &'g G, bc: BoundarySpec, params: ModelParams, master: u64, index: u64) -> Result<Self> {
        bc.validate(graph.boundary_vertices())?;
        Ok(Chain {
            graph,
            params,
            cfg: FkConfig::all_closed(graph, bc),
            rng: chain_rng(master, index),
            ws: Workspace::default(),
            stats: ChainStats::default(),
            track_density: false,
        })
    }

    /// Resumes from a saved state.
    pub fn resume(
        graph: &'g G,
        cfg: FkConfig,
        params: ModelParams,
        rng: ChaCha8Rng,
        stats: ChainStats,
    ) -> Result<Self> {
        if cfg.open.len() != graph.num_edges() {
            return invalid("checkpoint edge count does not match the domain");
        }
        Ok(Chain {
            graph,
            params,
            cfg,
            rng,
            ws: Workspace::default(),
            stats,
            track_density: false,
        })
    }

    pub fn track_density(mut self, on: bool) -> Self {
        self.track_density = on;
        self
    }

    pub fn sweep(&mut self) {
        sweep_with(&mut self.ws, self.graph, &mut self.cfg, self.params, &mut self.rng);
        self.stats.sweeps += 1;
        if self.track_density {
            let d = self.cfg.num_open() as f64 / self.cfg.open.len().max(1) as f64;
            self.stats.density_trace.push(d);
        }
    }

    pub fn run(&mut self, sweeps: u64) {
        for _ in 0..sweeps {
            self.sweep();
        }
    }

    pub fn config(&self) -> &FkConfig {
        &self.cfg
    }

    pub fn rng(&self) -> &ChaCha8Rng {
        &self.rng
    }

    /// Mutable access to the chain's stream, for auxiliary draws such as
    /// loop orientations.
    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn stats(&self) -> &ChainStats {
        &self.stats
    }

    pub fn graph(&self) -> &'g G {
        self.graph
    }

    /// Advances `thin` sweeps and returns the resulting state.
    pub fn next_sample(&mut self, thin: u64) -> &FkConfig {
        self.run(thin);
        self.stats.samples_emitted += 1;
        &self.cfg
    }
}

/// Parameters of [`sample_chain`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainPlan {
    pub burn_in: u64,
    pub n_samples: u64,
    pub thin: u64,
}

impl ChainPlan {
    pub fn new(burn_in: u64, n_samples: u64, thin: u64) -> Result<Self> {
        if burn_in == 0 || thin == 0 {
            return invalid("burn_in and thin must be at least 1");
        }
        Ok(ChainPlan {
            burn_in,
            n_samples,
            thin,
        })
    }

    pub fn defaults(n: u32, n_samples: u64) -> Self {
        ChainPlan {
            burn_in: default_burn_in(n),
            n_samples,
            thin: default_thin(n),
        }
    }
}

/// Iterator over the thinned states of one chain.
pub struct SampleStream<'g, G: EdgeGraph> {
    chain: Chain<'g, G>,
    plan: ChainPlan,
    emitted: u64,
    burnt: bool,
}

impl<G: EdgeGraph> Iterator for SampleStream<'_, G> {
    type Item = FkConfig;

    fn next(&mut self) -> Option<FkConfig> {
        if self.emitted >= self.plan.n_samples {
            return None;
        }
        if !self.burnt {
            self.chain.run(self.plan.burn_in);
            self.burnt = true;
        }
        self.emitted += 1;
        Some(self.chain.next_sample(self.plan.thin).clone())
    }
}

/// Stream of `n_samples` configurations, after `burn_in` sweeps, separated by
/// `thin` sweeps, from chain 0 of master seed `seed`.
pub fn sample_chain<G: EdgeGraph>(
    graph: &G,
    bc: BoundarySpec,
    plan: ChainPlan,
    seed: u64,
) -> Result<SampleStream<'_, G>> {
    let bytes = graph.num_edges() as u128 * plan.n_samples as u128;
    if graph.num_edges() > u32::MAX as usize {
        return Err(Error::Resource(format!("{bytes} edge states requested")));
    }
    ChainPlan::new(plan.burn_in, plan.n_samples, plan.thin)?;
    Ok(SampleStream {
        chain: Chain::new(graph, bc, ModelParams::CRITICAL, seed, 0)?,
        plan,
        emitted: 0,
        burnt: false,
    })
}

/// Largest edge count accepted by [`brute_force_distribution`].
pub const MAX_ENUM_EDGES: usize = 24;

/// Exact law `φ^ξ_{G,p,q}` by enumeration: entry `m` is the probability of the
/// configuration whose open edges are the set bits of `m`.
pub fn brute_force_distribution<G: EdgeGraph>(
    g: &G,
    bc: &BoundarySpec,
    params: ModelParams,
) -> Result<Vec<f64>> {
    let m = g.num_edges();
    if m > MAX_ENUM_EDGES {
        return Err(Error::Resource(format!(
            "enumeration limited to {MAX_ENUM_EDGES} edges, graph has {m}"
        )));
    }
    bc.validate(g.boundary_vertices())?;
    let groups = bc.groups(g.boundary_vertices());
    let nv = g.num_vertices();
    let edges: Vec<(u32, u32)> = (0..m).map(|e| g.endpoints(e)).collect();
    let mut weights = Vec::with_capacity(1 << m);
    let q = params.q as f64;
    let mut uf = UnionFind::new(0);
    // log weights, shifted later, to stay finite for any p
    let (lo, lc) = (params.p.ln(), (1.0 - params.p).ln());
    for mask in 0u64..(1u64 << m) {
        uf.reset(nv + groups.len());
        join_groups(&mut uf, nv, &groups);
        let mut k_open = 0;
        for (e, &(a, b)) in edges.iter().enumerate() {
            if mask >> e & 1 == 1 {
                uf.union(a, b);
                k_open += 1;
            }
        }
        let k = uf.count_sets() as f64;
        let w = if params.p >= 1.0 {
            if k_open == m {
                k * q.ln()
            } else {
                f64::NEG_INFINITY
            }
        } else {
            k_open as f64 * lo + (m - k_open) as f64 * lc + k * q.ln()
        };
        weights.push(w);
    }
    let max = weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for w in weights.iter_mut() {
        *w = (*w - max).exp();
        z += *w;
    }
    for w in weights.iter_mut() {
        *w /= z;
    }
    Ok(weights)
}

/// Exact expectation of `f` under an enumerated law.
pub fn expectation<F: Fn(u64) -> f64>(law: &[f64], f: F) -> f64 {
    law.iter().enumerate().map(|(m, &p)| p * f(m as u64)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Scale, SmallGraph};

    fn single_edge() -> SmallGraph {
        SmallGraph::new(2, vec![(0, 1)], None).unwrap()
    }

    #[test]
    fn single_edge_free_is_one_third() {
        let law = brute_force_distribution(&single_edge(), &BoundarySpec::Free, ModelParams::CRITICAL).unwrap();
        assert!((law[1] - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn single_edge_wired_is_p() {
        let law = brute_force_distribution(&single_edge(), &BoundarySpec::Wired, ModelParams::CRITICAL).unwrap();
        assert!((law[1] - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn q_one_is_bernoulli() {
        let d = Domain::new(1, Scale::UNIT).unwrap();
        let p = ModelParams::new(2.0 / 3.0, 1).unwrap();
        for bc in [BoundarySpec::Free, BoundarySpec::Wired] {
            let law = brute_force_distribution(&d, &bc, p).unwrap();
            for (m, &w) in law.iter().enumerate() {
                let k = (m as u64).count_ones() as i32;
                let exact = (2.0f64 / 3.0).powi(k) * (1.0f64 / 3.0).powi(12 - k);
                assert!((w - exact).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn enumeration_normalised_and_symmetric() {
        let d = Domain::new(1, Scale::UNIT).unwrap();
        let law = brute_force_distribution(&d, &BoundarySpec::Free, ModelParams::CRITICAL).unwrap();
        assert_eq!(law.len(), 1 << 12);
        assert!((law.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let marg: Vec<f64> = (0..12).map(|e| expectation(&law, |m| (m >> e & 1) as f64)).collect();
        // boundary edges and spokes form two orbits under the square's symmetries
        for e in 0..12 {
            let id = d.edge_id(e);
            let ((x0, y0), (x1, y1)) = id.endpoints();
            let spoke = (x0 == 0 && y0 == 0) || (x1 == 0 && y1 == 0);
            let reference = if spoke { marg[d.edge_index(crate::lattice::EdgeId::horizontal(0, 0)).unwrap()] } else { marg[0] };
            assert!((marg[e] - reference).abs() < 1e-13);
        }
    }

    #[test]
    fn refuses_large_graphs() {
        let d = Domain::new(3, Scale::UNIT).unwrap();
        assert!(matches!(
            brute_force_distribution(&d, &BoundarySpec::Free, ModelParams::CRITICAL),
            Err(Error::Resource(_))
        ));
    }

    #[test]
    fn p_one_keeps_all_open() {
        let d = Domain::new(2, Scale::UNIT).unwrap();
        let mut cfg = FkConfig::all_open(&d, BoundarySpec::Free);
        let mut rng = chain_rng(1, 0);
        es_update(&d, &mut cfg, ModelParams::new(1.0, 4).unwrap(), &mut rng);
        assert!(cfg.open.iter().all(|&o| o));
    }

    #[test]
    fn streams_reproducible() {
        let d = Domain::new(1, Scale::UNIT).unwrap();
        let plan = ChainPlan::new(3, 50, 2).unwrap();
        let a: Vec<_> = sample_chain(&d, BoundarySpec::Free, plan, 9).unwrap().collect();
        let b: Vec<_> = sample_chain(&d, BoundarySpec::Free, plan, 9).unwrap().collect();
        assert_eq!(a, b);
        let empty = ChainPlan { n_samples: 0, ..plan };
        assert_eq!(sample_chain(&d, BoundarySpec::Free, empty, 9).unwrap().count(), 0);
        assert!(ChainPlan::new(0, 1, 1).is_err());
    }

    #[test]
    fn wired_has_more_open_edges() {
        let d = Domain::new(1, Scale::UNIT).unwrap();
        let mean = |bc: &BoundarySpec| {
            let law = brute_force_distribution(&d, bc, ModelParams::CRITICAL).unwrap();
            expectation(&law, |m| m.count_ones() as f64)
        };
        let (ef, ew) = (mean(&BoundarySpec::Free), mean(&BoundarySpec::Wired));
        assert!(ew > ef);
        let plan = ChainPlan::new(10, 20000, 1).unwrap();
        let emp = |bc: BoundarySpec| {
            let s: usize = sample_chain(&d, bc, plan, 3).unwrap().map(|c| c.num_open()).sum();
            s as f64 / 20000.0
        };
        let (sf, sw) = (emp(BoundarySpec::Free), emp(BoundarySpec::Wired));
        assert!((sf - ef).abs() < 0.1, "{sf} vs {ef}");
        assert!((sw - ew).abs() < 0.1, "{sw} vs {ew}");
        assert!(sw > sf);
    }

    #[test]
    fn potts_colouring_edge_cases() {
        let d = Domain::new(2, Scale::UNIT).unwrap();
        let mut rng = chain_rng(4, 1);
        let open = FkConfig::all_open(&d, BoundarySpec::Free);
        let s = potts_from_fk(&d, &open, 4, &mut rng);
        assert!(s.colors.iter().all(|&c| c == s.colors[0]));
        let g = single_edge();
        let one = FkConfig::all_open(&g, BoundarySpec::Free);
        for _ in 0..100 {
            let s = potts_from_fk(&g, &one, 4, &mut rng);
            assert_eq!(s.colors[0], s.colors[1]);
        }
        // closed: independent uniform colours
        let closed = FkConfig::all_closed(&d, BoundarySpec::Free);
        let mut counts = [0usize; 4];
        for _ in 0..2000 {
            for c in potts_from_fk(&d, &closed, 4, &mut rng).colors {
                counts[c as usize - 1] += 1;
            }
        }
        let total: usize = counts.iter().sum();
        for c in counts {
            assert!((c as f64 / total as f64 - 0.25).abs() < 0.01);
        }
    }

    #[test]
    fn partition_groups_get_independent_colours() {
        let g = SmallGraph::new(2, vec![(0, 1)], None).unwrap();
        let bc = BoundarySpec::Partition(vec![vec![0], vec![1]]);
        // singleton groups are no wiring at all
        let law = brute_force_distribution(&g, &bc, ModelParams::CRITICAL).unwrap();
        assert!((law[1] - 1.0 / 3.0).abs() < 1e-14);
        let grid = SmallGraph::grid(2, 3);
        let b = grid.boundary_vertices().to_vec();
        let bc = BoundarySpec::Partition(vec![vec![b[0], b[1]], vec![b[4], b[5]]]);
        let law = brute_force_distribution(&grid, &bc, ModelParams::CRITICAL).unwrap();
        let exact = expectation(&law, |m| m.count_ones() as f64);
        let mut chain = Chain::new(&grid, bc, ModelParams::CRITICAL, 5, 0).unwrap();
        chain.run(10);
        let n = 100_000;
        let mut s = 0usize;
        for _ in 0..n {
            s += chain.next_sample(1).num_open();
        }
        assert!((s as f64 / n as f64 - exact).abs() < 0.03);
    }
}

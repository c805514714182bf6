//! Standard measurement campaigns: chain fan-out, per-sample measurements,
//! checkpointing and aggregation.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::analysis::{QuasiMultTriple, ScalingSeries};
use crate::error::{invalid, Error, Result};
use crate::estimator::{Accumulator, EstimatorResult, MIN_BATCHES};
use crate::heightfield;
use crate::lattice::{BoundarySpec, Domain, EdgeGraph};
use crate::loops::extract_loops;
use crate::observables::{
    box_crossed, cdelta_value, crosses, dual_crosses, influence_pair, symmetric_crossing_fraction,
    tilde_pi2_delta_values, ArmProfile, Connectivity, MIN_ACCEPTANCE,
};
use crate::sampler::{Chain, ChainStats, FkConfig, ModelParams};
use crate::testfn::TestFunction;

/// Chains, burn-in and sampling schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunPlan {
    pub chains: u32,
    pub burn_in: u64,
    /// Recorded samples per chain.
    pub samples: u64,
    /// Sweeps between recorded samples.
    pub thin: u64,
    pub seed: u64,
}

impl RunPlan {
    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 || self.samples == 0 || self.thin == 0 {
            return invalid("chains, samples and thin must be positive");
        }
        Ok(())
    }

    pub fn total_sweeps(&self) -> u64 {
        self.chains as u64 * (self.burn_in + self.samples * self.thin)
    }
}

/// Named accumulators and counters filled by one chain.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub acc: BTreeMap<String, Accumulator>,
    pub counters: BTreeMap<String, u64>,
}

impl Tally {
    pub fn push(&mut self, key: &str, chain: u64, value: f64) {
        self.acc.entry(key.to_string()).or_default().push(chain, value);
    }

    pub fn push_weighted(&mut self, key: &str, chain: u64, value: f64, weight: f64) {
        self.acc.entry(key.to_string()).or_default().push_weighted(chain, value, weight);
    }

    pub fn count(&mut self, key: &str, by: u64) {
        *self.counters.entry(key.to_string()).or_default() += by;
    }

    pub fn counter(&self, key: &str) -> u64 {
        self.counters.get(key).copied().unwrap_or(0)
    }

    pub fn merge(mut self, other: Tally) -> Tally {
        for (k, a) in other.acc {
            let cur = self.acc.remove(&k).unwrap_or_default();
            self.acc.insert(k, cur.merge(a));
        }
        for (k, c) in other.counters {
            *self.counters.entry(k).or_default() += c;
        }
        self
    }

    pub fn result(&self, key: &str) -> Result<EstimatorResult> {
        match self.acc.get(key) {
            Some(a) if !a.is_empty() => Ok(a.result(MIN_BATCHES)),
            _ => Err(Error::InvalidInput(format!("no samples recorded for {key}"))),
        }
    }

    /// Deviation `φ[A∩B]/(φ[A]φ[B]) − 1` with a jackknife error over the
    /// common batches of the three accumulators.
    pub fn mixing_deviation(&self, a: &str, b: &str, ab: &str) -> Result<(f64, f64)> {
        let (ra, rb, rab) = (self.result(a)?, self.result(b)?, self.result(ab)?);
        Ok(jackknife_ratio(&ra, &rb, &rab))
    }
}

fn jackknife_ratio(a: &EstimatorResult, b: &EstimatorResult, ab: &EstimatorResult) -> (f64, f64) {
    let f = |pa: f64, pb: f64, pab: f64| pab / (pa * pb) - 1.0;
    let full = f(a.estimate, b.estimate, ab.estimate);
    let k = a.batches.len().min(b.batches.len()).min(ab.batches.len());
    if k < 2 {
        return (full, f64::NAN);
    }
    let tot = |r: &EstimatorResult| {
        r.batches[..k]
            .iter()
            .fold((0.0, 0.0), |(s, w), x| (s + x.sum, w + x.weight))
    };
    let (ta, tb, tab) = (tot(a), tot(b), tot(ab));
    let loo = |r: &EstimatorResult, t: (f64, f64), i: usize| (t.0 - r.batches[i].sum) / (t.1 - r.batches[i].weight);
    let vals: Vec<f64> = (0..k).map(|i| f(loo(a, ta, i), loo(b, tb, i), loo(ab, tab, i))).collect();
    let m = vals.iter().sum::<f64>() / k as f64;
    let var = (k - 1) as f64 / k as f64 * vals.iter().map(|v| (v - m).powi(2)).sum::<f64>();
    (full, var.sqrt())
}

/// Saved state of one chain.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainCheckpoint<M> {
    pub key: String,
    pub chain: u64,
    pub samples_done: u64,
    pub burned_in: bool,
    pub open: String,
    pub rng: ChaCha8Rng,
    pub stats: ChainStats,
    pub state: M,
}

/// Where and how often chains save their state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckpointStore {
    pub dir: PathBuf,
    /// Save after every `every` recorded samples.
    pub every: u64,
    /// Identifies the campaign (a config hash); stale files are ignored.
    pub key: String,
}

fn pack_bits(v: &[bool]) -> String {
    let mut bytes = vec![0u8; v.len().div_ceil(8)];
    for (i, &b) in v.iter().enumerate() {
        if b {
            bytes[i / 8] |= 1 << (i % 8);
        }
    }
    hex::encode(bytes)
}

fn unpack_bits(s: &str, n: usize) -> Result<Vec<bool>> {
    let bytes = hex::decode(s).map_err(|e| Error::InvalidInput(e.to_string()))?;
    if bytes.len() != n.div_ceil(8) {
        return invalid("checkpoint configuration has the wrong length");
    }
    Ok((0..n).map(|i| bytes[i / 8] >> (i % 8) & 1 == 1).collect())
}

impl CheckpointStore {
    fn path(&self, chain: u64) -> PathBuf {
        self.dir.join(format!("chain-{chain:04}.json"))
    }

    fn load<M: DeserializeOwned>(&self, chain: u64) -> Option<ChainCheckpoint<M>> {
        let text = fs::read_to_string(self.path(chain)).ok()?;
        let ck: ChainCheckpoint<M> = serde_json::from_str(&text).ok()?;
        (ck.key == self.key && ck.chain == chain).then_some(ck)
    }

    fn save<M: Serialize>(&self, ck: &ChainCheckpoint<M>) -> Result<()> {
        fs::create_dir_all(&self.dir)?;
        let tmp = self.dir.join(format!(".chain-{:04}.tmp", ck.chain));
        fs::write(&tmp, serde_json::to_vec(ck).map_err(|e| Error::InvalidInput(e.to_string()))?)?;
        fs::rename(&tmp, self.path(ck.chain))?;
        Ok(())
    }

    /// Removes every checkpoint file of the store.
    pub fn clear(&self) -> Result<()> {
        if self.dir.exists() {
            for entry in fs::read_dir(&self.dir)? {
                let p = entry?.path();
                if p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("chain-")) {
                    fs::remove_file(p)?;
                }
            }
        }
        Ok(())
    }
}

/// Runs `plan.chains` chains in parallel on the current rayon pool. Each
/// chain starts from `init()` and calls `measure` on every recorded sample.
pub fn run_chains<G, M, I, F>(
    d: &G,
    bc: &BoundarySpec,
    plan: &RunPlan,
    checkpoint: Option<&CheckpointStore>,
    init: I,
    measure: F,
) -> Result<Vec<M>>
where
    G: EdgeGraph,
    M: Send + Serialize + DeserializeOwned,
    I: Fn() -> M + Sync,
    F: Fn(&mut M, u64, &FkConfig, &mut ChaCha8Rng) -> Result<()> + Sync,
{
    plan.validate()?;
    (0..plan.chains as u64)
        .into_par_iter()
        .map(|c| {
            let resumed = checkpoint.and_then(|s| s.load::<M>(c));
            let (mut chain, mut state, mut done, burned) = match resumed {
                Some(ck) => {
                    let open = unpack_bits(&ck.open, d.num_edges())?;
                    let cfg = FkConfig { open, bc: bc.clone() };
                    let chain = Chain::resume(d, cfg, ModelParams::CRITICAL, ck.rng, ck.stats)?;
                    (chain, ck.state, ck.samples_done, ck.burned_in)
                }
                None => (Chain::new(d, bc.clone(), ModelParams::CRITICAL, plan.seed, c)?, init(), 0, false),
            };
            if !burned {
                chain.run(plan.burn_in);
            }
            while done < plan.samples {
                chain.run(plan.thin);
                let cfg = chain.config().clone();
                measure(&mut state, c, &cfg, chain.rng_mut())?;
                done += 1;
                if let Some(s) = checkpoint {
                    if done % s.every == 0 && done < plan.samples {
                        s.save(&ChainCheckpoint {
                            key: s.key.clone(),
                            chain: c,
                            samples_done: done,
                            burned_in: true,
                            open: pack_bits(&chain.config().open),
                            rng: chain.rng().clone(),
                            stats: chain.stats().clone(),
                            state: &state,
                        })?;
                    }
                }
            }
            Ok(state)
        })
        .collect()
}

fn merge_all(v: Vec<Tally>) -> Tally {
    v.into_iter().fold(Tally::default(), Tally::merge)
}

/// Mixing events: `A` = both crossings of `Λ_r(c)`, `B` = left-right crossing
/// of the `R × R` square just right of `Λ_R(c)`, see [`outer_event`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingSpec {
    pub big_r: u32,
    pub inner: Vec<u32>,
    /// Each class is a set of centres with the same law.
    pub classes: Vec<Vec<(i32, i32)>>,
}

/// Influence events for balls at `o, o + y` and `o + x, o + x + y` (lattice
/// units).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfluenceSpec {
    pub eps: f64,
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub origins: Vec<(f64, f64)>,
}

/// Arm, crossing, two-point, mixing and influence measurements on one box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmCampaignSpec {
    pub n: u32,
    pub bc: BoundarySpec,
    pub plan: RunPlan,
    /// Radii at which arm events `π(r, R)` are recorded for every pair `r < R`.
    pub radii: Vec<u32>,
    /// Side lengths of the crossed squares `[0, r]²`.
    pub crossings: Vec<u32>,
    pub two_point: Vec<u32>,
    pub window: u32,
    pub mixing: Option<MixingSpec>,
    pub influence: Option<InfluenceSpec>,
    /// Side `m` of the `2m × m` rectangles of the self-duality check.
    pub self_dual: Option<u32>,
    /// Samples the torus obtained by joining opposite sides of the box; `bc`
    /// must then be free. Observables only see the box edges.
    #[serde(default)]
    pub periodic: bool,
}

impl ArmCampaignSpec {
    pub fn label(&self) -> &'static str {
        if self.periodic {
            "periodic"
        } else {
            self.bc.label()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.plan.validate()?;
        let n = self.n as i32;
        if self.periodic && !matches!(self.bc, BoundarySpec::Free) {
            return invalid("a periodic campaign takes bc = free");
        }
        if self.radii.iter().any(|&r| r == 0 || r > self.n) {
            return invalid("arm radii must lie in 1..=n");
        }
        if self.crossings.iter().any(|&r| r == 0 || r > self.n) {
            return invalid("crossing squares must fit in the box");
        }
        if self.two_point.iter().any(|&k| (k + self.window) as i32 >= n) {
            return invalid("two-point distances leave the box");
        }
        if let Some(m) = &self.mixing {
            let big = m.big_r as i32;
            for c in m.classes.iter().flatten() {
                if c.0 - big < -n || c.0 + 2 * big + 1 > n || c.1.abs() + big > n {
                    return invalid("mixing events leave the box");
                }
            }
            if m.inner.iter().any(|&r| r == 0 || 2 * r > m.big_r) {
                return invalid("mixing needs 1 <= r <= R/2");
            }
        }
        if let Some(m) = self.self_dual {
            if 2 * m as i32 + 1 > n {
                return invalid("self-duality rectangle leaves the box");
            }
        }
        Ok(())
    }
}

pub fn pi1_key(r: u32, big_r: u32) -> String {
    format!("pi1/{r}/{big_r}")
}
pub fn pi2_key(r: u32, big_r: u32) -> String {
    format!("pi2/{r}/{big_r}")
}
pub fn crossing_key(r: u32) -> String {
    format!("cross/{r}")
}
pub fn two_point_key(k: u32) -> String {
    format!("two_point/{k}")
}
pub fn mixing_keys(class: usize, r: u32) -> [String; 3] {
    [
        format!("mix/{class}/A/{r}"),
        format!("mix/{class}/B"),
        format!("mix/{class}/AB/{r}"),
    ]
}

/// Left-right crossing of `[c.x + R + 1, c.x + 2R + 1] × [c.y - R/2, c.y + R/2]`,
/// an event outside `Λ_R(c)`.
pub fn outer_event(d: &Domain, cfg: &FkConfig, c: (i32, i32), big_r: i32) -> bool {
    let h = big_r / 2;
    crosses(d, cfg, c.0 + big_r + 1, c.0 + 2 * big_r + 1, c.1 - h, c.1 + h, true)
}

/// Records every observable of `spec` for one sample.
pub fn measure_arms(spec: &ArmCampaignSpec, d: &Domain, t: &mut Tally, c: u64, cfg: &FkConfig) {
    let conn = Connectivity::compute(d, cfg);
    let prof = ArmProfile::from_connectivity(d, &conn);
    for (i, &r) in spec.radii.iter().enumerate() {
        for &big in &spec.radii[i + 1..] {
            t.push(&pi1_key(r, big), c, prof.one_arm(r, big) as u8 as f64);
            t.push(&pi2_key(r, big), c, prof.two_arm(r, big) as u8 as f64);
        }
    }
    for &r in &spec.crossings {
        t.push(&crossing_key(r), c, symmetric_crossing_fraction(d, cfg, r as i32));
    }
    for &k in &spec.two_point {
        t.push(&two_point_key(k), c, conn.two_point_fraction(d, k as i32, spec.window as i32));
    }
    if let Some(m) = &spec.mixing {
        for (ci, class) in m.classes.iter().enumerate() {
            let big = m.big_r as i32;
            let b: Vec<bool> = class.iter().map(|&z| outer_event(d, cfg, z, big)).collect();
            let k = class.len() as f64;
            let bmean = b.iter().filter(|&&x| x).count() as f64 / k;
            for &r in &m.inner {
                let [ka, kb, kab] = mixing_keys(ci, r);
                let (mut sa, mut sab) = (0.0, 0.0);
                for (j, &z) in class.iter().enumerate() {
                    let ri = r as i32;
                    let a = box_crossed(d, cfg, z, ri) && crosses(d, cfg, z.0 - ri, z.0 + ri, z.1 - ri, z.1 + ri, false);
                    sa += a as u8 as f64;
                    sab += (a && b[j]) as u8 as f64;
                }
                t.push(&ka, c, sa / k);
                t.push(&kab, c, sab / k);
                if r == m.inner[0] {
                    t.push(&kb, c, bmean);
                }
            }
        }
    }
    if let Some(f) = &spec.influence {
        let (mut s11, mut s10) = (0.0, 0.0);
        for &o in &f.origins {
            let (a, b) = influence_pair(&conn, d, o, f.x, f.y, f.eps);
            s11 += a as u8 as f64;
            s10 += b as u8 as f64;
        }
        let k = f.origins.len() as f64;
        t.push("influence/L1R1", c, s11 / k);
        t.push("influence/L1R0", c, s10 / k);
        t.push("influence/diff", c, (s11 - s10) / k);
    }
    if let Some(m) = self_dual_side(spec) {
        // primal left-right crossing of [-m, m] × [-m/2, m/2] against the dual
        // left-right crossing of the same shape shifted by (1/2, 1/2)
        let h = m / 2;
        let p = crosses(d, cfg, -m, m, -h, h, true);
        let q = dual_crosses(d, cfg, -m, m, -h - 1, h - 1, true);
        t.push("selfdual/primal", c, p as u8 as f64);
        t.push("selfdual/dual", c, q as u8 as f64);
    }
    t.push("density", c, cfg.num_open() as f64 / cfg.open.len() as f64);
}

fn self_dual_side(spec: &ArmCampaignSpec) -> Option<i32> {
    spec.self_dual.map(|m| m as i32)
}

/// Aggregated output of an arm campaign for one boundary condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmCampaignResult {
    pub spec: ArmCampaignSpec,
    pub tally: Tally,
}

impl ArmCampaignResult {
    pub fn pi1(&self, r: u32, big_r: u32) -> Result<EstimatorResult> {
        self.tally.result(&pi1_key(r, big_r))
    }
    pub fn pi2(&self, r: u32, big_r: u32) -> Result<EstimatorResult> {
        self.tally.result(&pi2_key(r, big_r))
    }
    pub fn crossing(&self, r: u32) -> Result<EstimatorResult> {
        self.tally.result(&crossing_key(r))
    }
    pub fn two_point(&self, k: u32) -> Result<EstimatorResult> {
        self.tally.result(&two_point_key(k))
    }
    /// Mixing deviation per inner radius for one centre class.
    pub fn mixing(&self, class: usize) -> Result<Vec<(u32, f64, f64)>> {
        let m = self
            .spec
            .mixing
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("campaign has no mixing events".into()))?;
        m.inner
            .iter()
            .map(|&r| {
                let [a, b, ab] = mixing_keys(class, r);
                let (v, e) = self.tally.mixing_deviation(&a, &b, &ab)?;
                Ok((r, v, e))
            })
            .collect()
    }
}

pub fn run_arm_campaign(spec: &ArmCampaignSpec, checkpoint: Option<&CheckpointStore>) -> Result<ArmCampaignResult> {
    spec.validate()?;
    let d = Domain::new(spec.n, crate::lattice::Scale::UNIT)?;
    let parts = if spec.periodic {
        let torus = d.periodic_graph();
        let m = d.num_edges();
        run_chains(&torus, &spec.bc, &spec.plan, checkpoint, Tally::default, |t, c, cfg, _| {
            let inner = FkConfig {
                open: cfg.open[..m].to_vec(),
                bc: BoundarySpec::Free,
            };
            measure_arms(spec, &d, t, c, &inner);
            Ok(())
        })?
    } else {
        run_chains(&d, &spec.bc, &spec.plan, checkpoint, Tally::default, |t, c, cfg, _| {
            measure_arms(spec, &d, t, c, cfg);
            Ok(())
        })?
    };
    Ok(ArmCampaignResult {
        spec: spec.clone(),
        tally: merge_all(parts),
    })
}

fn bc_label(results: &[&ArmCampaignResult]) -> String {
    match results {
        [one] => one.spec.label().to_string(),
        _ => "avg".to_string(),
    }
}

/// `½(φ⁰ + φ¹)` when two estimates are given, the estimate itself for one.
pub fn bc_average(parts: &[EstimatorResult]) -> Result<EstimatorResult> {
    match parts {
        [a] => Ok(a.clone()),
        [a, b] => Ok(EstimatorResult::mean_of(a, b)),
        _ => invalid("expected one or two boundary conditions"),
    }
}

fn same_box(results: &[&ArmCampaignResult]) -> Result<u32> {
    let n = results.first().ok_or_else(|| Error::InvalidInput("no campaign results".into()))?.spec.n;
    if results.iter().any(|r| r.spec.n != n) {
        return invalid("campaign results on different boxes");
    }
    Ok(n)
}

/// `π(r, R)` with `R` the largest recorded radius, over the smaller radii,
/// at scale `R/r`.
pub fn arm_series(results: &[&ArmCampaignResult], arms: u32) -> Result<ScalingSeries> {
    let n = same_box(results)?;
    let radii = &results[0].spec.radii;
    let big = radii.iter().copied().max().unwrap_or(0);
    let name = if arms == 1 { "pi1" } else { "pi2" };
    let mut s = ScalingSeries::new(name, 2 * n, 1.0, bc_label(results));
    for &r in radii.iter().filter(|&&r| r < big) {
        let parts = results
            .iter()
            .map(|c| if arms == 1 { c.pi1(r, big) } else { c.pi2(r, big) })
            .collect::<Result<Vec<_>>>()?;
        s.push_ratio(r as f64 / big as f64, bc_average(&parts)?);
    }
    Ok(s)
}

/// `Δ(r, n)` over the crossing sides `r`, at scale `n/r`.
pub fn delta_series(wired: &ArmCampaignResult, free: &ArmCampaignResult) -> Result<ScalingSeries> {
    if !matches!(wired.spec.bc, BoundarySpec::Wired) || !matches!(free.spec.bc, BoundarySpec::Free) {
        return invalid("delta needs a wired and a free campaign");
    }
    let n = same_box(&[wired, free])?;
    let mut s = ScalingSeries::new("delta", 2 * n, 1.0, "wired-free");
    for &r in &wired.spec.crossings {
        let d = EstimatorResult::difference(&wired.crossing(r)?, &free.crossing(r)?);
        s.push_ratio(r as f64 / n as f64, d);
    }
    Ok(s)
}

/// `φ[0 ↔ x]` over the recorded distances, at scale `|x|`.
pub fn two_point_series(results: &[&ArmCampaignResult]) -> Result<ScalingSeries> {
    let n = same_box(results)?;
    let mut s = ScalingSeries::new("two_point", 2 * n, 1.0, bc_label(results));
    for &k in &results[0].spec.two_point {
        let parts = results.iter().map(|c| c.two_point(k)).collect::<Result<Vec<_>>>()?;
        s.push(k as f64, bc_average(&parts)?);
    }
    Ok(s)
}

/// Every triple `r < ρ < R` of recorded radii.
pub fn quasi_mult_triples(results: &[&ArmCampaignResult], arms: u32) -> Result<Vec<QuasiMultTriple>> {
    same_box(results)?;
    let radii = &results[0].spec.radii;
    let get = |r: u32, big: u32| -> Result<EstimatorResult> {
        let parts = results
            .iter()
            .map(|c| if arms == 1 { c.pi1(r, big) } else { c.pi2(r, big) })
            .collect::<Result<Vec<_>>>()?;
        bc_average(&parts)
    };
    let mut out = Vec::new();
    for (i, &r) in radii.iter().enumerate() {
        for (j, &rho) in radii.iter().enumerate().skip(i + 1) {
            for &big in &radii[j + 1..] {
                out.push(QuasiMultTriple {
                    r,
                    rho,
                    big_r: big,
                    inner: get(r, rho)?,
                    outer: get(rho, big)?,
                    whole: get(r, big)?,
                });
            }
        }
    }
    Ok(out)
}

/// Triples `Δ(r, R)` against `Δ(r, ρ) Δ(ρ, R)`, where `Δ(r, n)` is the
/// wired-minus-free crossing probability of the side-`r` square in the box of
/// half-width `n`. `boxes` holds one (wired, free) pair per box; every
/// crossing side of a smaller box that is also recorded in a larger one
/// gives a triple, with `ρ` the smaller half-width.
pub fn delta_quasi_mult_triples(boxes: &[(&ArmCampaignResult, &ArmCampaignResult)]) -> Result<Vec<QuasiMultTriple>> {
    let mut by_n: BTreeMap<u32, BTreeMap<u32, EstimatorResult>> = BTreeMap::new();
    for &(w, f) in boxes {
        let s = delta_series(w, f)?;
        let row = by_n.entry(w.spec.n).or_default();
        for (&r, p) in w.spec.crossings.iter().zip(&s.points) {
            row.insert(r, p.estimate.clone());
        }
    }
    let mut out = Vec::new();
    for (&rho, small) in &by_n {
        for (&big, large) in by_n.range(rho + 1..) {
            let Some(outer) = large.get(&rho) else { continue };
            for (&r, inner) in small.range(..rho) {
                if let Some(whole) = large.get(&r) {
                    out.push(QuasiMultTriple {
                        r,
                        rho,
                        big_r: big,
                        inner: inner.clone(),
                        outer: outer.clone(),
                        whole: whole.clone(),
                    });
                }
            }
        }
    }
    if out.is_empty() {
        return invalid("no crossing side is shared between boxes");
    }
    Ok(out)
}

/// A test-function pattern evaluated at several placements.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AfPattern {
    pub name: String,
    /// Physical units.
    pub f: TestFunction,
    /// Physical translations.
    pub shifts: Vec<(f64, f64)>,
    /// Quarter turns applied before translating.
    pub rotations: Vec<u32>,
}

impl AfPattern {
    pub fn placements(&self) -> Vec<TestFunction> {
        let mut out = Vec::new();
        for &k in &self.rotations {
            for &s in &self.shifts {
                out.push(self.f.rotated_quarter(k).translated(s));
            }
        }
        out
    }
}

/// Loop-tail event parameters (lattice units).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopTailSpec {
    pub eps: f64,
    pub eta: f64,
    pub lambdas: Vec<f64>,
    pub centres: Vec<(f64, f64)>,
}

/// Four-ball parameters (physical units).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourBallSpec {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub eps: f64,
    pub origins: Vec<(f64, f64)>,
}

/// Loop observables on the box `[-extent, extent]²` at mesh `1/den`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopCampaignSpec {
    pub extent: f64,
    pub den: u64,
    pub bc: BoundarySpec,
    pub plan: RunPlan,
    pub af: Vec<AfPattern>,
    pub four_ball: Option<FourBallSpec>,
    pub loop_tail: Option<LoopTailSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopCampaignResult {
    pub spec: LoopCampaignSpec,
    pub tally: Tally,
}

impl LoopCampaignResult {
    pub fn af(&self, name: &str) -> Result<EstimatorResult> {
        self.tally.result(&format!("af/{name}"))
    }
    pub fn tilde_pi1(&self, name: &str) -> Result<EstimatorResult> {
        self.tally.result(&format!("tilde_pi1/{name}"))
    }
    pub fn tail(&self, lambda: f64) -> Result<EstimatorResult> {
        self.tally.result(&format!("tail/{lambda}"))
    }
}

pub fn run_loop_campaign(spec: &LoopCampaignSpec, checkpoint: Option<&CheckpointStore>) -> Result<LoopCampaignResult> {
    spec.plan.validate()?;
    let d = Domain::physical(spec.extent, spec.den)?;
    let s = d.scale().as_f64();
    let placements: Vec<(String, Vec<TestFunction>)> =
        spec.af.iter().map(|p| (p.name.clone(), p.placements())).collect();
    for (_, fs) in &placements {
        for f in fs {
            if f.reach() / s + 1.0 >= d.n() as f64 {
                return invalid("a test function placement leaves the box");
            }
        }
    }
    let parts = run_chains(&d, &spec.bc, &spec.plan, checkpoint, Tally::default, |t, c, cfg, _| {
        let set = extract_loops(&d, cfg);
        for (name, fs) in &placements {
            let (mut sum, mut none_odd) = (0.0, 0.0);
            for f in fs {
                let a = heightfield::a_f(&set, f)?;
                if !(-1.0 - 1e-12..=1.0 + 1e-12).contains(&a) {
                    t.count("violation/af_bounds", 1);
                }
                t.count("checked/af_bounds", 1);
                sum += a;
                let lat: Vec<(f64, f64)> = f.centers.iter().map(|p| (p.0 / s, p.1 / s)).collect();
                let cls = set.classify(&lat, f.eps / s)?;
                let odd = !cls.odd().is_empty();
                none_odd += (!odd) as u8 as f64;
                if odd && f.len() == 2 {
                    // same-sign charges: any odd loop forces a zero factor
                    let same = TestFunction::new(f.centers.clone(), vec![1, 1], f.eps)?;
                    t.count("checked/equal_charges", 1);
                    if heightfield::a_f(&set, &same)?.abs() > 1e-12 {
                        t.count("violation/equal_charges", 1);
                    }
                }
            }
            let k = fs.len() as f64;
            t.push(&format!("af/{name}"), c, sum / k);
            t.push(&format!("tilde_pi1/{name}"), c, none_odd / k);
        }
        if let Some(fb) = &spec.four_ball {
            let (mut p2, mut dl) = (0.0, 0.0);
            for &o in &fb.origins {
                t.count("checked/four_ball_disjoint", 1);
                match tilde_pi2_delta_values(&set, o, fb.x, fb.y, fb.eps) {
                    Ok((a, b)) => {
                        p2 += a;
                        dl += b;
                    }
                    Err(Error::Aborted(_)) => t.count("violation/four_ball_disjoint", 1),
                    Err(e) => return Err(e),
                }
            }
            let k = fb.origins.len() as f64;
            t.push("tilde_pi2", c, p2 / k);
            t.push("tilde_delta", c, dl / k);
        }
        if let Some(lt) = &spec.loop_tail {
            let mut counts = Vec::with_capacity(lt.centres.len());
            for &z in &lt.centres {
                counts.push(set.count_large_loops(z, lt.eps, lt.eta * lt.eps / 2.0)?);
            }
            for &lam in &lt.lambdas {
                let thr = lam / (lt.eta * lt.eta);
                let hit = counts.iter().filter(|&&k| k as f64 > thr).count() as f64;
                t.push(&format!("tail/{lam}"), c, hit / counts.len() as f64);
            }
            let mean = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
            t.push("tail/mean_count", c, mean);
        }
        Ok(())
    })?;
    Ok(LoopCampaignResult {
        spec: spec.clone(),
        tally: merge_all(parts),
    })
}

/// Normalisation factor at the lattice radii `eps_lat` on the wired box of
/// half-width `n`; all radii are read off the same samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdeltaSpec {
    pub eps_lat: Vec<f64>,
    pub n: u32,
    pub plan: RunPlan,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdeltaPoint {
    pub eps_lat: f64,
    /// `n / eps_lat`.
    pub rung: f64,
    pub estimate: EstimatorResult,
    pub acceptance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdeltaResult {
    pub spec: CdeltaSpec,
    pub points: Vec<CdeltaPoint>,
}

impl CdeltaResult {
    pub fn point(&self, eps_lat: f64) -> Option<&CdeltaPoint> {
        self.points.iter().find(|p| p.eps_lat == eps_lat)
    }
}

pub fn run_cdelta(spec: &CdeltaSpec, checkpoint: Option<&CheckpointStore>) -> Result<CdeltaResult> {
    let d = Domain::new(spec.n, crate::lattice::Scale::UNIT)?;
    if spec.eps_lat.is_empty() {
        return invalid("no radii given");
    }
    for &e in &spec.eps_lat {
        if !(e > 0.0) || (spec.n as f64) < 32.0 * e {
            return invalid(format!("box half-width {} below 32 eps = {}", spec.n, 32.0 * e));
        }
    }
    let parts = run_chains(&d, &BoundarySpec::Wired, &spec.plan, checkpoint, Tally::default, |t, c, cfg, _| {
        let set = extract_loops(&d, cfg);
        t.count("seen", 1);
        for &e in &spec.eps_lat {
            let key = format!("cdelta/{e}");
            match cdelta_value(&set, (0.0, 0.0), e)? {
                Some(v) => {
                    t.count(&format!("kept/{e}"), 1);
                    t.push_weighted(&key, c, v, 1.0);
                }
                None => t.push_weighted(&key, c, 0.0, 0.0),
            }
        }
        Ok(())
    })?;
    let tally = merge_all(parts);
    let seen = tally.counter("seen");
    let mut points = Vec::new();
    for &e in &spec.eps_lat {
        let kept = tally.counter(&format!("kept/{e}"));
        let acceptance = kept as f64 / seen.max(1) as f64;
        if acceptance < MIN_ACCEPTANCE {
            return Err(Error::Aborted(format!(
                "acceptance rate {acceptance:.2e} below {MIN_ACCEPTANCE:.0e} at eps {e} ({kept} of {seen} samples)"
            )));
        }
        points.push(CdeltaPoint {
            eps_lat: e,
            rung: spec.n as f64 / e,
            estimate: tally.result(&format!("cdelta/{e}"))?,
            acceptance,
        });
    }
    Ok(CdeltaResult {
        spec: spec.clone(),
        points,
    })
}

/// Sweeps and wall-clock seconds spent by a campaign, for reports.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Cost {
    pub sweeps: u64,
    pub seconds: f64,
}

pub fn checkpoint_dir(root: &Path, name: &str) -> PathBuf {
    root.join("checkpoints").join(name)
}

//! Fast self-checks: sampler against enumeration, the cosine identity, the
//! loop-count identity and the quadrature goldens.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{invalid, Result};
use crate::gffpredict::{b0_with_tolerance, b_eps, gff_characteristic};
use crate::heightfield::{a_f, loop_integrals, orientation_average, MAX_ENUM_LOOPS};
use crate::lattice::{BoundarySpec, Domain, EdgeGraph, Scale, SmallGraph};
use crate::loops::{euler_loop_count, extract_loops};
use crate::sampler::{brute_force_distribution, chain_rng, Chain, FkConfig, ModelParams};
use crate::testfn::TestFunction;

/// Reference values checked by [`quadrature_goldens`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Goldens {
    pub b0: f64,
    pub b0_tol: f64,
    /// `e^{2b₀}(1/4)^{1/4}`: two balls, `|x| = 1/2`, `ε = 1/8`.
    pub two_ball: f64,
    pub two_ball_tol: f64,
    pub b_eps_tol: f64,
}

impl Default for Goldens {
    fn default() -> Self {
        Goldens {
            b0: -1.0 / 32.0,
            b0_tol: 1e-6,
            two_ball: (-1.0f64 / 16.0).exp() * 0.25f64.powf(0.25),
            two_ball_tol: 1e-8,
            b_eps_tol: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl SuiteReport {
    pub fn line(&self) -> String {
        format!(
            "{} {}: {} ({:.1}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.seconds
        )
    }
}

fn report(name: &str, start: Instant, passed: bool, detail: String) -> SuiteReport {
    SuiteReport {
        name: name.to_string(),
        passed,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// The small graphs used by the enumeration check, each with at most 12 edges.
pub fn enumeration_graphs() -> Vec<(String, SmallGraph)> {
    let mut out: Vec<(String, SmallGraph)> = [(2, 1), (2, 2), (3, 2), (4, 2), (3, 3)]
        .iter()
        .map(|&(w, h)| (format!("grid{w}x{h}"), SmallGraph::grid(w, h)))
        .collect();
    let d = Domain::new(1, Scale::UNIT).expect("unit box");
    let edges = (0..d.num_edges()).map(|e| d.endpoints(e)).collect();
    out.push((
        "box1".into(),
        SmallGraph::new(d.num_vertices(), edges, Some(d.boundary_vertices().to_vec())).expect("box graph"),
    ));
    // a triangle with a pendant path, boundary = the two ends
    out.push((
        "kite".into(),
        SmallGraph::new(5, vec![(0, 1), (1, 2), (2, 0), (2, 3), (3, 4)], Some(vec![0, 4])).expect("kite"),
    ));
    out
}

/// Pearson statistic of `counts` against `law` with cells of expected count
/// below 5 pooled; returns `(statistic, degrees of freedom)`.
pub fn pooled_chi_square(counts: &[u64], law: &[f64]) -> (f64, usize) {
    let n: u64 = counts.iter().sum();
    let n = n as f64;
    let (mut stat, mut cells) = (0.0, 0usize);
    let (mut pool_o, mut pool_e) = (0.0, 0.0);
    for (&c, &p) in counts.iter().zip(law) {
        let e = p * n;
        if e < 5.0 {
            pool_o += c as f64;
            pool_e += e;
        } else {
            stat += (c as f64 - e).powi(2) / e;
            cells += 1;
        }
    }
    if pool_e > 0.0 {
        stat += (pool_o - pool_e).powi(2) / pool_e.max(1e-300);
        cells += 1;
    }
    (stat, cells.saturating_sub(1))
}

/// Chi-square test of the sampler against the enumerated law, free and wired,
/// on every graph of [`enumeration_graphs`].
pub fn sampler_exactness(samples: u64, thin: u64, seed: u64) -> Result<SuiteReport> {
    let start = Instant::now();
    let mut worst: Option<(String, f64, f64)> = None;
    let mut failures = Vec::new();
    for (gi, (name, g)) in enumeration_graphs().into_iter().enumerate() {
        for (bi, bc) in [BoundarySpec::Free, BoundarySpec::Wired].into_iter().enumerate() {
            let law = brute_force_distribution(&g, &bc, ModelParams::CRITICAL)?;
            let mut chain = Chain::new(&g, bc.clone(), ModelParams::CRITICAL, seed, (2 * gi + bi) as u64)?;
            chain.run(100);
            let mut counts = vec![0u64; law.len()];
            for _ in 0..samples {
                counts[chain.next_sample(thin).mask() as usize] += 1;
            }
            let (stat, dof) = pooled_chi_square(&counts, &law);
            let crit = ChiSquared::new(dof.max(1) as f64).expect("dof").inverse_cdf(0.999);
            let label = format!("{name}/{}", bc.label());
            if stat >= crit {
                failures.push(format!("{label} chi2={stat:.1} >= {crit:.1}"));
            }
            if worst.as_ref().map_or(true, |w| stat / crit > w.1 / w.2) {
                worst = Some((label, stat, crit));
            }
        }
    }
    let (wl, ws, wc) = worst.expect("at least one graph");
    let detail = if failures.is_empty() {
        format!("worst {wl} chi2={ws:.1} vs q999={wc:.1}")
    } else {
        failures.join("; ")
    };
    Ok(report("sampler-exactness", start, failures.is_empty(), detail))
}

fn random_config<R: Rng>(d: &Domain, bc: BoundarySpec, p: f64, rng: &mut R) -> FkConfig {
    FkConfig {
        open: (0..d.num_edges()).map(|_| rng.gen_bool(p)).collect(),
        bc,
    }
}

/// Orientation average of `e^{i∫Fh}` against `A_F` on random configurations
/// of the box of half-width `n`.
pub fn cosine_identity(n: u32, configs: usize, seed: u64) -> Result<SuiteReport> {
    let start = Instant::now();
    let d = Domain::new(n, Scale::UNIT)?;
    let mut rng = chain_rng(seed, 0);
    let h = n as f64;
    let pats = [
        TestFunction::dipole((-0.4 * h, 0.1), (0.4 * h, -0.1), 0.2 * h)?,
        TestFunction::new(
            vec![(-0.4 * h, -0.4 * h), (0.4 * h, -0.4 * h), (-0.4 * h, 0.4 * h), (0.4 * h, 0.4 * h)],
            vec![1, -1, -1, 1],
            0.15 * h,
        )?,
        TestFunction::new(vec![(-0.3 * h, 0.2), (0.35 * h, 0.0)], vec![1, 1], 0.2 * h)?,
    ];
    let mut max_err: f64 = 0.0;
    let mut redrawn = 0usize;
    let mut i = 0;
    while i < configs {
        let bc = if i % 2 == 0 { BoundarySpec::Wired } else { BoundarySpec::Free };
        let p = [0.5, 2.0 / 3.0, 0.8][i % 3];
        let cfg = random_config(&d, bc, p, &mut rng);
        let set = extract_loops(&d, &cfg);
        let f = &pats[i % pats.len()];
        // too many loops to enumerate: draw again
        if loop_integrals(&set, f)?.len() > MAX_ENUM_LOOPS {
            redrawn += 1;
            if redrawn > 100 * configs {
                return invalid("cosine identity: configurations keep exceeding the enumeration limit");
            }
            continue;
        }
        let (re, im) = orientation_average(&set, f)?;
        max_err = max_err.max((re - a_f(&set, f)?).abs()).max(im.abs());
        i += 1;
    }
    Ok(report(
        "cosine-identity",
        start,
        max_err <= 1e-10,
        format!("{configs} configs at n={n} ({redrawn} redrawn), max error {max_err:.2e}"),
    ))
}

/// Loop count against `k(ω) + k(ω*) − 1`: exhaustive on the box of half-width
/// 1, then `random` draws on the box of half-width `n`.
pub fn euler_identity(n: u32, random: usize, seed: u64) -> Result<SuiteReport> {
    let start = Instant::now();
    let mut violations = 0usize;
    let mut checked = 0usize;
    let small = Domain::new(1, Scale::UNIT)?;
    for bc in [BoundarySpec::Free, BoundarySpec::Wired] {
        for mask in 0u64..1 << small.num_edges() {
            let cfg = FkConfig::from_mask(&small, bc.clone(), mask);
            violations += (extract_loops(&small, &cfg).len() != euler_loop_count(&small, &cfg)) as usize;
            checked += 1;
        }
    }
    let d = Domain::new(n, Scale::UNIT)?;
    let mut rng = chain_rng(seed, 1);
    for i in 0..random {
        let bc = if i % 2 == 0 { BoundarySpec::Wired } else { BoundarySpec::Free };
        let p = rng.gen_range(0.05..0.95);
        let cfg = random_config(&d, bc, p, &mut rng);
        violations += (extract_loops(&d, &cfg).len() != euler_loop_count(&d, &cfg)) as usize;
        checked += 1;
    }
    Ok(report(
        "euler-loop-count",
        start,
        violations == 0,
        format!("{violations} violations in {checked} configurations"),
    ))
}

/// `b₀`, the vanishing of `b_ε` off contact and the two-ball value.
pub fn quadrature_goldens(g: &Goldens) -> Result<SuiteReport> {
    let start = Instant::now();
    let mut problems = Vec::new();
    let b0 = b0_with_tolerance(1e-13)?.value;
    if !((b0 - g.b0).abs() <= g.b0_tol) {
        problems.push(format!("b0 {b0:.12} vs golden {}", g.b0));
    }
    let mut worst: f64 = 0.0;
    for &(d, eps) in &[(0.25, 0.125), (0.5, 0.125), (1.0, 0.125), (0.3, 0.1), (3.0, 1.0), (2.0, 0.5)] {
        worst = worst.max(b_eps(d, eps)?.value.abs());
    }
    if !(worst <= g.b_eps_tol) {
        problems.push(format!("max |b_eps| off contact {worst:.2e}"));
    }
    let f = TestFunction::dipole((0.0, 0.0), (0.5, 0.0), 0.125)?;
    let c = gff_characteristic(&f)?.characteristic;
    if !((c - g.two_ball).abs() <= g.two_ball_tol) {
        problems.push(format!("two-ball {c:.12} vs golden {}", g.two_ball));
    }
    let detail = if problems.is_empty() {
        format!("b0={b0:.10}, max|b_eps|={worst:.1e}, two-ball={c:.10}")
    } else {
        problems.join("; ")
    };
    Ok(report("quadrature-goldens", start, problems.is_empty(), detail))
}

/// Sizes of the fast suite.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub samples: u64,
    pub thin: u64,
    pub cosine_configs: usize,
    pub euler_random: usize,
    pub n: u32,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            samples: 200_000,
            thin: 4,
            cosine_configs: 100,
            euler_random: 10_000,
            n: 8,
            seed: 1,
        }
    }
}

/// Runs every suite; errors inside a suite are reported as its failure.
pub fn run_all(opts: &VerifyOptions, goldens: &Goldens) -> Vec<SuiteReport> {
    let wrap = |name: &str, r: Result<SuiteReport>| {
        r.unwrap_or_else(|e| SuiteReport {
            name: name.to_string(),
            passed: false,
            detail: e.to_string(),
            seconds: 0.0,
        })
    };
    vec![
        wrap("sampler-exactness", sampler_exactness(opts.samples, opts.thin, opts.seed)),
        wrap("cosine-identity", cosine_identity(opts.n, opts.cosine_configs, opts.seed)),
        wrap("euler-loop-count", euler_identity(opts.n, opts.euler_random, opts.seed)),
        wrap("quadrature-goldens", quadrature_goldens(goldens)),
    ]
}

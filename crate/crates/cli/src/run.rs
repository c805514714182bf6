use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fkq4::analysis::{fit_report, scaling_relations, FitOptions, Rational, ScalingSeries};
use fkq4::campaign::{
    arm_series, delta_series, run_arm_campaign, run_cdelta, run_chains, run_loop_campaign, two_point_series,
    AfPattern, ArmCampaignResult, ArmCampaignSpec, CdeltaSpec, CheckpointStore, LoopCampaignSpec, RunPlan, Tally,
};
use fkq4::gffpredict::gff_characteristic;
use fkq4::heightfield::{height, orient};
use fkq4::loops::extract_loops;
use fkq4::{BoundarySpec, Domain, EdgeGraph, EstimatorResult, Scale, TestFunction};
use serde::Serialize;

use crate::config::{Bc, ExperimentConfig, Job};
use crate::output::{Row, Staging, CODE_VERSION, RESULTS};

/// JSON wrapper carrying provenance.
#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    kind: &'a str,
    seed: u64,
    config_hash: &'a str,
    code_version: &'a str,
    data: T,
}

pub struct RunContext<'a> {
    pub cfg: &'a ExperimentConfig,
    pub hash: String,
    pub out: PathBuf,
}

impl RunContext<'_> {
    fn checkpoint(&self, label: &str) -> Option<CheckpointStore> {
        self.cfg.run().checkpoint_every.map(|every| CheckpointStore {
            dir: self.out.join("checkpoints").join(format!("{}-{label}", &self.hash[..16])),
            every,
            key: self.hash.clone(),
        })
    }

    fn clear_checkpoints(&self, labels: &[String]) {
        for l in labels {
            if let Some(s) = self.checkpoint(l) {
                let _ = s.clear();
                let _ = std::fs::remove_dir(&s.dir);
            }
        }
        let _ = std::fs::remove_dir(self.out.join("checkpoints"));
    }

    fn envelope<T: Serialize>(&self, data: T) -> Envelope<'_, T> {
        Envelope {
            kind: self.cfg.kind(),
            seed: self.cfg.seed(),
            config_hash: &self.hash,
            code_version: CODE_VERSION,
            data,
        }
    }
}

/// Runs the experiment and commits its outputs; returns the written files.
pub fn execute(ctx: &RunContext) -> Result<Vec<PathBuf>> {
    let mut st = Staging::new(&ctx.out, ctx.cfg.seed(), &ctx.hash)?;
    st.write_json("config.json", ctx.cfg)?;
    let mut labels = Vec::new();
    match ctx.cfg {
        ExperimentConfig::Sample(j) => sample(j, &mut st)?,
        ExperimentConfig::Arms(j) => {
            let p = &j.params;
            let specs = p.bc.iter().map(|&bc| {
                let mut s = arm_spec(j, p.half_width, bc);
                s.radii = p.radii.clone();
                s
            });
            let results = run_arm_set(ctx, specs.collect(), &mut labels)?;
            let mut rows = Vec::new();
            for r in &results {
                rows.extend(arm_rows(r, r.spec.label(), &[r])?);
            }
            let boxes = box_pair(&results);
            if boxes.len() == 2 {
                rows.extend(arm_rows(boxes[0], "avg", &boxes)?);
            }
            st.write_rows(RESULTS, &rows)?;
            let refs = series_source(&results);
            let series = vec![arm_series(&refs, 1)?, arm_series(&refs, 2)?];
            st.write_json("series.json", &series)?;
        }
        ExperimentConfig::Delta(j) => {
            let p = &j.params;
            let specs = [Bc::Wired, Bc::Free]
                .iter()
                .map(|&bc| {
                    let mut s = arm_spec(j, p.half_width, bc);
                    s.crossings = p.sides.clone();
                    s
                })
                .collect();
            let res = run_arm_set(ctx, specs, &mut labels)?;
            let side = 2 * p.half_width;
            let mut rows = Vec::new();
            for r in &res {
                for &k in &p.sides {
                    rows.push(Row::new("crossing", side, 1.0, r.spec.label(), &r.crossing(k)?).radii(k, p.half_width));
                }
            }
            let series = delta_series(&res[0], &res[1])?;
            for (pt, &k) in series.points.iter().zip(&p.sides) {
                rows.push(Row::new("delta", side, 1.0, "wired-free", &pt.estimate).radii(k, p.half_width));
            }
            st.write_rows(RESULTS, &rows)?;
            st.write_json("series.json", &vec![series])?;
        }
        ExperimentConfig::TwoPoint(j) => {
            let p = &j.params;
            let specs = p
                .bc
                .iter()
                .map(|&bc| {
                    let mut s = arm_spec(j, p.half_width, bc);
                    s.two_point = p.distances.clone();
                    s.window = p.window;
                    s
                })
                .collect();
            let res = run_arm_set(ctx, specs, &mut labels)?;
            let refs = series_source(&res);
            let side = 2 * p.half_width;
            let mut rows = Vec::new();
            let mut groups: Vec<(String, Vec<&ArmCampaignResult>)> =
                res.iter().map(|r| (r.spec.label().to_string(), vec![r])).collect();
            let boxes = box_pair(&res);
            if boxes.len() == 2 {
                groups.push(("avg".into(), boxes));
            }
            for (label, g) in &groups {
                for pt in two_point_series(g)?.points {
                    let mut row = Row::new("two_point", side, 1.0, label, &pt.estimate);
                    row.x = Some(pt.scale);
                    rows.push(row);
                }
            }
            st.write_rows(RESULTS, &rows)?;
            st.write_json("series.json", &vec![two_point_series(&refs)?])?;
        }
        ExperimentConfig::Mformula(j) => mformula(ctx, j, &mut st, &mut labels)?,
        ExperimentConfig::Cdelta(j) => {
            let p = &j.params;
            let mut rows = Vec::new();
            let mut rates = Vec::new();
            // boxes shared by several radii are sampled once
            let mut boxes: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
            for &eps in &p.eps {
                for &m in &p.ladder {
                    boxes.entry((m as f64 * eps).round() as u32).or_default().push(eps);
                }
            }
            for (n, eps_lat) in boxes {
                let label = format!("cdelta-{n}");
                let spec = CdeltaSpec {
                    eps_lat,
                    n,
                    plan: j.run.plan(j.seed, 2 * n),
                };
                let res = run_cdelta(&spec, ctx.checkpoint(&label).as_ref())?;
                labels.push(label);
                for pt in &res.points {
                    let mut row = Row::new("cdelta", 2 * n, 1.0, "wired", &pt.estimate);
                    row.eps = Some(pt.eps_lat);
                    row.big_r = Some(n);
                    rows.push(row);
                    rates.push(serde_json::json!({"eps": pt.eps_lat, "half_width": n, "acceptance": pt.acceptance}));
                }
            }
            st.write_rows(RESULTS, &rows)?;
            st.write_json("acceptance.json", &ctx.envelope(rates))?;
        }
        ExperimentConfig::Heights(j) => heights(j, &mut st)?,
        ExperimentConfig::Fit(j) => {
            let p = &j.params;
            let mut all: Vec<ScalingSeries> = Vec::new();
            for path in &p.inputs {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let v: Vec<ScalingSeries> =
                    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
                all.extend(v);
            }
            let mut by_obs: BTreeMap<String, Vec<ScalingSeries>> = BTreeMap::new();
            for s in all {
                if p.observables.is_empty() || p.observables.contains(&s.observable) {
                    by_obs.entry(format!("{}/{}", s.observable, s.bc)).or_default().push(s);
                }
            }
            if by_obs.is_empty() {
                bail!("no series match the requested observables");
            }
            let mut opts = FitOptions {
                seed: j.seed,
                ..FitOptions::default()
            };
            if let Some(k) = p.exclude_largest {
                opts.exclude_largest = k;
            }
            if let Some(b) = p.resamples {
                opts.resamples = b;
            }
            let reports = by_obs
                .values()
                .map(|v| fit_report(v, &opts, &ctx.hash))
                .collect::<fkq4::Result<Vec<_>>>()?;
            st.write_json("fit.json", &ctx.envelope(reports))?;
        }
        ExperimentConfig::Relations(j) => {
            let parse = |s: &str| -> Result<Rational> {
                s.trim().parse::<Rational>().map_err(|_| anyhow::anyhow!("not a rational: {s:?}"))
            };
            let e = scaling_relations(parse(&j.params.xi1)?, parse(&j.params.iota)?)?;
            let show = |r: Rational| r.to_string();
            let data = serde_json::json!({
                "xi1": show(e.xi1), "iota": show(e.iota), "nu": show(e.nu), "beta": show(e.beta),
                "gamma": show(e.gamma), "alpha": show(e.alpha), "eta": show(e.eta),
                "volume_tail": show(e.volume_tail),
            });
            st.write_json("relations.json", &ctx.envelope(data))?;
        }
    }
    let files = st.commit()?;
    ctx.clear_checkpoints(&labels);
    Ok(files)
}

fn arm_spec<P>(j: &Job<P>, n: u32, bc: Bc) -> ArmCampaignSpec {
    ArmCampaignSpec {
        n,
        bc: bc.spec(),
        plan: j.run.plan(j.seed, 2 * n),
        radii: Vec::new(),
        crossings: Vec::new(),
        two_point: Vec::new(),
        window: 0,
        mixing: None,
        influence: None,
        self_dual: None,
        periodic: bc == Bc::Periodic,
    }
}

/// The free and wired results, when both were run.
fn box_pair(res: &[ArmCampaignResult]) -> Vec<&ArmCampaignResult> {
    let v: Vec<_> = res.iter().filter(|r| !r.spec.periodic).collect();
    if v.len() == 2 && v[0].spec.bc != v[1].spec.bc {
        v
    } else {
        Vec::new()
    }
}

/// The periodic result if there is one, else the free/wired pair, else the
/// first result.
fn series_source(res: &[ArmCampaignResult]) -> Vec<&ArmCampaignResult> {
    if let Some(p) = res.iter().find(|r| r.spec.periodic) {
        return vec![p];
    }
    let pair = box_pair(res);
    if pair.is_empty() {
        res.iter().take(1).collect()
    } else {
        pair
    }
}

fn run_arm_set(ctx: &RunContext, specs: Vec<ArmCampaignSpec>, labels: &mut Vec<String>) -> Result<Vec<ArmCampaignResult>> {
    specs
        .iter()
        .map(|s| {
            let label = s.label().to_string();
            let r = run_arm_campaign(s, ctx.checkpoint(&label).as_ref());
            labels.push(label);
            r.map_err(Into::into)
        })
        .collect()
}

fn arm_rows(first: &ArmCampaignResult, label: &str, group: &[&ArmCampaignResult]) -> Result<Vec<Row>> {
    let side = 2 * first.spec.n;
    let radii = &first.spec.radii;
    let mut rows = Vec::new();
    for (obs, arms) in [("pi1", 1), ("pi2", 2)] {
        for (i, &r) in radii.iter().enumerate() {
            for &big in &radii[i + 1..] {
                let parts = group
                    .iter()
                    .map(|c| if arms == 1 { c.pi1(r, big) } else { c.pi2(r, big) })
                    .collect::<fkq4::Result<Vec<_>>>()?;
                let est = fkq4::campaign::bc_average(&parts)?;
                rows.push(Row::new(obs, side, 1.0, label, &est).radii(r, big));
            }
        }
    }
    Ok(rows)
}

fn sample(j: &Job<crate::config::SampleParams>, st: &mut Staging) -> Result<()> {
    let p = &j.params;
    let d = Domain::new(p.half_width, Scale::UNIT)?;
    let plan = j.run.plan(j.seed, 2 * p.half_width);
    let parts = run_chains(&d, &p.bc.spec(), &plan, None, Tally::default, |t, c, cfg, _| {
        t.push("density", c, cfg.num_open() as f64 / cfg.open.len() as f64);
        t.push("clusters_per_site", c, cfg.cluster_count(&d) as f64 / d.num_vertices() as f64);
        Ok(())
    })?;
    let tally = parts.into_iter().fold(Tally::default(), Tally::merge);
    let side = 2 * p.half_width;
    let bc = p.bc.spec();
    let mut rows = Vec::new();
    for key in ["density", "clusters_per_site"] {
        rows.push(Row::new(key, side, 1.0, bc.label(), &tally.result(key)?));
    }
    st.write_rows(RESULTS, &rows)?;
    #[derive(Serialize)]
    struct Trace {
        chain: u64,
        sample: usize,
        density: f64,
    }
    let acc = &tally.acc["density"];
    let mut trace = Vec::new();
    for (chain, series) in acc.series() {
        for (i, &(v, _)) in series.iter().enumerate() {
            trace.push(Trace {
                chain: *chain,
                sample: i,
                density: v,
            });
        }
    }
    st.write_csv("trace.csv", &trace)?;
    Ok(())
}

fn pattern(pc: &crate::config::PatternConfig) -> Result<AfPattern> {
    Ok(AfPattern {
        name: pc.name.clone(),
        f: TestFunction::new(pc.centers.clone(), pc.charges.clone(), pc.eps)?,
        shifts: if pc.shifts.is_empty() { vec![(0.0, 0.0)] } else { pc.shifts.clone() },
        rotations: if pc.rotations.is_empty() { vec![0] } else { pc.rotations.clone() },
    })
}

#[derive(Serialize)]
struct MformulaRow {
    pattern: String,
    delta: f64,
    #[serde(rename = "N")]
    n: u32,
    estimate: f64,
    stderr: f64,
    prediction: Option<f64>,
    relative_error: Option<f64>,
    seed: u64,
    config_hash: String,
    code_version: String,
}

fn mformula(
    ctx: &RunContext,
    j: &Job<crate::config::MformulaParams>,
    st: &mut Staging,
    labels: &mut Vec<String>,
) -> Result<()> {
    let p = &j.params;
    let pats = p.patterns.iter().map(pattern).collect::<Result<Vec<_>>>()?;
    let mut predictions = Vec::new();
    for pat in &pats {
        predictions.push(if pat.f.is_mean_zero() {
            Some(gff_characteristic(&pat.f)?.characteristic)
        } else {
            None
        });
    }
    let mut rows = Vec::new();
    let mut table = Vec::new();
    for &den in &p.den {
        let side = (2.0 * p.extent * den as f64).round() as u32;
        let spec = LoopCampaignSpec {
            extent: p.extent,
            den,
            bc: p.bc.spec(),
            plan: j.run.plan(j.seed, side),
            af: pats.clone(),
            four_ball: None,
            loop_tail: None,
        };
        let label = format!("mformula-{den}");
        let res = run_loop_campaign(&spec, ctx.checkpoint(&label).as_ref())?;
        labels.push(label);
        let delta = 1.0 / den as f64;
        for (pat, pred) in pats.iter().zip(&predictions) {
            let est = res.af(&pat.name)?;
            rows.push(Row::new(&format!("af/{}", pat.name), side, delta, p.bc.spec().label(), &est));
            table.push(MformulaRow {
                pattern: pat.name.clone(),
                delta,
                n: side,
                estimate: est.estimate,
                stderr: est.stderr,
                prediction: *pred,
                relative_error: pred.map(|g| (est.estimate - g).abs() / g),
                seed: j.seed,
                config_hash: ctx.hash.clone(),
                code_version: CODE_VERSION.to_string(),
            });
        }
    }
    st.write_rows(RESULTS, &rows)?;
    st.write_csv("mformula.csv", &table)?;
    Ok(())
}

fn heights(j: &Job<crate::config::HeightsParams>, st: &mut Staging) -> Result<()> {
    let p = &j.params;
    let d = Domain::new(p.half_width, Scale::UNIT)?;
    let n = p.half_width as i32;
    if p.faces.iter().any(|&(x, y)| x < -n || x >= n || y < -n || y >= n) {
        bail!("height faces must lie inside the box");
    }
    let plan: RunPlan = j.run.plan(j.seed, 2 * p.half_width);
    let bc: BoundarySpec = p.bc.spec();
    let parts = run_chains(&d, &bc, &plan, None, Tally::default, |t, c, cfg, rng| {
        let set = extract_loops(&d, cfg);
        let h = height(&set, &orient(&set, rng));
        for (i, &(x, y)) in p.faces.iter().enumerate() {
            let v = h.get(set.face_at((2 * x + 1, 2 * y + 1))) as f64;
            t.push(&format!("h/{i}"), c, v);
            t.push(&format!("h2/{i}"), c, v * v);
        }
        Ok(())
    })?;
    let tally = parts.into_iter().fold(Tally::default(), Tally::merge);
    let mut rows = Vec::new();
    for (i, &(x, y)) in p.faces.iter().enumerate() {
        for (obs, key) in [("height_mean", format!("h/{i}")), ("height_second_moment", format!("h2/{i}"))] {
            let est: EstimatorResult = tally.result(&key)?;
            let mut row = Row::new(obs, 2 * p.half_width, 1.0, bc.label(), &est);
            row.x = Some(x as f64 + 0.5);
            row.y = Some(y as f64 + 0.5);
            rows.push(row);
        }
    }
    st.write_rows(RESULTS, &rows)?;
    Ok(())
}

/// Output directory: `--out`, then the config field, then
/// `<FKQ4_OUT or ./fkq4-out>/<kind>-<hash>`.
pub fn resolve_out(flag: Option<&Path>, env_root: Option<&Path>, cfg: &ExperimentConfig) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = cfg.output() {
        return p;
    }
    let leaf = format!("{}-{}", cfg.kind(), cfg.short_hash());
    env_root.unwrap_or(Path::new("fkq4-out")).join(leaf)
}

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fkq4::campaign::RunPlan;
use fkq4::BoundarySpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// One experiment, as read from a JSON document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExperimentConfig {
    Sample(Job<SampleParams>),
    Arms(Job<ArmsParams>),
    Delta(Job<DeltaParams>),
    TwoPoint(Job<TwoPointParams>),
    Mformula(Job<MformulaParams>),
    Cdelta(Job<CdeltaParams>),
    Heights(Job<HeightsParams>),
    Fit(Job<FitParams>),
    Relations(Job<RelationsParams>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Job<P> {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub run: RunSettings,
    /// Output directory; `--out` and `FKQ4_OUT` take precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub params: P,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSettings {
    #[serde(default = "one")]
    pub chains: u32,
    /// Defaults to `8·N` sweeps.
    #[serde(default)]
    pub burn_in: Option<u64>,
    #[serde(default = "default_samples")]
    pub samples: u64,
    #[serde(default = "one_u64")]
    pub thin: u64,
    /// Save chain state after this many samples.
    #[serde(default)]
    pub checkpoint_every: Option<u64>,
}

fn one() -> u32 {
    1
}
fn one_u64() -> u64 {
    1
}
fn default_samples() -> u64 {
    1000
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            chains: 1,
            burn_in: None,
            samples: default_samples(),
            thin: 1,
            checkpoint_every: None,
        }
    }
}

impl RunSettings {
    /// `side` is the number of lattice steps across the box.
    pub fn plan(&self, seed: u64, side: u32) -> RunPlan {
        RunPlan {
            chains: self.chains,
            burn_in: self.burn_in.unwrap_or(8 * side as u64),
            samples: self.samples,
            thin: self.thin,
            seed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bc {
    Free,
    Wired,
    /// Torus made from the box; arm and two-point runs only.
    Periodic,
}

impl Bc {
    pub fn spec(self) -> BoundarySpec {
        match self {
            Bc::Free | Bc::Periodic => BoundarySpec::Free,
            Bc::Wired => BoundarySpec::Wired,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleParams {
    pub half_width: u32,
    pub bc: Bc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmsParams {
    pub half_width: u32,
    /// Each listed bc is run; with both, averaged rows are added.
    pub bc: Vec<Bc>,
    /// Radii; `π(r, R)` is recorded for every pair `r < R`.
    pub radii: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaParams {
    pub half_width: u32,
    /// Sides of the crossed squares.
    pub sides: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwoPointParams {
    pub half_width: u32,
    pub bc: Vec<Bc>,
    pub distances: Vec<u32>,
    pub window: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatternConfig {
    pub name: String,
    pub centers: Vec<(f64, f64)>,
    pub charges: Vec<i8>,
    pub eps: f64,
    #[serde(default)]
    pub shifts: Vec<(f64, f64)>,
    #[serde(default)]
    pub rotations: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MformulaParams {
    /// Physical half-width of the box.
    pub extent: f64,
    /// Inverse mesh sizes `1/δ`.
    pub den: Vec<u64>,
    pub bc: Bc,
    pub patterns: Vec<PatternConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CdeltaParams {
    /// Ball radii in lattice steps.
    pub eps: Vec<f64>,
    /// Box half-widths as multiples of the radius.
    pub ladder: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeightsParams {
    pub half_width: u32,
    pub bc: Bc,
    /// Faces, by lower-left corner.
    pub faces: Vec<(i32, i32)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitParams {
    /// `series.json` files written by `arms`, `delta` or `two-point` runs.
    pub inputs: Vec<PathBuf>,
    /// Restricts the fit to these observables.
    #[serde(default)]
    pub observables: Vec<String>,
    #[serde(default)]
    pub exclude_largest: Option<usize>,
    #[serde(default)]
    pub resamples: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationsParams {
    /// Rationals written as `"p/q"`.
    pub xi1: String,
    pub iota: String,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).context("parsing config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentConfig::Sample(_) => "sample",
            ExperimentConfig::Arms(_) => "arms",
            ExperimentConfig::Delta(_) => "delta",
            ExperimentConfig::TwoPoint(_) => "two-point",
            ExperimentConfig::Mformula(_) => "mformula",
            ExperimentConfig::Cdelta(_) => "cdelta",
            ExperimentConfig::Heights(_) => "heights",
            ExperimentConfig::Fit(_) => "fit",
            ExperimentConfig::Relations(_) => "relations",
        }
    }

    fn common(&mut self) -> (&mut u64, &mut RunSettings, &mut Option<PathBuf>) {
        macro_rules! c {
            ($j:expr) => {
                (&mut $j.seed, &mut $j.run, &mut $j.output)
            };
        }
        match self {
            ExperimentConfig::Sample(j) => c!(j),
            ExperimentConfig::Arms(j) => c!(j),
            ExperimentConfig::Delta(j) => c!(j),
            ExperimentConfig::TwoPoint(j) => c!(j),
            ExperimentConfig::Mformula(j) => c!(j),
            ExperimentConfig::Cdelta(j) => c!(j),
            ExperimentConfig::Heights(j) => c!(j),
            ExperimentConfig::Fit(j) => c!(j),
            ExperimentConfig::Relations(j) => c!(j),
        }
    }

    pub fn seed(&self) -> u64 {
        *self.clone().common().0
    }

    pub fn set_seed(&mut self, seed: u64) {
        *self.common().0 = seed;
    }

    pub fn output(&self) -> Option<PathBuf> {
        self.clone().common().2.clone()
    }

    pub fn run(&self) -> RunSettings {
        *self.clone().common().1
    }

    pub fn validate(&self) -> Result<()> {
        let run = self.run();
        if run.chains == 0 || run.samples == 0 || run.thin == 0 {
            bail!("run.chains, run.samples and run.thin must be positive");
        }
        if run.checkpoint_every == Some(0) {
            bail!("run.checkpoint_every must be positive");
        }
        match self {
            ExperimentConfig::Arms(j) if j.params.bc.is_empty() || j.params.radii.len() < 2 => {
                bail!("arms needs at least one bc and two radii")
            }
            ExperimentConfig::TwoPoint(j) if j.params.bc.is_empty() || j.params.distances.is_empty() => {
                bail!("two-point needs at least one bc and one distance")
            }
            ExperimentConfig::Mformula(j) if j.params.den.is_empty() || j.params.patterns.is_empty() => {
                bail!("mformula needs mesh sizes and patterns")
            }
            ExperimentConfig::Cdelta(j) if j.params.eps.is_empty() || j.params.ladder.is_empty() => {
                bail!("cdelta needs radii and a ladder")
            }
            ExperimentConfig::Fit(j) if j.params.inputs.is_empty() => bail!("fit needs input series"),
            ExperimentConfig::Sample(j) if j.params.bc == Bc::Periodic => bail!("periodic bc is only for arms and two-point"),
            ExperimentConfig::Mformula(j) if j.params.bc == Bc::Periodic => bail!("periodic bc is only for arms and two-point"),
            ExperimentConfig::Heights(j) if j.params.bc == Bc::Periodic => bail!("periodic bc is only for arms and two-point"),
            _ => Ok(()),
        }
    }

    /// SHA-256 of the canonical JSON form, without the output path.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        *c.common().2 = None;
        let text = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn short_hash(&self) -> String {
        self.hash()[..16].to_string()
    }
}

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use fkq4::EstimatorResult;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST: &str = "MANIFEST.txt";
pub const RESULTS: &str = "results.csv";

/// One estimate with full provenance. `N` is the number of lattice steps
/// across the box, `delta` the mesh size.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub observable: String,
    pub r: Option<u32>,
    #[serde(rename = "R")]
    pub big_r: Option<u32>,
    pub eps: Option<f64>,
    pub x: Option<f64>,
    pub y: Option<f64>,
    #[serde(rename = "N")]
    pub n: u32,
    pub delta: f64,
    pub bc: String,
    pub estimate: f64,
    pub stderr: f64,
    pub n_eff: f64,
    pub seed: u64,
    pub config_hash: String,
    pub code_version: String,
}

impl Row {
    pub fn new(observable: &str, n: u32, delta: f64, bc: &str, est: &EstimatorResult) -> Self {
        Row {
            observable: observable.to_string(),
            n,
            delta,
            bc: bc.to_string(),
            estimate: est.estimate,
            stderr: est.stderr,
            n_eff: est.n_eff,
            code_version: CODE_VERSION.to_string(),
            ..Default::default()
        }
    }

    pub fn radii(mut self, r: u32, big_r: u32) -> Self {
        self.r = Some(r);
        self.big_r = Some(big_r);
        self
    }
}

/// Files are written to a hidden staging directory and moved into place
/// only by [`Staging::commit`]; dropping an uncommitted staging area removes
/// it.
pub struct Staging {
    out: PathBuf,
    dir: PathBuf,
    created_out: bool,
    files: Vec<String>,
    seed: u64,
    hash: String,
    committed: bool,
}

impl Staging {
    pub fn new(out: &Path, seed: u64, hash: &str) -> Result<Self> {
        let created_out = !out.exists();
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        let dir = out.join(format!(".staging-{}-{}", &hash[..12], std::process::id()));
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Staging {
            out: out.to_path_buf(),
            dir,
            created_out,
            files: Vec::new(),
            seed,
            hash: hash.to_string(),
            committed: false,
        })
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        fs::write(self.dir.join(name), bytes).with_context(|| format!("writing {name}"))?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    /// Writes rows as RFC 4180 CSV, stamping seed and config hash.
    pub fn write_rows(&mut self, name: &str, rows: &[Row]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            let mut r = r.clone();
            r.seed = self.seed;
            r.config_hash = self.hash.clone();
            w.serialize(r)?;
        }
        if rows.is_empty() {
            w.write_record(HEADER)?;
        }
        let bytes = w.into_inner().map_err(|e| anyhow::anyhow!(e.to_string()))?;
        self.write_bytes(name, &bytes)
    }

    pub fn write_csv<T: Serialize>(&mut self, name: &str, records: &[T]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in records {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| anyhow::anyhow!(e.to_string()))?;
        self.write_bytes(name, &bytes)
    }

    /// Moves the staged files into the output directory and writes the
    /// manifest.
    pub fn commit(mut self) -> Result<Vec<PathBuf>> {
        let mut lines = String::new();
        let mut paths = Vec::new();
        for f in &self.files {
            let bytes = fs::read(self.dir.join(f))?;
            lines.push_str(&format!("{}  {}\n", hex::encode(Sha256::digest(&bytes)), f));
        }
        for f in &self.files {
            let dst = self.out.join(f);
            fs::rename(self.dir.join(f), &dst)?;
            paths.push(dst);
        }
        let mut m = fs::File::create(self.out.join(MANIFEST))?;
        writeln!(m, "# config_hash {}", self.hash)?;
        writeln!(m, "# seed {}", self.seed)?;
        writeln!(m, "# code_version {CODE_VERSION}")?;
        m.write_all(lines.as_bytes())?;
        fs::remove_dir_all(&self.dir)?;
        self.committed = true;
        paths.push(self.out.join(MANIFEST));
        Ok(paths)
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.dir);
            if self.created_out {
                let _ = fs::remove_dir(&self.out);
            }
        }
    }
}

const HEADER: [&str; 15] = [
    "observable",
    "r",
    "R",
    "eps",
    "x",
    "y",
    "N",
    "delta",
    "bc",
    "estimate",
    "stderr",
    "n_eff",
    "seed",
    "config_hash",
    "code_version",
];

/// Checks every checksum listed in the manifest of `out`; returns the
/// mismatching or missing files.
pub fn check_manifest(out: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(out.join(MANIFEST)).with_context(|| format!("reading manifest in {}", out.display()))?;
    let mut bad = Vec::new();
    for line in text.lines().filter(|l| !l.starts_with('#') && !l.is_empty()) {
        let (sum, name) = line.split_once("  ").context("malformed manifest line")?;
        match fs::read(out.join(name)) {
            Ok(bytes) if hex::encode(Sha256::digest(&bytes)) == sum => {}
            _ => bad.push(name.to_string()),
        }
    }
    Ok(bad)
}

pub fn read_rows(path: &Path) -> Result<Vec<Row>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    r.deserialize().map(|x| x.map_err(Into::into)).collect()
}

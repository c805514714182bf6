//! `fkq4`: run experiments, verify the fast property suites, report results.

mod config;
mod output;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use fkq4::verify::{run_all, Goldens, VerifyOptions};

use crate::config::ExperimentConfig;
use crate::output::{check_manifest, read_rows, MANIFEST, RESULTS};

#[derive(Parser)]
#[command(name = "fkq4", version, about = "Critical FK(q=4) experiments")]
struct Cli {
    /// Worker threads for chain fan-out (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Default output root.
        #[arg(long, env = "FKQ4_OUT", hide_env_values = true)]
        out_root: Option<PathBuf>,
    },
    /// Run the fast property suites.
    Verify {
        /// JSON file of reference values for the quadrature suite.
        #[arg(long)]
        goldens: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Writes `verify.json` into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Smaller sample sizes.
        #[arg(long)]
        quick: bool,
    },
    /// Check an output directory against its manifest and print its results.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
}

/// Failure reason printed as one line: `error: <code>: <message>`.
struct Failure {
    code: &'static str,
    err: anyhow::Error,
}

fn fail(code: &'static str) -> impl FnOnce(anyhow::Error) -> Failure {
    move |err| Failure { code, err }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(k) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: threads: {}", one_line(&e.to_string()));
            return ExitCode::from(2);
        }
    }
    let res = match cli.cmd {
        Cmd::Run {
            config,
            seed,
            out,
            out_root,
        } => cmd_run(&config, seed, out.as_deref(), out_root.as_deref()),
        Cmd::Verify {
            goldens,
            seed,
            out,
            quick,
        } => cmd_verify(goldens.as_deref(), seed, out.as_deref(), quick),
        Cmd::Report { out } => cmd_report(&out),
    };
    match res {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}: {}", f.code, one_line(&format!("{:#}", f.err)));
            ExitCode::from(if f.code == "invalid-config" { 2 } else { 1 })
        }
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn cmd_run(path: &Path, seed: Option<u64>, out: Option<&Path>, root: Option<&Path>) -> Result<ExitCode, Failure> {
    let mut cfg = ExperimentConfig::load(path).map_err(fail("invalid-config"))?;
    if let Some(s) = seed {
        cfg.set_seed(s);
    }
    let out = run::resolve_out(out, root, &cfg);
    let hash = cfg.hash();
    let ctx = run::RunContext { cfg: &cfg, hash, out };
    let files = run::execute(&ctx).map_err(|e| {
        let code = if e.downcast_ref::<fkq4::Error>().is_some_and(|x| matches!(x, fkq4::Error::InvalidInput(_))) {
            "invalid-config"
        } else {
            "run-failed"
        };
        Failure { code, err: e }
    })?;
    for f in files {
        println!("{}", f.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(goldens: Option<&Path>, seed: Option<u64>, out: Option<&Path>, quick: bool) -> Result<ExitCode, Failure> {
    let g = match goldens {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .with_context(|| format!("reading {}", p.display()))
                .map_err(fail("goldens"))?;
            serde_json::from_str::<Goldens>(&text)
                .with_context(|| format!("golden file {} is corrupted", p.display()))
                .map_err(fail("goldens"))?
        }
        None => Goldens::default(),
    };
    let mut opts = VerifyOptions::default();
    if quick {
        opts.samples = 20_000;
        opts.cosine_configs = 20;
        opts.euler_random = 1000;
    }
    if let Some(s) = seed {
        opts.seed = s;
    }
    let reports = run_all(&opts, &g);
    for r in &reports {
        println!("{}", r.line());
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)
            .and_then(|_| std::fs::write(dir.join("verify.json"), serde_json::to_vec_pretty(&reports).unwrap_or_default()))
            .with_context(|| format!("writing verify.json in {}", dir.display()))
            .map_err(fail("io"))?;
    }
    Ok(if reports.iter().all(|r| r.passed) { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn cmd_report(out: &Path) -> Result<ExitCode, Failure> {
    let bad = check_manifest(out).map_err(fail("report"))?;
    if !bad.is_empty() {
        return Err(Failure {
            code: "checksum",
            err: anyhow::anyhow!("{MANIFEST} mismatch for {}", bad.join(", ")),
        });
    }
    let results = out.join(RESULTS);
    if results.exists() {
        let rows = read_rows(&results).map_err(fail("report"))?;
        println!("{:<22} {:>6} {:>6} {:>8} {:>8} {:>6} {:>11} {:>12} {:>10}", "observable", "r", "R", "x", "eps", "N", "bc", "estimate", "stderr");
        let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_else(|| "-".into());
        let opti = |v: Option<u32>| v.map(|x| x.to_string()).unwrap_or_else(|| "-".into());
        for r in rows {
            println!(
                "{:<22} {:>6} {:>6} {:>8} {:>8} {:>6} {:>11} {:>12.6} {:>10.2e}",
                r.observable,
                opti(r.r),
                opti(r.big_r),
                opt(r.x),
                opt(r.eps),
                r.n,
                r.bc,
                r.estimate,
                r.stderr
            );
        }
    }
    for name in ["fit.json", "relations.json", "acceptance.json"] {
        let p = out.join(name);
        if p.exists() {
            let text = std::fs::read_to_string(&p).map_err(|e| fail("report")(e.into()))?;
            println!("{name}:\n{}", text.trim_end());
        }
    }
    Ok(ExitCode::SUCCESS)
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fkq4"));
    c.env_remove("FKQ4_OUT");
    c
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .args(["--threads", "1", "run", "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const ARMS: &str = r#"{
  "kind": "arms", "seed": 5,
  "run": {"chains": 2, "burn_in": 30, "samples": 64, "thin": 1, "checkpoint_every": 16},
  "params": {"half_width": 16, "bc": ["wired", "free"], "radii": [2, 4, 8, 16]}
}"#;

#[test]
fn arms_run_is_deterministic_with_provenance() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "arms.json", ARMS);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(run(&cfg, &a, &[]).status.success());
    assert!(run(&cfg, &b, &[]).status.success());
    let ca = fs::read(a.join("results.csv")).unwrap();
    assert_eq!(ca, fs::read(b.join("results.csv")).unwrap());
    let text = String::from_utf8(ca).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "observable,r,R,eps,x,y,N,delta,bc,estimate,stderr,n_eff,seed,config_hash,code_version"
    );
    let body: Vec<&str> = lines.collect();
    // 6 pairs, two observables, three bc labels
    assert_eq!(body.len(), 36);
    assert!(body.iter().all(|l| l.contains(",5,") && l.ends_with(env!("CARGO_PKG_VERSION"))));
    assert!(body.iter().any(|l| l.starts_with("pi1,2,16,") && l.contains(",avg,")));
    assert!(!a.join("checkpoints").exists());
    let manifest = fs::read_to_string(a.join("MANIFEST.txt")).unwrap();
    for f in ["results.csv", "series.json", "config.json"] {
        assert!(manifest.contains(f), "{f} missing from manifest");
    }
    let c = run(&cfg, &tmp.path().join("c"), &["--seed", "6"]);
    assert!(c.status.success());
    assert_ne!(fs::read(tmp.path().join("c/results.csv")).unwrap(), fs::read(a.join("results.csv")).unwrap());
}

#[test]
fn fit_reads_series_from_a_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "arms.json",
        &ARMS.replace("[2, 4, 8, 16]", "[1, 2, 4, 8, 16]").replace("\"samples\": 64", "\"samples\": 200"),
    );
    let a = tmp.path().join("a");
    assert!(run(&cfg, &a, &[]).status.success());
    let fit = format!(
        r#"{{"kind": "fit", "seed": 1, "params": {{"inputs": [{:?}], "observables": ["pi1"], "exclude_largest": 0, "resamples": 200}}}}"#,
        a.join("series.json")
    );
    let fcfg = write_config(tmp.path(), "fit.json", &fit);
    let o = run(&fcfg, &tmp.path().join("f"), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("f/fit.json")).unwrap()).unwrap();
    let rep = &v["data"][0];
    assert_eq!(rep["observable"], "pi1");
    assert_eq!(rep["points"].as_array().unwrap().len(), 4);
    let slope = rep["slope"].as_f64().unwrap();
    assert!(slope < 0.0 && slope > -1.0, "{slope}");
    assert_eq!(v["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn invalid_config_gives_one_line_and_no_output() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    for (name, text) in [
        ("bad.json", "{\"kind\": \"arms\", \"params\": {}}"),
        ("typo.json", &ARMS.replace("radii", "radius")),
        ("junk.json", "not json"),
    ] {
        let cfg = write_config(tmp.path(), name, text);
        let o = run(&cfg, &out, &[]);
        assert_eq!(o.status.code(), Some(2), "{name}");
        let e = stderr(&o);
        assert_eq!(e.lines().count(), 1, "{e}");
        assert!(e.starts_with("error: invalid-config: "), "{e}");
        assert!(!out.exists());
    }
    let o = run(&tmp.path().join("missing.json"), &out, &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failed_run_removes_partial_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    // the pattern does not fit in the box, which is only found at run time
    let cfg = write_config(
        tmp.path(),
        "mf.json",
        r#"{"kind": "mformula", "run": {"samples": 4, "burn_in": 2},
            "params": {"extent": 1.0, "den": [8], "bc": "wired",
            "patterns": [{"name": "far", "centers": [[-0.9, 0.0], [0.9, 0.0]], "charges": [1, -1], "eps": 0.2}]}}"#,
    );
    let out = tmp.path().join("o");
    let o = run(&cfg, &out, &[]);
    assert!(!o.status.success());
    assert_eq!(stderr(&o).lines().count(), 1);
    assert!(!out.exists());
    // an existing directory is kept but left without staging debris
    fs::create_dir(&out).unwrap();
    fs::write(out.join("keep.txt"), "x").unwrap();
    assert!(!run(&cfg, &out, &[]).status.success());
    let names: Vec<_> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names, vec![std::ffi::OsString::from("keep.txt")]);
}

#[test]
fn relations_are_exact() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "rel.json",
        r#"{"kind": "relations", "params": {"xi1": "1/8", "iota": "1/2"}}"#,
    );
    let out = tmp.path().join("o");
    assert!(run(&cfg, &out, &[]).status.success());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("relations.json")).unwrap()).unwrap();
    let d = &v["data"];
    for (k, want) in [("nu", "2/3"), ("beta", "1/12"), ("gamma", "7/6"), ("alpha", "2/3"), ("eta", "1/4"), ("volume_tail", "1/15")] {
        assert_eq!(d[k], want, "{k}");
    }
    let bad = write_config(
        tmp.path(),
        "bad.json",
        r#"{"kind": "relations", "params": {"xi1": "3/2", "iota": "1/2"}}"#,
    );
    let o = run(&bad, &tmp.path().join("p"), &[]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn other_kinds_produce_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        (
            "sample",
            r#"{"kind": "sample", "run": {"samples": 40, "burn_in": 10}, "params": {"half_width": 8, "bc": "free"}}"#,
            vec!["results.csv", "trace.csv"],
        ),
        (
            "delta",
            r#"{"kind": "delta", "run": {"samples": 40, "burn_in": 10}, "params": {"half_width": 8, "sides": [2, 4]}}"#,
            vec!["results.csv", "series.json"],
        ),
        (
            "two-point",
            r#"{"kind": "two-point", "run": {"samples": 40, "burn_in": 10}, "params": {"half_width": 8, "bc": ["wired"], "distances": [1, 2], "window": 2}}"#,
            vec!["results.csv", "series.json"],
        ),
        (
            "mformula",
            r#"{"kind": "mformula", "run": {"samples": 20, "burn_in": 10},
                "params": {"extent": 1.0, "den": [8, 16], "bc": "wired",
                "patterns": [{"name": "dipole", "centers": [[-0.25, 0.0], [0.25, 0.0]], "charges": [1, -1], "eps": 0.125}]}}"#,
            vec!["results.csv", "mformula.csv"],
        ),
        (
            "cdelta",
            r#"{"kind": "cdelta", "run": {"samples": 30, "burn_in": 10}, "params": {"eps": [1.0], "ladder": [32]}}"#,
            vec!["results.csv", "acceptance.json"],
        ),
        (
            "heights",
            r#"{"kind": "heights", "run": {"samples": 30, "burn_in": 10}, "params": {"half_width": 8, "bc": "wired", "faces": [[0, 0], [3, 2]]}}"#,
            vec!["results.csv"],
        ),
    ];
    for (name, text, files) in cases {
        let cfg = write_config(tmp.path(), &format!("{name}.json"), text);
        let out = tmp.path().join(name);
        let o = run(&cfg, &out, &[]);
        assert!(o.status.success(), "{name}: {}", stderr(&o));
        for f in files {
            assert!(out.join(f).exists(), "{name}: {f}");
        }
        let r = bin().args(["report", "--out"]).arg(&out).output().unwrap();
        assert!(r.status.success(), "{name}");
    }
    let mf = fs::read_to_string(tmp.path().join("mformula/mformula.csv")).unwrap();
    let mut lines = mf.lines();
    assert!(lines.next().unwrap().starts_with("pattern,delta,N,estimate,stderr,prediction,relative_error"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn env_var_sets_the_default_root() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "rel.json",
        r#"{"kind": "relations", "params": {"xi1": "1/8", "iota": "1/2"}}"#,
    );
    let root = tmp.path().join("root");
    let o = bin().env("FKQ4_OUT", &root).args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert!(o.status.success());
    let dirs: Vec<_> = fs::read_dir(&root).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    assert_eq!(dirs.len(), 1);
    assert!(dirs[0].starts_with("relations-"));
}

#[test]
fn report_detects_tampering() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "s.json",
        r#"{"kind": "sample", "run": {"samples": 20, "burn_in": 5}, "params": {"half_width": 4, "bc": "wired"}}"#,
    );
    let out = tmp.path().join("o");
    assert!(run(&cfg, &out, &[]).status.success());
    let ok = bin().args(["report", "--out"]).arg(&out).output().unwrap();
    assert!(ok.status.success());
    assert!(String::from_utf8_lossy(&ok.stdout).contains("density"));
    fs::write(out.join("trace.csv"), "x").unwrap();
    let bad = bin().args(["report", "--out"]).arg(&out).output().unwrap();
    assert!(!bad.status.success());
    assert!(stderr(&bad).starts_with("error: checksum: "));
}

#[test]
fn verify_suites_and_goldens() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("new/dir");
    let o = bin().args(["verify", "--quick", "--out"]).arg(&out).output().unwrap();
    let text = String::from_utf8_lossy(&o.stdout).into_owned();
    assert!(o.status.success(), "{text}");
    for s in ["sampler-exactness", "cosine-identity", "euler-loop-count", "quadrature-goldens"] {
        assert!(text.contains(&format!("PASS {s}")), "{s}: {text}");
    }
    assert!(out.join("verify.json").exists());

    let corrupt = write_config(tmp.path(), "g.json", "{\"b0\": -0.03125, \"b0_tol\": ");
    let o = bin().args(["verify", "--quick", "--goldens"]).arg(&corrupt).output().unwrap();
    assert!(!o.status.success());
    assert!(stderr(&o).starts_with("error: goldens: golden file"), "{}", stderr(&o));

    let wrong = write_config(
        tmp.path(),
        "w.json",
        r#"{"b0": -0.03, "b0_tol": 1e-6, "two_ball": 0.6642653470506328, "two_ball_tol": 1e-8, "b_eps_tol": 1e-8}"#,
    );
    let o = bin().args(["verify", "--quick", "--goldens"]).arg(&wrong).output().unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL quadrature-goldens"));
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn ztf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ztf")).args(args).output().expect("binary runs")
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A signal on the default lattice (n = 1, K = 8, C = 24) with `f(0) = 3`,
/// `f(1) = 4i`.
fn five(dir: &TempDir) -> PathBuf {
    let values: Vec<String> = (-24..=24)
        .map(|k| match k {
            0 => "[3.0,0.0]".to_string(),
            1 => "[0.0,4.0]".to_string(),
            _ => "[0.0,0.0]".to_string(),
        })
        .collect();
    let p = path(dir, "five.json");
    std::fs::write(&p, format!(r#"{{"n":1,"K":8,"C":24,"values":[{}]}}"#, values.join(","))).unwrap();
    p
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap().trim().to_string()
}

#[test]
fn m2_norm_of_a_norm_five_signal() {
    let dir = TempDir::new().unwrap();
    let f = five(&dir);
    let out = ztf(&["norm", "--space", "M2", "--input", s(&f)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let value: f64 = text.parse().unwrap();
    assert!((value - 5.0).abs() <= 1e-10, "{text}");
    assert_eq!(text.chars().filter(|c| c.is_ascii_digit()).count(), 17, "{text}");
    // power(2) Luxemburg norm is the ℓ² norm
    let out = ztf(&["norm", "--space", "l-phi", "--phi", "power:2", "--input", s(&f)]);
    let value: f64 = stdout(&out).parse().unwrap();
    assert!((value - 5.0).abs() <= 1e-12);
}

#[test]
fn usage_errors_exit_2() {
    let out = ztf(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    let dir = TempDir::new().unwrap();
    let f = five(&dir);
    assert_eq!(ztf(&["norm", "--space", "Q7", "--input", s(&f)]).status.code(), Some(2));
    assert_eq!(ztf(&["verify", "--check", "foo"]).status.code(), Some(2));
    let bad = path(&dir, "bad.json");
    std::fs::write(&bad, r#"{"lattice": {"n": 1, "K": 8, "C": 3}}"#).unwrap();
    assert_eq!(ztf(&["--config", s(&bad), "verify"]).status.code(), Some(2));
    std::fs::write(&bad, r#"{"unknown_field": true}"#).unwrap();
    assert_eq!(ztf(&["--config", s(&bad), "verify"]).status.code(), Some(2));
}

#[test]
fn coarse_torus_is_a_numeric_failure() {
    let dir = TempDir::new().unwrap();
    let f = five(&dir);
    let out = ztf(&["-M", "5", "stft", "--signal", s(&f), "--m-radius", "4", "-o", s(&path(&dir, "v.json"))]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn verify_default_config_passes() {
    let dir = TempDir::new().unwrap();
    let report = path(&dir, "report.jsonl");
    let out = ztf(&["--config", "default", "verify", "-o", s(&report)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&report).unwrap();
    assert_eq!(text.lines().count(), ztf::verify::registry().len());
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["violations"], 0, "{line}");
    }
    let diag: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(path(&dir, "report.jsonl.diagnostics.json")).unwrap()).unwrap();
    assert!(diag["orlicz_modulation_boundedness"]["ratio.max"].is_f64());
    let config = std::fs::read_to_string(path(&dir, "report.jsonl.config.json")).unwrap();
    assert!(config.contains("\"seed\": 20240601"));
}

#[test]
fn violations_exit_1() {
    let dir = TempDir::new().unwrap();
    let config = path(&dir, "tight.json");
    // a negative margin of ~1e-16 is a violation at tolerance zero
    std::fs::write(&config, r#"{"checks": [{"id": "plancherel", "trials": 20, "tolerance": 0.0}]}"#).unwrap();
    let report = path(&dir, "r.jsonl");
    let out = ztf(&["--config", s(&config), "verify", "-o", s(&report)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(std::fs::read_to_string(&report).unwrap().contains("\"id\":\"plancherel\""));
}

#[test]
fn reports_are_identical_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    let run = |threads: &str, name: &str| {
        let report = path(&dir, name);
        let out = ztf(&[
            "--threads", threads, "-K", "4", "verify", "--check", "holder_single", "--check", "trace_class_bound",
            "--check", "inversion", "--trials", "40", "-o", s(&report),
        ]);
        assert_eq!(out.status.code(), Some(0));
        std::fs::read(&report).unwrap()
    };
    let a = run("1", "a.jsonl");
    assert_eq!(a, run("3", "b.jsonl"));
    assert_eq!(a, run("1", "c.jsonl"));
}

#[test]
fn generate_transform_and_operate() {
    let dir = TempDir::new().unwrap();
    let f = path(&dir, "f.json");
    let sigma = path(&dir, "sigma.json");
    let g = path(&dir, "g.json");
    for (kind, out) in [("gaussian-signal", &f), ("indicator-symbol", &sigma), ("window", &g)] {
        let o = ztf(&["-K", "4", "--seed", "9", "gen", kind, "-o", s(out)]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let v = path(&dir, "v.json");
    assert_eq!(ztf(&["stft", "--signal", s(&f), "-o", s(&v)]).status.code(), Some(0));
    // ‖V_g f‖_{L²} = ‖f‖₂ for a unit window, by two routes
    let l2: f64 = stdout(&ztf(&["-K", "4", "norm", "--space", "L-phi", "--phi", "power:2", "--input", s(&v)]))
        .parse()
        .unwrap();
    let m2: f64 = stdout(&ztf(&["norm", "--space", "M2", "--input", s(&f)])).parse().unwrap();
    assert!((l2 - m2).abs() <= 1e-12 * m2);

    let out = path(&dir, "out.json");
    let o = ztf(&["-K", "4", "locop", "--symbol", s(&sigma), "--g1", s(&g), "--apply", s(&f), "-o", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let applied = ztf::Signal::from_json(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(applied.spec(), ztf::Signal::from_json(&std::fs::read_to_string(&f).unwrap()).unwrap().spec());

    let kernel = path(&dir, "k.json");
    let o = ztf(&["-K", "4", "locop", "--symbol", s(&sigma), "--export", s(&kernel)]);
    assert_eq!(o.status.code(), Some(0));
    let from_kernel = stdout(&ztf(&["spectrum", "--kernel", s(&kernel), "--p", "1,2,inf"]));
    let from_symbol = stdout(&ztf(&["-K", "4", "spectrum", "--symbol", s(&sigma)]));
    assert_eq!(from_kernel, from_symbol);
    let summary: serde_json::Value = serde_json::from_str(&from_kernel).unwrap();
    let s1 = summary["schatten"]["1"].as_f64().unwrap();
    let trace = summary["trace"][0].as_f64().unwrap();
    // nonnegative symbol, equal windows: S₁ = trace
    assert!((s1 - trace).abs() <= 1e-10 * s1);

    let raw = path(&dir, "k.bin");
    let o = ztf(&["-K", "4", "locop", "--symbol", s(&sigma), "--export", s(&raw), "--raw"]);
    assert_eq!(o.status.code(), Some(0));
    let size = 2 * 3 * 4 + 1;
    assert_eq!(std::fs::metadata(&raw).unwrap().len(), (size * size * 16) as u64);
}

#[test]
fn locop_needs_exactly_one_action() {
    let dir = TempDir::new().unwrap();
    let f = five(&dir);
    assert_eq!(ztf(&["locop", "--symbol", s(&f)]).status.code(), Some(2));
    assert_eq!(ztf(&["locop", "--symbol", s(&f), "--apply", s(&f), "--export", "x"]).status.code(), Some(2));
}

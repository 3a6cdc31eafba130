use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ssm-resolve"))
}

fn system(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../systems").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().arg("--quiet").args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn frc_components(path: &Path) -> usize {
    let text = std::fs::read_to_string(path).unwrap();
    let line = text.lines().find(|l| l.starts_with("# components ")).unwrap();
    line["# components ".len()..].parse().unwrap()
}

#[test]
fn frc_counts_components_on_either_side_of_the_merger() {
    let dir = tempfile::tempdir().unwrap();
    let sp = system("shaw_pierre.json");
    for (eps, expected) in [("0.0027", 2), ("0.0029", 1)] {
        let out = dir.path().join(format!("frc_{eps}.csv"));
        ok(&["frc", "--system", s(&sp), "--eps", eps, "--out", s(&out)]);
        assert_eq!(frc_components(&out), expected, "eps = {eps}");
    }
}

#[test]
fn frc_csv_rows_match_the_column_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("frc.csv");
    let svg = dir.path().join("frc.svg");
    ok(&["frc", "--system", s(&system("shaw_pierre.json")), "--eps", "0.0027", "--out", s(&out), "--svg", s(&svg)]);
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines().skip_while(|l| l.starts_with('#'));
    assert_eq!(lines.next().unwrap(), "component,branch,Omega,rho,psi,stability,physical_amplitude");
    let mut n = 0;
    for row in lines {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!(f.len(), 7, "{row}");
        assert!(["K+", "K-", "fold"].contains(&f[1]), "{row}");
        assert!(f[2].parse::<f64>().unwrap() > 0.0);
        n += 1;
    }
    assert!(n > 100);
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
}

#[test]
fn isola_on_the_beam_reports_leading_isola() {
    let dir = tempfile::tempdir().unwrap();
    let beam = dir.path().join("beam.json");
    let out = dir.path().join("isola.json");
    ok(&["beam", "--elements", "25", "--out", s(&beam)]);
    ok(&["isola", "--system", s(&beam), "--orders", "1..15", "--eps", "0.002", "--out", s(&out)]);
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let leading = &doc["report"]["leading"];
    let rho1 = leading["rho1"].as_f64().unwrap();
    let eps_m = leading["eps_m"].as_f64().unwrap();
    assert!((rho1 / 0.413 - 1.0).abs() < 0.01, "rho1 = {rho1}");
    assert!((eps_m / 0.0018 - 1.0).abs() < 0.05, "eps_m = {eps_m}");
    assert_eq!(doc.as_object().unwrap().keys().next().unwrap(), "header");
}

/// Uncoupled oscillators whose second decay rate is exactly twice the first.
const RESONANT: &str = r#"{
  "n": 2,
  "mass": [1.0, 0.0, 0.0, 1.0],
  "damping": [0.02, 0.0, 0.0, 0.04],
  "stiffness": [1.0, 0.0, 0.0, 9.0],
  "nonlinear": [{ "dof": 0, "coefficient": 0.5, "exponents": [3, 0, 0, 0] }],
  "forcing": [1.0, 0.0],
  "forcing_harmonic": 1,
  "normalization": "first_position",
  "coordinates": {}
}
"#;

#[test]
fn resonant_system_fails_naming_the_triple() {
    let dir = tempfile::tempdir().unwrap();
    let sys = dir.path().join("resonant.json");
    std::fs::write(&sys, RESONANT).unwrap();
    let report = dir.path().join("report.json");
    let out = run(&["analyze", "--system", s(&sys), "--out", s(&report)]);
    assert_eq!(out.status.code(), Some(4));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("(2, 0, 3)"), "{err}");
    assert!(!report.exists());
    // the override lets the analysis proceed
    ok(&["analyze", "--system", s(&sys), "--skip-nonresonance", "--out", s(&report)]);
    assert!(report.exists());
}

#[test]
fn beam_round_trip_preserves_the_spectrum_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let beam = dir.path().join("beam.json");
    let report = dir.path().join("analyze.json");
    ok(&["beam", "--out", s(&beam)]);
    ok(&["analyze", "--system", s(&beam), "--out", s(&report)]);
    let written: Value = serde_json::from_str(&std::fs::read_to_string(&beam).unwrap()).unwrap();
    let read: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let l1 = &written["header"]["eigenvalues"]["lambda1"];
    let bits = |v: &Value| v.as_f64().unwrap().to_bits();
    assert_eq!(bits(&l1[0]), bits(&read["eigenvalues"][0][0]));
    assert_eq!(bits(&l1[1]), bits(&read["eigenvalues"][0][1]));
    // λ₂ is the exact conjugate
    assert_eq!(bits(&l1[0]), bits(&read["eigenvalues"][1][0]));
    assert_eq!((-read["eigenvalues"][1][1].as_f64().unwrap()).to_bits(), bits(&l1[1]));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let sp = system("shaw_pierre.json");
    let outputs = |tag: &str| -> Vec<Vec<u8>> {
        let p = |name: &str| dir.path().join(format!("{tag}_{name}"));
        ok(&["frc", "--system", s(&sp), "--eps", "0.0027", "--out", s(&p("frc.csv")), "--svg", s(&p("frc.svg"))]);
        ok(&["isola", "--system", s(&sp), "--eps", "0.0027", "--out", s(&p("isola.json")), "--roots-svg", s(&p("roots.svg"))]);
        ok(&["analyze", "--system", s(&sp), "--order", "5", "--out", s(&p("a.json")), "--dump-ssm", s(&p("ssm.txt")), "--dump-omega", "1.73"]);
        ok(&["verify", "--system", s(&sp), "--eps", "0.0027", "--omega", "1.72:1.74:2", "--monitor", "y1", "--out", s(&p("sweep.csv"))]);
        ["frc.csv", "frc.svg", "isola.json", "roots.svg", "a.json", "ssm.txt", "sweep.csv"]
            .iter()
            .map(|n| std::fs::read(p(n)).unwrap())
            .collect()
    };
    assert_eq!(outputs("first"), outputs("second"));
}

#[test]
fn headers_carry_version_hash_and_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("frc.csv");
    ok(&["frc", "--system", s(&system("shaw_pierre.json")), "--eps", "0.0027", "--out", s(&out)]);
    let text = std::fs::read_to_string(&out).unwrap();
    let head: Vec<&str> = text.lines().take(4).collect();
    assert_eq!(head[0], format!("# ssm-resolve {}", env!("CARGO_PKG_VERSION")));
    assert_eq!(head[1], "# command frc");
    let hash = head[2].strip_prefix("# config_sha256 ").unwrap();
    assert_eq!(hash.len(), 64);
    assert!(head[3].starts_with("# eigenvalues count 4 lambda1 -1.5e-2 1.7319858544456992e0"));
    // a different setting changes the hash
    let other = dir.path().join("frc2.csv");
    ok(&["frc", "--system", s(&system("shaw_pierre.json")), "--eps", "0.0029", "--out", s(&other)]);
    assert!(!std::fs::read_to_string(&other).unwrap().contains(hash));
}

#[test]
fn failed_runs_leave_no_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("frc.csv");
    let svg = dir.path().join("missing").join("frc.svg");
    let out = run(&["frc", "--system", s(&system("shaw_pierre.json")), "--eps", "0.0027", "--out", s(&csv), "--svg", s(&svg)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!csv.exists());

    let sweep = dir.path().join("sweep.csv");
    let out = run(&["verify", "--system", s(&system("shaw_pierre.json")), "--eps", "0.001", "--omega", "1.7", "--monitor", "nowhere", "--out", s(&sweep)]);
    assert!(!out.status.success());
    assert!(!sweep.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn invalid_arguments_are_usage_errors() {
    let sp = system("shaw_pierre.json");
    let out = run(&["frc", "--system", s(&sp), "--eps", "0.001", "--order", "4", "--out", "x.csv"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["isola", "--system", s(&sp), "--eps", "0.001", "--orders", "5..2", "--out", "x.json"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["analyze", "--system", "/nonexistent/system.json"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("tol.json");
    std::fs::write(&config, r#"{ "fold": -1.0 }"#).unwrap();
    let out = dir.path().join("frc.csv");
    let sp = system("shaw_pierre.json");
    let args = ["frc", "--system", s(&sp), "--eps", "0.0027", "--out", s(&out)];
    let bad = bin().args(["--quiet", "--config", s(&config)]).args(args).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    let good = bin().args(["--quiet", "--config", s(&config), "--tol-fold", "1e-9"]).args(args).output().unwrap();
    assert!(good.status.success());

    std::fs::write(&config, r#"{ "folding": 1.0 }"#).unwrap();
    let unknown = bin().args(["--quiet", "--config", s(&config)]).args(args).output().unwrap();
    assert_eq!(unknown.status.code(), Some(3));
}

//! Interface tests: exit codes, report schema, bundle round trips,
//! seeding semantics.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_specsysid"));
    c.env_remove("SPECSYSID_SEED");
    c
}

fn tmpdir(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("specsysid-cli-{}-{tag}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

const J2_BLOCKS: &str = r#"{"blocks":[{"lambda":[0.5,0],"size":2}]}"#;

#[test]
fn unknown_subcommand_exits_64() {
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(64));
}

#[test]
fn validation_errors_exit_2_with_error_object() {
    let out = run(&["power-bounds", "--blocks", "not json", "--horizon", "4"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains(r#""error""#) && stderr.contains(r#""kind":"parse""#), "{stderr}");
}

#[test]
fn numerical_errors_exit_3() {
    let dir = tmpdir("rank");
    let bundle = dir.join("b");
    let out = run(&[
        "simulate",
        "--blocks",
        r#"{"blocks":[{"lambda":[0.9,0],"size":4}]}"#,
        "--steps",
        "3",
        "--out",
        bundle.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let out = run(&["ols", "--bundle", bundle.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains(r#""kind":"rank""#), "{stderr}");
}

#[test]
fn unstable_power_bounds_rejected() {
    let out = run(&[
        "power-bounds",
        "--blocks",
        r#"{"blocks":[{"lambda":[1.1,0],"size":2}]}"#,
        "--horizon",
        "4",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let dir = tmpdir("det");
    for name in ["r1", "r2"] {
        let out = run(&[
            "simulate",
            "--blocks",
            J2_BLOCKS,
            "--steps",
            "60",
            "--seed",
            "7",
            "--out",
            dir.join(name).to_str().unwrap(),
        ]);
        assert!(out.status.success());
    }
    for f in ["A.csv", "X_minus.csv", "X_plus.csv", "E.csv", "meta.json"] {
        let a = std::fs::read(dir.join("r1").join(f)).unwrap();
        let b = std::fs::read(dir.join("r2").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs between identical runs");
    }
    let meta = std::fs::read_to_string(dir.join("r1/meta.json")).unwrap();
    assert!(meta.contains("chacha12-boxmuller-v1"));
    assert!(meta.contains("matrix_fnv1a64"));
}

#[test]
fn env_seed_overrides_flag() {
    let dir = tmpdir("env");
    let out = bin()
        .env("SPECSYSID_SEED", "777")
        .args([
            "simulate",
            "--blocks",
            J2_BLOCKS,
            "--steps",
            "5",
            "--seed",
            "9",
            "--out",
            dir.join("b").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let meta = std::fs::read_to_string(dir.join("b/meta.json")).unwrap();
    assert!(meta.contains("\"seed\":777"), "{meta}");
}

#[test]
fn ols_round_trip_writes_diagnostics() {
    let dir = tmpdir("ols");
    let bundle = dir.join("b");
    assert!(run(&[
        "simulate",
        "--blocks",
        J2_BLOCKS,
        "--steps",
        "120",
        "--seed",
        "5",
        "--out",
        bundle.to_str().unwrap(),
    ])
    .status
    .success());
    assert!(run(&["ols", "--bundle", bundle.to_str().unwrap()]).status.success());
    let text = std::fs::read_to_string(bundle.join("diagnostics.json")).unwrap();
    for key in [
        "\"estimate\"",
        "\"frob_error\"",
        "\"distances\"",
        "\"singular_values\"",
        "\"constraints\"",
        "\"sandwiches\"",
        "\"negative_second_moment\"",
    ] {
        assert!(text.contains(key), "missing {key}");
    }
}

#[test]
fn tampered_bundle_is_rejected() {
    let dir = tmpdir("tamper");
    let bundle = dir.join("b");
    assert!(run(&[
        "simulate",
        "--blocks",
        J2_BLOCKS,
        "--steps",
        "30",
        "--seed",
        "5",
        "--out",
        bundle.to_str().unwrap(),
    ])
    .status
    .success());
    // corrupt one state entry; the recursion check must catch it
    let path = bundle.join("X_plus.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[0] = lines[0].replacen(',', ",9999", 1);
    std::fs::write(&path, lines.join("\n")).unwrap();
    let out = run(&["ols", "--bundle", bundle.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn power_bounds_certificate_schema() {
    let dir = tmpdir("cert");
    let path = dir.join("cert.json");
    assert!(run(&[
        "power-bounds",
        "--blocks",
        J2_BLOCKS,
        "--horizon",
        "10",
        "--out",
        path.to_str().unwrap(),
    ])
    .status
    .success());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("{\"schema\":\"1\""));
    for name in [
        "ubdexact",
        "best_nonasym_as_printed",
        "best_nonasym_corrected",
        "btrubdstbl_as_printed",
        "btrubdstbl_corrected",
        "qnthdl",
        "two_norm",
    ] {
        assert!(text.contains(&format!("\"kind\":\"{name}\"")), "missing bound {name}");
    }
    // the printed geometric orientation is violated at k = 1 on this
    // block, and the record keeps it visible
    assert!(text.contains("\"violations\":[{"));
    // floats are written with 17 significant digits
    assert!(text.contains("1.2071067811865475e0"), "{}", &text[..300.min(text.len())]);
}

#[test]
fn distance_mc_writes_samples_csv() {
    let dir = tmpdir("dmc");
    let report = dir.join("r.json");
    let csv = dir.join("samples.csv");
    assert!(run(&[
        "distance-mc",
        "--length",
        "10",
        "--dim",
        "3",
        "--trials",
        "1500",
        "--seed",
        "3",
        "--out",
        report.to_str().unwrap(),
        "--samples-csv",
        csv.to_str().unwrap(),
    ])
    .status
    .success());
    let lines = std::fs::read_to_string(&csv).unwrap().lines().count();
    assert_eq!(lines, 1500);
    let text = std::fs::read_to_string(&report).unwrap();
    assert!(text.contains("white-row-distance-mean"));
    assert!(text.contains("\"verdict\":\"Pass\""));
}

#[test]
fn reports_reproduce_modulo_timestamp() {
    let dir = tmpdir("repro");
    let strip = |p: &Path| {
        let text = std::fs::read_to_string(p).unwrap();
        let start = text.find("\"timestamp_ms\":").unwrap();
        let end = text[start..].find(',').unwrap() + start;
        format!("{}{}", &text[..start], &text[end..])
    };
    for sub in ["a", "b"] {
        let cwd = dir.join(sub);
        std::fs::create_dir_all(&cwd).unwrap();
        let out = bin()
            .current_dir(&cwd)
            .args(["lwo", "--case", "ones", "--n", "8", "--trials", "4000", "--seed", "11", "--out", "r.json"])
            .output()
            .unwrap();
        assert!(out.status.success());
    }
    assert_eq!(strip(&dir.join("a/r.json")), strip(&dir.join("b/r.json")));
}

#[test]
fn jobs_flag_does_not_change_results() {
    let dir = tmpdir("jobs");
    let strip = |p: &Path| {
        let text = std::fs::read_to_string(p).unwrap();
        let start = text.find("\"timestamp_ms\":").unwrap();
        let end = text[start..].find(',').unwrap() + start;
        // the jobs echo itself differs; cut the envelope head entirely
        let body = text[end..].find("\"report\":").unwrap() + end;
        text[body..].to_string()
    };
    for (name, jobs) in [("a.json", "1"), ("b.json", "4")] {
        assert!(run(&[
            "distance-mc",
            "--length",
            "12",
            "--dim",
            "4",
            "--lambda",
            "0.6",
            "--trials",
            "3000",
            "--seed",
            "21",
            "--jobs",
            jobs,
            "--out",
            dir.join(name).to_str().unwrap(),
        ])
        .status
        .success());
    }
    assert_eq!(strip(&dir.join("a.json")), strip(&dir.join("b.json")));
}

#[test]
fn covariance_subspace_distance_report() {
    let dir = tmpdir("cov");
    // two canonical directions in R^6
    std::fs::write(dir.join("v.csv"), "1,0\n0,1\n0,0\n0,0\n0,0\n0,0\n").unwrap();
    let path = dir.join("cov.json");
    assert!(run(&[
        "covariance",
        "--length",
        "6",
        "--lambda",
        "0.5",
        "--kmax",
        "4",
        "--subspace",
        dir.join("v.csv").to_str().unwrap(),
        "--out",
        path.to_str().unwrap(),
    ])
    .status
    .success());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("\"expected_distance\":{"), "{text}");
    assert!(text.contains("cauchy_schwarz_cap"));
}

#[test]
fn gamma_reports_witness_and_horizons() {
    let dir = tmpdir("gamma");
    let path = dir.join("g.json");
    assert!(run(&["gamma", "--n", "6", "--rho", "0.9", "--out", path.to_str().unwrap()])
        .status
        .success());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("\"witness_exceeds_one\":true"));
    assert!(text.contains("\"k_hat\""));
    assert!(text.contains("\"k_hat_closed_form\""));
}

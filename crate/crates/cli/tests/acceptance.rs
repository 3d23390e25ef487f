//! Acceptance suite: every release criterion with its tolerance pinned,
//! one pass/fail line per criterion (run with `--nocapture` to see
//! them). Criteria 1-9 exercise the library; criterion 10 drives the
//! installed binary twice and compares reports byte for byte.

use std::process::Command;
use std::time::{Duration, Instant};

use specsysid_core::selftest::{self, CriterionOutcome, DEFAULT_SEED};

const JOBS: usize = 2;

fn check(outcome: CriterionOutcome, budget: Duration) {
    println!("{}", outcome.line());
    for d in &outcome.details {
        println!("    {d}");
    }
    assert!(outcome.passed, "criterion {} failed: {:?}", outcome.id, outcome.details);
    assert!(
        outcome.millis <= budget.as_millis(),
        "criterion {} exceeded its runtime budget: {} ms",
        outcome.id,
        outcome.millis
    );
}

#[test]
fn criterion_01_power_bound_soundness() {
    check(selftest::criterion_power_soundness().unwrap(), Duration::from_secs(60));
}

#[test]
fn criterion_02_threshold_theorem() {
    check(selftest::criterion_threshold_theorem().unwrap(), Duration::from_secs(60));
}

#[test]
fn criterion_03_ols_exactness() {
    check(selftest::criterion_ols_exactness(DEFAULT_SEED).unwrap(), Duration::from_secs(120));
}

#[test]
fn criterion_04_basis_invariance() {
    check(selftest::criterion_basis_invariance(DEFAULT_SEED).unwrap(), Duration::from_secs(30));
}

#[test]
fn criterion_05_covariance_formulas() {
    check(selftest::criterion_covariance_formulas(DEFAULT_SEED).unwrap(), Duration::from_secs(120));
}

#[test]
fn criterion_06_distance_concentration() {
    check(
        selftest::criterion_distance_concentration(DEFAULT_SEED, JOBS).unwrap(),
        Duration::from_secs(180),
    );
}

#[test]
fn criterion_07_sigma1_behavior() {
    check(selftest::criterion_sigma1(DEFAULT_SEED, JOBS).unwrap(), Duration::from_secs(180));
}

#[test]
fn criterion_08_littlewood_offord() {
    check(selftest::criterion_littlewood_offord(DEFAULT_SEED).unwrap(), Duration::from_secs(60));
}

#[test]
fn criterion_09_curse_sweep() {
    check(selftest::criterion_curse_sweep().unwrap(), Duration::from_secs(60));
}

fn run_selftest(dir: &std::path::Path, seed: u64) -> String {
    std::fs::create_dir_all(dir).unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_specsysid"))
        .current_dir(dir)
        .args(["selftest", "--seed", &seed.to_string(), "--jobs", "2", "--out", "report.json"])
        .status()
        .expect("selftest run");
    assert!(status.success(), "selftest exited with {status}");
    let text = std::fs::read_to_string(dir.join("report.json")).unwrap();
    // the timestamp is the one field allowed to differ between runs
    let start = text.find("\"timestamp_ms\":").expect("timestamp field");
    let end = text[start..].find(',').unwrap() + start;
    format!("{}{}", &text[..start], &text[end..])
}

#[test]
fn criterion_10_selftest_determinism() {
    let start = Instant::now();
    let base = std::env::temp_dir().join(format!("specsysid-acc-{}", std::process::id()));
    let a = run_selftest(&base.join("run1"), DEFAULT_SEED);
    let b = run_selftest(&base.join("run2"), DEFAULT_SEED);
    assert!(!a.is_empty());
    assert_eq!(a, b, "selftest reports differ beyond the timestamp");
    let _ = std::fs::remove_dir_all(&base);
    println!("PASS criterion 10 selftest determinism        ({} ms)", start.elapsed().as_millis());
}

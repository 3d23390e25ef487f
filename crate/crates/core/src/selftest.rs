//! The acceptance checks: one function per criterion, shared by the CLI
//! `selftest` subcommand and the integration suite.

use std::time::Instant;

use serde::Serialize;

use crate::concentration::{
    curse_of_dim_sweep, distance_mc, littlewood_offord, sigma1_mc, RowModel,
};
use crate::covariance::{build_sigma, moment_norm_bounds, trace_formulas};
use crate::error::Result;
use crate::matrix::{random_unitary, SquareMatrix};
use crate::ols::{
    conjugated_frob_error, elementwise_error, error_sandwiches, inverse_cov_constraints,
    negative_second_moment, ols_estimate,
};
use crate::power::{
    bound_best_nonasym, bound_btrubdstbl, bound_ubdexact, closed_form_threshold,
    exact_power_norms, lower_bound_witness, per_block_threshold, validate_threshold,
};
use crate::rng::{trial_seed, GaussianStream};
use crate::sim::simulate;
use crate::spectral::{build_structured, EigenBlockSpec};

#[derive(Clone, Debug, Serialize)]
pub struct CriterionOutcome {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub details: Vec<String>,
    /// Wall-clock time; printed in the table but kept out of the
    /// serialized report so reports reproduce byte for byte.
    #[serde(skip)]
    pub millis: u128,
}

impl CriterionOutcome {
    pub fn line(&self) -> String {
        format!(
            "{} criterion {:>2} {:<28} ({} ms)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.millis
        )
    }
}

fn outcome(
    id: u32,
    name: &'static str,
    start: Instant,
    passed: bool,
    details: Vec<String>,
) -> CriterionOutcome {
    CriterionOutcome { id, name, passed, details, millis: start.elapsed().as_millis() }
}

const GRID_LAMBDAS: [f64; 5] = [0.3, 0.5, 0.7, 0.9, 0.99];
const GRID_SIZES: [usize; 6] = [1, 2, 3, 4, 5, 6];
const GRID_HORIZON: usize = 200;

/// Sound bounds dominate the exact norms on the whole block grid; the
/// printed variants' violations are enumerated and expected.
pub fn criterion_power_soundness() -> Result<CriterionOutcome> {
    let start = Instant::now();
    let mut passed = true;
    let mut details = Vec::new();
    let mut printed_violations = 0usize;
    let mut printed_at_small_k = false;
    for &lambda in &GRID_LAMBDAS {
        for &m in &GRID_SIZES {
            let a = build_structured(&[EigenBlockSpec::real(lambda, m)], None)?;
            let exact = exact_power_norms(&a, GRID_HORIZON)?;
            for k in 1..=GRID_HORIZON as u64 {
                let log_exact = exact.log_values[k as usize - 1];
                let sound = [
                    bound_ubdexact(lambda, m, k).log_value,
                    bound_btrubdstbl(lambda, m, k, true)?.log_value,
                ];
                for (which, log_bound) in sound.into_iter().enumerate() {
                    if log_exact > log_bound + 1e-9 {
                        passed = false;
                        details.push(format!(
                            "sound bound {which} violated at lambda={lambda} m={m} k={k}"
                        ));
                    }
                }
                for printed in [
                    bound_btrubdstbl(lambda, m, k, false)?.log_value,
                    bound_best_nonasym(lambda, m, k, false)?.log_value,
                ] {
                    if log_exact > printed + 1e-9 {
                        printed_violations += 1;
                        if lambda == 0.5 && m == 2 && k == 1 {
                            printed_at_small_k = true;
                        }
                    }
                }
            }
        }
    }
    if printed_violations == 0 {
        passed = false;
        details.push("expected printed-orientation violations, found none".into());
    }
    if !printed_at_small_k {
        passed = false;
        details.push("expected printed violation at lambda=0.5 m=2 k=1".into());
    }
    details.push(format!("printed-orientation violations: {printed_violations}"));
    Ok(outcome(1, "power-bound soundness", start, passed, details))
}

/// Exact norms fall below one within ten steps past the sound horizon on
/// every grid matrix, and the single-block witness exceeds one at power
/// n-1. The unsound closed-form horizon is also evaluated and its
/// failures are counted (a nonzero count is expected).
pub fn criterion_threshold_theorem() -> Result<CriterionOutcome> {
    let start = Instant::now();
    let mut passed = true;
    let mut details = Vec::new();
    let mut closed_form_failures = 0usize;
    for &lambda in &GRID_LAMBDAS {
        for &m in &GRID_SIZES {
            let a = build_structured(&[EigenBlockSpec::real(lambda, m)], None)?;
            let k_hat = per_block_threshold(lambda, m)?;
            let check = validate_threshold(&a, k_hat, 10)?;
            if !check.all_below_one {
                passed = false;
                details.push(format!(
                    "norms above one past sound horizon at lambda={lambda} m={m}: {:?}",
                    check.norms
                ));
            }
            let closed = closed_form_threshold(lambda, m)?;
            if closed < k_hat && !validate_threshold(&a, closed, 10)?.all_below_one {
                closed_form_failures += 1;
            }
        }
    }
    // the closed form provably under-shoots at lambda=0.9, m=2
    let a = build_structured(&[EigenBlockSpec::real(0.9, 2)], None)?;
    let closed = closed_form_threshold(0.9, 2)?;
    if validate_threshold(&a, closed, 10)?.all_below_one {
        passed = false;
        details.push("expected closed-form horizon failure at lambda=0.9 m=2".into());
    }
    details.push(format!("closed-form horizon failures on grid: {closed_form_failures}"));

    for n in 2..=50usize {
        for rho in [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99] {
            let (_, w) = lower_bound_witness(n, rho)?;
            if w <= 1.0 {
                passed = false;
                details.push(format!("witness norm {w} at n={n} rho={rho}"));
            }
        }
    }
    Ok(outcome(2, "threshold theorem", start, passed, details))
}

fn ols_bundle_specs() -> Vec<(&'static str, Vec<EigenBlockSpec>)> {
    vec![
        ("diag", vec![EigenBlockSpec::real(0.5, 1), EigenBlockSpec::real(0.3, 1)]),
        ("jordan2", vec![EigenBlockSpec::real(0.5, 2)]),
        ("jordan5", vec![EigenBlockSpec::real(0.9, 5)]),
        (
            "mixed",
            vec![EigenBlockSpec::real(0.5, 2), EigenBlockSpec::real(0.7, 2), EigenBlockSpec::real(0.3, 1)],
        ),
    ]
}

/// Exact identities on one hundred seeded bundles: Frobenius error equals
/// the noise route, the per-entry walks match, the negative second
/// moment balances, the inverse-covariance constraints hold at the
/// condition-scaled tolerance, and both sandwiches are ordered.
pub fn criterion_ols_exactness(seed: u64) -> Result<CriterionOutcome> {
    let start = Instant::now();
    let mut passed = true;
    let mut details = Vec::new();
    let mut count = 0usize;
    'outer: for (name, blocks) in ols_bundle_specs() {
        for &len in &[50usize, 200] {
            for rep in 0..13usize {
                if count >= 100 {
                    break 'outer;
                }
                count += 1;
                let s = trial_seed(seed, (count * 1000 + rep) as u64);
                let (a, _) = crate::spectral::structured_decomposition(&blocks, None)?;
                let b = simulate(&a, len, s)?;
                let d = ols_estimate(&b)?;
                if (d.frob_error - d.frob_error_noise_route).abs()
                    > 1e-8 * (1.0 + d.frob_error)
                {
                    passed = false;
                    details.push(format!("{name} N={len} seed={s}: frob identity broke"));
                }
                let e = elementwise_error(&b)?;
                if e.walk_residual > 1e-10 || e.normal_eq_residual > 1e-8 {
                    passed = false;
                    details.push(format!(
                        "{name} N={len} seed={s}: walk {:.2e} neq {:.2e}",
                        e.walk_residual, e.normal_eq_residual
                    ));
                }
                let (lhs, rhs) = negative_second_moment(&b.x_minus)?;
                if (lhs - rhs).abs() > 1e-9 * lhs {
                    passed = false;
                    details.push(format!("{name} N={len} seed={s}: negative second moment"));
                }
                let c = inverse_cov_constraints(&b)?;
                if !c.passed {
                    passed = false;
                    details.push(format!(
                        "{name} N={len} seed={s}: constraints {:?}",
                        (c.row_identity_residual, c.cross_residual, c.diagonal_residual)
                    ));
                }
                let s_rep = error_sandwiches(&b)?;
                if !s_rep.neg_ordered || !s_rep.mart_ordered {
                    passed = false;
                    details.push(format!("{name} N={len} seed={s}: sandwich disordered"));
                }
            }
        }
    }
    details.push(format!("bundles checked: {count}"));
    Ok(outcome(3, "ols exactness", start, passed, details))
}

/// Unitary conjugation moves neither the exact power norms nor the
/// Frobenius error identity.
pub fn criterion_basis_invariance(seed: u64) -> Result<CriterionOutcome> {
    let start = Instant::now();
    let mut passed = true;
    let mut details = Vec::new();
    let blocks = [EigenBlockSpec::real(0.5, 2), EigenBlockSpec::real(0.7, 3)];
    let plain = build_structured(&blocks, None)?;
    for rep in 0..5u64 {
        let u = random_unitary(5, trial_seed(seed, rep));
        let conj = build_structured(&blocks, Some(&u))?;
        let n1 = exact_power_norms(&plain, 60)?;
        let n2 = exact_power_norms(&conj, 60)?;
        for k in 0..60 {
            if (n1.values[k] - n2.values[k]).abs() > 1e-8 * (1.0 + n1.values[k]) {
                passed = false;
                details.push(format!("power norm moved at k={} rep={rep}", k + 1));
            }
        }
        let b = simulate(&plain, 150, trial_seed(seed, 100 + rep))?;
        let (lhs, rhs) = conjugated_frob_error(&b, &u)?;
        if (lhs - rhs).abs() > 1e-8 * (1.0 + rhs) {
            passed = false;
            details.push(format!("frobenius identity moved: {lhs} vs {rhs} rep={rep}"));
        }
    }
    Ok(outcome(4, "basis invariance", start, passed, details))
}

/// Covariance entries against Monte-Carlo, the two trace routes, and the
/// moment brackets around the top eigenvalue.
pub fn criterion_covariance_formulas(seed: u64) -> Result<CriterionOutcome> {
    let start = Instant::now();
    let mut passed = true;
    let mut details = Vec::new();

    let len = 3usize;
    let lambda = 0.5f64;
    let sigma = build_sigma(len, lambda)?;
    let trials = 100_000usize;
    let mut acc = vec![0.0f64; len * len];
    for t in 0..trials {
        let mut g = GaussianStream::new(trial_seed(seed, t as u64));
        let mut x = 0.0f64;
        let mut traj = [0.0f64; 3];
        for v in traj.iter_mut() {
            x = lambda * x + g.next_normal();
            *v = x;
        }
        for i in 0..len {
            for j in 0..len {
                acc[i * len + j] += traj[i] * traj[j];
            }
        }
    }
    let band = 5.0 / (trials as f64).sqrt();
    for i in 0..len {
        for j in 0..len {
            let emp = acc[i * len + j] / trials as f64;
            // band scaled by the per-entry second-moment size
            let scale = (sigma.matrix[(i, i)] * sigma.matrix[(j, j)]
                + sigma.matrix[(i, j)].powi(2))
            .sqrt();
            if (emp - sigma.matrix[(i, j)]).abs() > band * scale.max(1.0) {
                passed = false;
                details.push(format!(
                    "entry ({i},{j}): mc {emp} vs exact {}",
                    sigma.matrix[(i, j)]
                ));
            }
        }
    }

    let t = trace_formulas(3, 0.5)?;
    if (t.exact - 3.5625).abs() > 1e-12 || (sigma.matrix.trace() - 3.5625).abs() > 1e-12 {
        passed = false;
        details.push("trace routes disagree with 3.5625".into());
    }

    let s50 = build_sigma(50, 0.9)?;
    let mb = moment_norm_bounds(&s50.matrix, 8)?;
    if !mb.contains_lambda_max || !mb.upper_monotone {
        passed = false;
        details.push(format!("moment brackets failed: {mb:?}"));
    }
    Ok(outcome(5, "covariance formulas", start, passed, details))
}

/// White-row mean/variance and the AR(1) mean against the projected
/// trace, at one hundred thousand trials.
pub fn criterion_distance_concentration(seed: u64, jobs: usize) -> Result<CriterionOutcome> {
    let start = Instant::now();
    let mut passed = true;
    let mut details = Vec::new();
    for (len, dim) in [(10usize, 3usize), (100, 10)] {
        let (report, _) =
            distance_mc(len, dim, RowModel::White, trial_seed(seed, len as u64), 100_000, seed, jobs)?;
        if !report.all_asserted_pass() {
            passed = false;
            details.push(format!("white N={len} n={dim}: {:?}", report.claims));
        }
    }
    let (report, _) = distance_mc(
        10,
        3,
        RowModel::Arma { lambda: 0.5 },
        trial_seed(seed, 777),
        100_000,
        seed,
        jobs,
    )?;
    if !report.all_asserted_pass() {
        passed = false;
        details.push(format!("arma: {:?}", report.claims));
    }
    Ok(outcome(6, "distance concentration", start, passed, details))
}

/// Largest-singular-value experiments for the shifted ensemble and a
/// strongly coupled block.
pub fn criterion_sigma1(seed: u64, jobs: usize) -> Result<CriterionOutcome> {
    let start = Instant::now();
    let mut passed = true;
    let mut details = Vec::new();
    let zero = SquareMatrix::zeros(5);
    let coupled = build_structured(&[EigenBlockSpec::real(0.9, 5)], None)?;
    for (name, a) in [("zero", &zero), ("jordan5", &coupled)] {
        let (report, _) = sigma1_mc(a, 100, 10_000, trial_seed(seed, 31), jobs)?;
        if !report.all_asserted_pass() {
            passed = false;
            details.push(format!("{name}: {:?}", report.claims));
        }
    }
    Ok(outcome(7, "sigma1 behavior", start, passed, details))
}

/// Atom probabilities: exact enumeration for the two closed-form weight
/// patterns, Monte-Carlo within `5/sqrt(T)`, and the reported constancy
/// of `p_hat N^(3/2)` for linear weights.
pub fn criterion_littlewood_offord(seed: u64) -> Result<CriterionOutcome> {
    let start = Instant::now();
    let mut passed = true;
    let mut details = Vec::new();
    let trials = 10_000usize;
    let band = 5.0 / (trials as f64).sqrt();

    let r = littlewood_offord(&[1.0, 1.0, 1.0, 1.0], trials, trial_seed(seed, 1))?;
    if (r.exact.unwrap() - 0.375).abs() > 1e-12 || (r.p_hat - 0.375).abs() > band {
        passed = false;
        details.push(format!("all-ones: exact {:?} p_hat {}", r.exact, r.p_hat));
    }
    let r = littlewood_offord(&[1.0, 2.0, 4.0, 8.0], trials, trial_seed(seed, 2))?;
    if (r.exact.unwrap() - 0.0625).abs() > 1e-12 || (r.p_hat - 0.0625).abs() > band {
        passed = false;
        details.push(format!("dyadic: exact {:?} p_hat {}", r.exact, r.p_hat));
    }
    let mut scaled = Vec::new();
    for n in [20usize, 40, 80] {
        let w: Vec<f64> = (1..=n).map(|i| i as f64).collect();
        let r = littlewood_offord(&w, 40_000, trial_seed(seed, n as u64))?;
        scaled.push(r.p_hat * (n as f64).powf(1.5));
    }
    details.push(format!("p_hat * N^1.5 across N in 20,40,80: {scaled:?} (not asserted)"));
    Ok(outcome(8, "littlewood-offord atoms", start, passed, details))
}

/// Log-space sandwich of the worst-row variance and the fitted growth
/// base against the derived floor.
pub fn criterion_curse_sweep() -> Result<CriterionOutcome> {
    let start = Instant::now();
    let mut passed = true;
    let mut details = Vec::new();
    let report = curse_of_dim_sweep(0.6, 2, 12, 64)?;
    for row in &report.rows {
        if !row.sandwich_ok {
            passed = false;
            details.push(format!(
                "sandwich broke at n={}: lower {} exact {} upper {}",
                row.n, row.log_lower, row.log_exact, row.log_upper
            ));
        }
    }
    if !report.base_at_least_lemma {
        passed = false;
        details.push(format!(
            "fitted base {} below floor {}",
            report.fitted_variance_base, report.lemma_base
        ));
    }
    details.push(format!(
        "fitted variance base {:.4} (floor {:.4}, naive exponential reading {:.4})",
        report.fitted_variance_base, report.lemma_base, report.naive_exponential_base
    ));
    Ok(outcome(9, "curse-of-dimension sweep", start, passed, details))
}

/// In-process reproducibility: the same experiment with the same seed
/// twice produces identical statistics and verdicts.
pub fn criterion_determinism(seed: u64, jobs: usize) -> Result<CriterionOutcome> {
    let start = Instant::now();
    let mut passed = true;
    let mut details = Vec::new();
    let run = |jobs: usize| -> Result<String> {
        let (report, _) =
            distance_mc(12, 4, RowModel::Arma { lambda: 0.6 }, 3, 5_000, seed, jobs)?;
        Ok(format!("{:?} {:?}", report.stats, report.claims))
    };
    let a = run(jobs)?;
    let b = run(jobs)?;
    let c = run(jobs.saturating_add(3).max(2))?;
    if a != b {
        passed = false;
        details.push("same seed, same jobs produced different reports".into());
    }
    if a != c {
        passed = false;
        details.push("report depends on the worker count".into());
    }
    Ok(outcome(10, "determinism", start, passed, details))
}

/// Runs all criteria with one master seed.
pub fn run_all(seed: u64, jobs: usize) -> Result<Vec<CriterionOutcome>> {
    Ok(vec![
        criterion_power_soundness()?,
        criterion_threshold_theorem()?,
        criterion_ols_exactness(seed)?,
        criterion_basis_invariance(seed)?,
        criterion_covariance_formulas(seed)?,
        criterion_distance_concentration(seed, jobs)?,
        criterion_sigma1(seed, jobs)?,
        criterion_littlewood_offord(seed)?,
        criterion_curse_sweep()?,
        criterion_determinism(seed, jobs)?,
    ])
}

pub const DEFAULT_SEED: u64 = 42;

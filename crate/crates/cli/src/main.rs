//! Command-line entry point.
//!
//! Exit status: 0 on success, 2 on validation errors, 3 on numerical
//! failures (rank deficiency, overflow, divergence), 64 for an unknown
//! subcommand. Failures print a machine-readable error object.
//!
//! The master seed comes from `--seed`; the `SPECSYSID_SEED` environment
//! variable overrides the flag when set.

mod report;

use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use specsysid_core::concentration::{
    curse_of_dim_sweep, distance_mc, littlewood_offord, sigma1_mc, talagrand_constant, RowModel,
};
use specsysid_core::covariance::{
    build_sigma, expected_distance, frobenius_formula, moment_norm_bounds, trace_formulas,
};
use specsysid_core::matrix::{matrix_fingerprint, read_matrix_csv, write_matrix_csv};
use specsysid_core::ols::{
    elementwise_error, error_sandwiches, inverse_cov_constraints, negative_second_moment,
    ols_estimate,
};
use specsysid_core::power::{certificate, closed_form_threshold, global_threshold, lower_bound_witness, per_block_threshold};
use specsysid_core::rng::trial_seed;
use specsysid_core::sim::{simulate_with_start, InitialState, TrajectoryBundle};
use specsysid_core::spectral::{
    build_structured, decompose, structured_decomposition, BlocksDocument, EigenBlockSpec,
    DEFAULT_CLUSTER_TOL,
};
use specsysid_core::{CMatrix, CoreError, SquareMatrix};

#[derive(Parser, Serialize)]
#[command(name = "specsysid", version, about = "Spectral decay certificates and exact OLS diagnostics for linear dynamical systems")]
struct Cli {
    /// Master seed; the SPECSYSID_SEED environment variable overrides
    /// this flag when set.
    #[arg(long, global = true, default_value_t = specsysid_core::selftest::DEFAULT_SEED)]
    seed: u64,
    /// Worker threads for Monte-Carlo trials (0 = available cores).
    /// Results do not depend on this value.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    #[serde(skip)]
    command: Command,
}

#[derive(Args, Serialize, Clone)]
struct MatrixSource {
    /// Structured build as JSON:
    /// `{"blocks":[{"lambda":[re,im],"size":m},...],"basis":"path-or-null"}`
    #[arg(long)]
    blocks: Option<String>,
    /// Dense matrix as CSV (complex entries "a+bi").
    #[arg(long)]
    matrix: Option<PathBuf>,
}

impl MatrixSource {
    fn load(&self) -> Result<SquareMatrix, CoreError> {
        match (&self.blocks, &self.matrix) {
            (Some(doc), None) => {
                let (specs, basis) = parse_blocks(doc)?;
                build_structured(&specs, basis.as_ref())
            }
            (None, Some(path)) => SquareMatrix::new(read_matrix_csv(path)?),
            _ => Err(CoreError::Invalid("provide exactly one of --blocks or --matrix".into())),
        }
    }
}

fn parse_blocks(doc: &str) -> Result<(Vec<EigenBlockSpec>, Option<SquareMatrix>), CoreError> {
    let parsed = BlocksDocument::parse(doc)?;
    let basis = match &parsed.basis {
        Some(path) => Some(SquareMatrix::new(read_matrix_csv(Path::new(path))?)?),
        None => None,
    };
    Ok((parsed.to_specs(), basis))
}

#[derive(Subcommand, Serialize, Clone)]
enum Command {
    /// Detect eigenvalue groups, multiplicities, and invariant-subspace
    /// projections of a matrix.
    Decompose {
        #[command(flatten)]
        source: MatrixSource,
        /// Eigenvalue clustering tolerance.
        #[arg(long, default_value_t = DEFAULT_CLUSTER_TOL)]
        cluster_tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact power norms with every decay bound and horizon for a
    /// structured matrix.
    PowerBounds {
        /// Structured build JSON (see decompose --blocks).
        #[arg(long)]
        blocks: String,
        /// Number of powers to certify.
        #[arg(long)]
        horizon: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decay horizons and the norm-growth witness for one block size and
    /// spectral radius.
    Gamma {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        rho: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate a seeded trajectory and write the bundle directory
    /// (A.csv, X_minus.csv, X_plus.csv, E.csv, meta.json).
    Simulate {
        #[command(flatten)]
        source: MatrixSource,
        /// Trajectory length N.
        #[arg(long)]
        steps: usize,
        /// Draw x_0 from the steady state instead of zero (exploration
        /// only; identity checks assume a zero start).
        #[arg(long, default_value_t = false)]
        stationary: bool,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Least-squares diagnostics for a simulated bundle directory.
    Ols {
        /// Bundle directory produced by simulate.
        #[arg(long)]
        bundle: PathBuf,
        /// Report path (default: diagnostics.json inside the bundle).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// AR(1) covariance spectrum report.
    Covariance {
        /// Trajectory length N.
        #[arg(long)]
        length: usize,
        #[arg(long)]
        lambda: f64,
        /// Largest trace power for the moment brackets.
        #[arg(long, default_value_t = 8)]
        kmax: usize,
        /// Optional subspace basis (CSV, one column per direction) for
        /// the expected-distance report.
        #[arg(long)]
        subspace: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Distance-to-subspace concentration experiment.
    DistanceMc {
        /// Row length N.
        #[arg(long)]
        length: usize,
        /// State dimension n; the subspace has dimension n-1.
        #[arg(long)]
        dim: usize,
        /// AR(1) pole; white coordinates when omitted.
        #[arg(long)]
        lambda: Option<f64>,
        /// Seed for the fixed subspace draw (default: derived from the
        /// master seed).
        #[arg(long)]
        v_seed: Option<u64>,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write per-trial squared distances for external plotting.
        #[arg(long)]
        samples_csv: Option<PathBuf>,
    },
    /// Largest-singular-value concentration experiment, including the
    /// transportation-cost constant of the trajectory law.
    Sigma1Mc {
        #[command(flatten)]
        source: MatrixSource,
        /// Trajectory length N.
        #[arg(long)]
        steps: usize,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        samples_csv: Option<PathBuf>,
    },
    /// Sign-walk atom probabilities.
    Lwo {
        /// Comma-separated weights, e.g. "1,2,4,8".
        #[arg(long)]
        weights: Option<String>,
        /// Named weight pattern: ones | dyadic | linear (with --n).
        #[arg(long)]
        case: Option<String>,
        /// Length for a named pattern.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        samples_csv: Option<PathBuf>,
    },
    /// Worst-row covariate growth sweep across state dimensions.
    CurseSweep {
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        n_min: usize,
        #[arg(long)]
        n_max: usize,
        /// Trajectory length N.
        #[arg(long)]
        length: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full acceptance suite and print a pass/fail table.
    Selftest {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn complex_matrix_json(m: &CMatrix) -> serde_json::Value {
    let rows: Vec<Vec<[f64; 2]>> = (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect();
    json!(rows)
}

fn effective_seed(flag: u64) -> Result<u64, CoreError> {
    match std::env::var("SPECSYSID_SEED") {
        Ok(v) => v
            .trim()
            .parse::<u64>()
            .map_err(|_| CoreError::Parse(format!("SPECSYSID_SEED must be a u64, got `{v}`"))),
        Err(_) => Ok(flag),
    }
}

fn effective_jobs(flag: usize) -> usize {
    if flag > 0 {
        flag
    } else {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    }
}

fn read_bundle(dir: &Path) -> Result<TrajectoryBundle, CoreError> {
    let a = SquareMatrix::new(read_matrix_csv(&dir.join("A.csv"))?)?;
    let noise = read_matrix_csv(&dir.join("E.csv"))?;
    let x_minus = read_matrix_csv(&dir.join("X_minus.csv"))?;
    let x_plus = read_matrix_csv(&dir.join("X_plus.csv"))?;
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("meta.json"))?)
            .map_err(|e| CoreError::Parse(format!("meta.json: {e}")))?;
    let seed = meta.get("seed").and_then(|s| s.as_u64());
    if let Some(expect) = meta.get("matrix_fnv1a64").and_then(|h| h.as_str()) {
        let got = matrix_fingerprint(a.inner());
        if got != expect {
            return Err(CoreError::Invalid(format!(
                "bundle matrix fingerprint mismatch: meta {expect}, A.csv {got}"
            )));
        }
    }
    let len = x_minus.ncols();
    let bundle = TrajectoryBundle { a, len, seed, noise, x_minus, x_plus };
    let residual = bundle.recursion_residual();
    if residual > 1e-8 * (1.0 + bundle.x_plus.norm()) {
        return Err(CoreError::Invalid(format!(
            "bundle does not satisfy its recursion: residual {residual:.3e}"
        )));
    }
    Ok(bundle)
}

fn run(cli: &Cli) -> Result<(), CoreError> {
    let seed = effective_seed(cli.seed)?;
    let jobs = effective_jobs(cli.jobs);
    let config = serde_json::to_value(&cli.command).map_err(|e| CoreError::Parse(e.to_string()))?;

    match &cli.command {
        Command::Decompose { source, cluster_tol, out } => {
            let a = source.load()?;
            let dec = decompose(&a, *cluster_tol)?;
            let check = dec.validate(&a);
            let body = json!({
                "dim": dec.dim,
                "groups": dec.groups.iter().map(|g| json!({
                    "lambda": [g.lambda.re, g.lambda.im],
                    "am": g.am,
                    "gm": g.gm,
                    "discrepancy": g.discrepancy(),
                })).collect::<Vec<_>>(),
                "orthogonality_defect": dec.orthogonality_defect,
                "flags": dec.flags,
                "check": check,
                "projections": dec.projections.iter().map(complex_matrix_json).collect::<Vec<_>>(),
            });
            report::emit(out.as_deref(), &report::envelope(seed, jobs, config, body))?;
        }
        Command::PowerBounds { blocks, horizon, out } => {
            let (specs, basis) = parse_blocks(blocks)?;
            let cert = certificate(&specs, basis.as_ref(), *horizon)?;
            report::emit(out.as_deref(), &report::envelope(seed, jobs, config, cert))?;
        }
        Command::Gamma { n, rho, out } => {
            let (_, dec) = structured_decomposition(
                &[EigenBlockSpec::real(*rho, *n)],
                None,
            )?;
            let global = global_threshold(&dec)?;
            let (_, witness) = lower_bound_witness((*n).max(2), *rho)?;
            let body = json!({
                "n": n,
                "rho": rho,
                "gamma": global.gamma,
                "k_hat": global.k_hat,
                "k_hat_closed_form": global.k_hat_closed_form,
                "per_block_threshold": per_block_threshold(*rho, *n)?,
                "closed_form_threshold": closed_form_threshold(*rho, *n)?,
                "witness_norm_at_power_n_minus_1": witness,
                "witness_exceeds_one": witness > 1.0,
            });
            report::emit(out.as_deref(), &report::envelope(seed, jobs, config, body))?;
        }
        Command::Simulate { source, steps, stationary, out } => {
            let a = source.load()?;
            let start = if *stationary { InitialState::Stationary } else { InitialState::Zero };
            let bundle = simulate_with_start(&a, *steps, seed, start)?;
            std::fs::create_dir_all(out)?;
            write_matrix_csv(&out.join("A.csv"), a.inner())?;
            write_matrix_csv(&out.join("X_minus.csv"), &bundle.x_minus)?;
            write_matrix_csv(&out.join("X_plus.csv"), &bundle.x_plus)?;
            write_matrix_csv(&out.join("E.csv"), &bundle.noise)?;
            let meta = json!({
                "schema": "1",
                "seed": seed,
                "generator": specsysid_core::rng::GENERATOR_NAME,
                "matrix_fnv1a64": matrix_fingerprint(a.inner()),
                "n": a.dim(),
                "steps": steps,
                "stationary_start": stationary,
            });
            std::fs::write(
                out.join("meta.json"),
                report::to_json_bytes(&meta).map_err(std::io::Error::other)?,
            )?;
        }
        Command::Ols { bundle, out } => {
            let b = read_bundle(bundle)?;
            let diag = ols_estimate(&b)?;
            let constraints = inverse_cov_constraints(&b)?;
            let walks = elementwise_error(&b)?;
            let sandwiches = error_sandwiches(&b)?;
            let (neg_lhs, neg_rhs) = negative_second_moment(&b.x_minus)?;
            let body = json!({
                "estimate": complex_matrix_json(diag.a_hat.inner()),
                "frob_error": diag.frob_error,
                "frob_error_noise_route": diag.frob_error_noise_route,
                "distances": diag.distances,
                "singular_values": diag.singular_values,
                "cond_gram": diag.cond_gram,
                "negative_second_moment": {"svd_route": neg_lhs, "distance_route": neg_rhs},
                "constraints": constraints,
                "elementwise": {
                    "walk_residual": walks.walk_residual,
                    "normal_eq_residual": walks.normal_eq_residual,
                    "nullspace_residual": walks.nullspace_residual,
                },
                "sandwiches": sandwiches,
            });
            let default_out = bundle.join("diagnostics.json");
            report::emit(
                Some(out.as_deref().unwrap_or(&default_out)),
                &report::envelope(seed, jobs, config, body),
            )?;
        }
        Command::Covariance { length, lambda, kmax, subspace, out } => {
            let sigma = build_sigma(*length, *lambda)?;
            let traces = trace_formulas(*length, *lambda)?;
            let frob = frobenius_formula(*length, *lambda)?;
            let moments = moment_norm_bounds(&sigma.matrix, *kmax)?;
            let distance = match subspace {
                Some(path) => {
                    let basis = read_matrix_csv(path)?.map(|z| z.re);
                    Some(expected_distance(&sigma, &basis)?)
                }
                None => None,
            };
            let entries = (sigma.len <= 20).then(|| {
                let rows: Vec<Vec<f64>> = (0..sigma.len)
                    .map(|i| (0..sigma.len).map(|j| sigma.matrix[(i, j)]).collect())
                    .collect();
                json!(rows)
            });
            let body = json!({
                "length": length,
                "lambda": lambda,
                "min_eigenvalue": sigma.min_eigenvalue,
                "trace": traces,
                "frobenius": frob,
                "moment_bounds": moments,
                "expected_distance": distance,
                "entries": entries,
            });
            report::emit(out.as_deref(), &report::envelope(seed, jobs, config, body))?;
        }
        Command::DistanceMc { length, dim, lambda, v_seed, trials, out, samples_csv } => {
            let model = match lambda {
                Some(l) => RowModel::Arma { lambda: *l },
                None => RowModel::White,
            };
            let vs = v_seed.unwrap_or_else(|| trial_seed(seed, 0x5653));
            let (rep, samples) = distance_mc(*length, *dim, model, vs, *trials, seed, jobs)?;
            if let Some(path) = samples_csv {
                report::write_samples_csv(path, &samples)?;
            }
            report::emit(out.as_deref(), &report::envelope(seed, jobs, config, rep))?;
        }
        Command::Sigma1Mc { source, steps, trials, out, samples_csv } => {
            let a = source.load()?;
            let (mut rep, samples) = sigma1_mc(&a, *steps, *trials, seed, jobs)?;
            let tal = talagrand_constant(&a, *steps);
            rep.claims.push(specsysid_core::concentration::ClaimCheck {
                claim: "transportation-cost constant of the trajectory law".into(),
                reference: "trajectory-t1-constant".into(),
                analytic: None,
                observed: tal.value,
                tolerance: None,
                verdict: specsysid_core::concentration::Verdict::NotAsserted,
            });
            if let Some(path) = samples_csv {
                report::write_samples_csv(path, &samples)?;
            }
            let body = json!({"experiment": rep, "talagrand": tal});
            report::emit(out.as_deref(), &report::envelope(seed, jobs, config, body))?;
        }
        Command::Lwo { weights, case, n, trials, out, samples_csv } => {
            let w: Vec<f64> = match (weights, case) {
                (Some(list), None) => list
                    .split(',')
                    .map(|t| {
                        t.trim()
                            .parse::<f64>()
                            .map_err(|_| CoreError::Parse(format!("bad weight `{t}`")))
                    })
                    .collect::<Result<_, _>>()?,
                (None, Some(name)) => {
                    let n = n.ok_or_else(|| {
                        CoreError::Invalid("--case requires --n".into())
                    })?;
                    match name.as_str() {
                        "ones" => vec![1.0; n],
                        "dyadic" => (0..n).map(|i| 2.0f64.powi(i as i32)).collect(),
                        "linear" => (1..=n).map(|i| i as f64).collect(),
                        other => {
                            return Err(CoreError::Invalid(format!(
                                "unknown case `{other}` (ones|dyadic|linear)"
                            )))
                        }
                    }
                }
                _ => {
                    return Err(CoreError::Invalid(
                        "provide exactly one of --weights or --case".into(),
                    ))
                }
            };
            let result = littlewood_offord(&w, *trials, seed)?;
            if let Some(path) = samples_csv {
                report::write_samples_csv(path, &result.sums)?;
            }
            let scaled = result.p_hat * (w.len() as f64).powf(1.5);
            let body = json!({
                "weights": w,
                "result": result,
                "p_hat_scaled_n_three_halves": scaled,
            });
            report::emit(out.as_deref(), &report::envelope(seed, jobs, config, body))?;
        }
        Command::CurseSweep { lambda, n_min, n_max, length, out } => {
            let rep = curse_of_dim_sweep(*lambda, *n_min, *n_max, *length)?;
            report::emit(out.as_deref(), &report::envelope(seed, jobs, config, rep))?;
        }
        Command::Selftest { out } => {
            let outcomes = specsysid_core::selftest::run_all(seed, jobs)?;
            for o in &outcomes {
                println!("{}", o.line());
            }
            let all = outcomes.iter().all(|o| o.passed);
            println!(
                "{}: {}/{} criteria passed",
                if all { "OK" } else { "FAILED" },
                outcomes.iter().filter(|o| o.passed).count(),
                outcomes.len()
            );
            let body = json!({"criteria": outcomes, "all_passed": all});
            if out.is_some() {
                report::emit(out.as_deref(), &report::envelope(seed, jobs, config, body))?;
            }
            if !all {
                return Err(CoreError::Invalid("selftest failed".into()));
            }
        }
    }
    Ok(())
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::InvalidSubcommand | ErrorKind::UnknownArgument => 64,
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    std::process::exit(0);
                }
                _ => 2,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(err) = run(&cli) {
        let obj = json!({"error": {"kind": err.kind(), "message": err.to_string()}});
        eprintln!("{obj}");
        // selftest failure is a numerical failure, not a usage error
        let code = if matches!(err, CoreError::Invalid(ref m) if m == "selftest failed") {
            3
        } else {
            err.exit_code()
        };
        std::process::exit(code);
    }
}

//! Exact covariance of a scalar AR(1) trajectory and the spectrum
//! handles built on it.
//!
//! For `x_{i+1} = lambda x_i + w_i`, `x_0 = 0`, the length-N trajectory
//! `(x_1, ..., x_N)` has covariance entries
//! `Sigma[j,j] = sum_{t<j} lambda^(2t)` and
//! `Sigma[k,j] = lambda^(k-j) Sigma[j,j]` for `k > j`. The trace admits
//! the closed form `sum_i i lambda^(2(N-i))`.
//!
//! Printed-constant caveats: the integral-comparison trace bounds and
//! the closed-form expression for `Tr(Sigma^2)` are evaluated exactly as
//! printed and validated against the direct entry sums; disagreements
//! are reported with the grid point rather than trusted (the direct sum
//! is the source of truth).

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::matrix::log_sum_exp;

/// Covariance matrix of a stable scalar AR(1) trajectory.
#[derive(Clone, Debug)]
pub struct ArmaCovariance {
    pub len: usize,
    pub lambda: f64,
    pub matrix: DMatrix<f64>,
    /// Smallest eigenvalue, for the positive-semidefiniteness check.
    pub min_eigenvalue: f64,
}

pub fn build_sigma(len: usize, lambda: f64) -> Result<ArmaCovariance> {
    if len == 0 {
        return Err(CoreError::Invalid("length must be positive".into()));
    }
    if lambda == 0.0 || lambda.abs() >= 1.0 {
        return Err(CoreError::Invalid("lambda must satisfy 0 < |lambda| < 1".into()));
    }
    let mut diag = Vec::with_capacity(len);
    let mut acc = 0.0f64;
    let l2 = lambda * lambda;
    let mut p = 1.0f64;
    for _ in 0..len {
        acc += p;
        p *= l2;
        diag.push(acc);
    }
    let m = DMatrix::from_fn(len, len, |k, j| {
        let (hi, lo) = if k >= j { (k, j) } else { (j, k) };
        lambda.powi((hi - lo) as i32) * diag[lo]
    });
    let eig = m.clone().symmetric_eigen();
    let min_eigenvalue = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let trace = m.trace();
    if min_eigenvalue < -1e-10 * trace {
        return Err(CoreError::Invalid(format!(
            "covariance lost positive semidefiniteness: min eigenvalue {min_eigenvalue:.3e}"
        )));
    }
    Ok(ArmaCovariance { len, lambda, matrix: m, min_eigenvalue })
}

/// Exact trace and the printed integral-comparison bounds.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct TraceFormulas {
    pub exact: f64,
    pub paper_lower: f64,
    pub paper_upper: f64,
    pub lower_holds: bool,
    pub upper_holds: bool,
}

/// `Tr(Sigma) = sum_{i=1}^{N} i lambda^(2(N-i))`, against the printed
/// bounds with constants `c1 = l^-2 / ln(l^-2)`, `c2 = l^-2 / ln(l^-2)^2`,
/// `c3 = 1 / ln(l^-2)`. Validity is recorded, not assumed.
pub fn trace_formulas(len: usize, lambda: f64) -> Result<TraceFormulas> {
    if len == 0 || lambda == 0.0 || lambda.abs() >= 1.0 {
        return Err(CoreError::Invalid("need len >= 1 and 0 < |lambda| < 1".into()));
    }
    let n = len as f64;
    let exact: f64 = (1..=len)
        .map(|i| i as f64 * lambda.powi(2 * (len - i) as i32))
        .sum();
    let inv2 = lambda.powi(-2);
    let log_inv2 = inv2.ln();
    let c1 = inv2 / log_inv2;
    let c2 = inv2 / (log_inv2 * log_inv2);
    let c3 = 1.0 / log_inv2;
    let paper_lower = c1 * n - c2;
    let paper_upper = c1 * n - c2 + c1 * (1.0 - c3 / n);
    Ok(TraceFormulas {
        exact,
        paper_lower,
        paper_upper,
        lower_holds: paper_lower <= exact,
        upper_holds: exact <= paper_upper,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct FrobeniusFormulas {
    /// The multi-term closed form, evaluated as printed.
    pub closed_form: f64,
    /// Direct sum of squared entries.
    pub direct: f64,
    pub relative_gap: f64,
}

/// `Tr(Sigma^2)` two ways. The printed closed form does not reproduce
/// the direct sum (already at N = 1 it gives 3.95 for lambda = 0.5
/// where the direct value is 1); the gap is reported so the discrepancy
/// is visible per grid point.
pub fn frobenius_formula(len: usize, lambda: f64) -> Result<FrobeniusFormulas> {
    let sigma = build_sigma(len, lambda)?;
    let direct: f64 = sigma.matrix.iter().map(|v| v * v).sum();
    let n = len as f64;
    let l2 = lambda * lambda;
    let one = 1.0 - l2;
    let closed_form = 4.0 * n / one.powi(3) * lambda.powi(2 * (len as i32 + 1))
        - 2.0 * ((1.0 - l2.powi(len as i32)) * l2 / one)
            * (1.0 + lambda.powi(2 * (len as i32 + 1)))
        + 1.0 / one.powi(2)
            * (2.0 / one - 1.0)
            * (n
                + lambda.powi(4) * (1.0 - lambda.powi(4 * len as i32)) / (1.0 - lambda.powi(4))
                + l2 * (1.0 - l2.powi(len as i32)) / one);
    Ok(FrobeniusFormulas {
        closed_form,
        direct,
        relative_gap: (closed_form - direct).abs() / direct,
    })
}

/// Large-N slope of the direct `Tr(Sigma^2)`, an empirical fit for the
/// linear coefficient the closed form is meant to carry.
pub fn frobenius_slope(lambda: f64, n1: usize, n2: usize) -> Result<f64> {
    let a = frobenius_formula(n1, lambda)?.direct;
    let b = frobenius_formula(n2, lambda)?.direct;
    Ok((b - a) / (n2 as f64 - n1 as f64))
}

/// Moment-method brackets for the top eigenvalue.
#[derive(Clone, Debug, Serialize)]
pub struct MomentBounds {
    /// Per k: `((Tr(S^k)/N)^(1/k), Tr(S^k)^(1/k))`.
    pub brackets: Vec<(f64, f64)>,
    /// Top eigenvalue from the symmetric eigensolve (the oracle route).
    pub lambda_max: f64,
    pub contains_lambda_max: bool,
    pub upper_monotone: bool,
}

/// Brackets `lambda_max` between `(Tr(S^k)/N)^(1/k)` and `Tr(S^k)^(1/k)`
/// for `k = 1..=k_max`. Powers are accumulated directly with rescaling
/// (independent of the eigensolve oracle).
pub fn moment_norm_bounds(matrix: &DMatrix<f64>, k_max: usize) -> Result<MomentBounds> {
    if k_max == 0 || matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
        return Err(CoreError::Invalid("need a square matrix and k_max >= 1".into()));
    }
    let n = matrix.nrows() as f64;
    let mut brackets = Vec::with_capacity(k_max);
    let mut power = matrix.clone();
    let mut log_scale = 0.0f64;
    for k in 1..=k_max {
        let tr = power.trace();
        if tr <= 0.0 {
            return Err(CoreError::Invalid("trace must stay positive (PSD input)".into()));
        }
        let log_tr = log_scale + tr.ln();
        brackets.push((((log_tr - n.ln()) / k as f64).exp(), (log_tr / k as f64).exp()));
        if k < k_max {
            let f = power.norm();
            power.unscale_mut(f);
            log_scale += f.ln();
            power = &power * matrix;
        }
    }
    let eig = matrix.clone().symmetric_eigen();
    let lambda_max = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let contains = brackets
        .iter()
        .all(|&(lo, hi)| lo <= lambda_max * (1.0 + 1e-10) && lambda_max <= hi * (1.0 + 1e-10));
    let monotone = brackets.windows(2).all(|w| w[1].1 <= w[0].1 * (1.0 + 1e-10));
    Ok(MomentBounds {
        brackets,
        lambda_max,
        contains_lambda_max: contains,
        upper_monotone: monotone,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ExpectedDistance {
    /// `Tr(Sigma P_perp)`: the mean of the squared distance between a
    /// trajectory and the subspace.
    pub value: f64,
    /// Cauchy-Schwarz cap `||Sigma||_F sqrt(N - n + 1)`.
    pub cauchy_schwarz_cap: f64,
}

/// Mean squared distance from a Sigma-distributed row to the span of
/// `basis` (N x (n-1), full column rank).
pub fn expected_distance(sigma: &ArmaCovariance, basis: &DMatrix<f64>) -> Result<ExpectedDistance> {
    expected_distance_matrix(&sigma.matrix, basis)
}

pub fn expected_distance_matrix(
    sigma: &DMatrix<f64>,
    basis: &DMatrix<f64>,
) -> Result<ExpectedDistance> {
    let n_len = sigma.nrows();
    if basis.nrows() != n_len || basis.ncols() >= n_len {
        return Err(CoreError::DimensionMismatch(format!(
            "basis is {}x{}, covariance is {}x{}",
            basis.nrows(),
            basis.ncols(),
            n_len,
            n_len
        )));
    }
    let sv = basis.clone().svd(false, false).singular_values;
    let smax = sv.iter().copied().fold(0.0f64, f64::max);
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if !(smin > basis.nrows() as f64 * f64::EPSILON * smax) {
        return Err(CoreError::RankDeficient {
            sigma_min: smin,
            threshold: basis.nrows() as f64 * f64::EPSILON * smax,
        });
    }
    let q = basis.clone().qr().q();
    let value = sigma.trace() - (q.transpose() * sigma * &q).trace();
    let codim = (n_len - basis.ncols()) as f64;
    Ok(ExpectedDistance {
        value,
        cauchy_schwarz_cap: sigma.norm() * codim.sqrt(),
    })
}

/// Symmetric PSD square root with tiny negative eigenvalues clipped at
/// zero (magnitude must stay within 1e-10 of the trace).
pub fn psd_sqrt(matrix: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let trace = matrix.trace();
    let eig = matrix.clone().symmetric_eigen();
    for &v in eig.eigenvalues.iter() {
        if v < -1e-10 * trace.max(1.0) {
            return Err(CoreError::Invalid(format!("matrix is not PSD: eigenvalue {v:.3e}")));
        }
    }
    let roots: DVector<f64> = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let mut scaled = eig.eigenvectors.clone();
    for k in 0..scaled.ncols() {
        for i in 0..scaled.nrows() {
            scaled[(i, k)] *= roots[k];
        }
    }
    Ok(&scaled * eig.eigenvectors.transpose())
}

/// Log of the exact trace, stable for long horizons.
pub fn log_trace(len: usize, lambda: f64) -> f64 {
    let terms: Vec<f64> = (1..=len)
        .map(|i| (i as f64).ln() + 2.0 * (len - i) as f64 * lambda.abs().ln())
        .collect();
    log_sum_exp(&terms)
}

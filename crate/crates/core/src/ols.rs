//! Least-squares identification from one trajectory, with the exact
//! error identities that make the estimate auditable.
//!
//! The estimator is `A_hat = X_plus X_minus^+` with
//! `X_minus^+ = X_minus* (X_minus X_minus*)^-1`, and the error satisfies
//! `||A - A_hat||_F = ||E X_minus^+||_F` exactly. Entry `(j, k)` of the
//! error is the weighted walk `sum_i <w_i, e_j> <c_k, e_i>` whose weights
//! are the pseudo-inverse columns `c_k`; those columns are pinned by the
//! normal equations `X_minus c_k = e_k` and have `||c_k||^2 = 1/d_k^2`,
//! the inverse squared distance from row `k` to the span of the other
//! rows.
//!
//! All inverse-covariance quantities are computed through the SVD of
//! `X_minus`, never by forming and inverting the Gram matrix, so the
//! identities hold to tolerances governed by the condition number once
//! rather than squared.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::matrix::{inner, singular_values, C64, CMatrix, CVector, SquareMatrix};
use crate::sim::TrajectoryBundle;

struct Factors {
    u: CMatrix,
    sv: Vec<f64>,
    /// N x n, columns are the right singular vectors.
    v: CMatrix,
    /// N x n pseudo-inverse.
    pinv: CMatrix,
}

fn factor(x_minus: &CMatrix) -> Result<Factors> {
    let n = x_minus.nrows();
    let cols = x_minus.ncols();
    if cols < n {
        return Err(CoreError::RankDeficient { sigma_min: 0.0, threshold: 0.0 });
    }
    let svd = x_minus.clone().svd(true, true);
    let u = svd.u.expect("svd u requested");
    let vt = svd.v_t.expect("svd v_t requested");
    // nalgebra returns the singular values sorted in decreasing order,
    // matching the columns of u and the rows of vt
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let sigma_min = sv[n - 1];
    let threshold = n as f64 * f64::EPSILON * sv[0];
    if !(sigma_min > threshold) {
        return Err(CoreError::RankDeficient { sigma_min, threshold });
    }
    let v = vt.adjoint();
    let mut scaled = v.clone();
    for k in 0..n {
        for i in 0..scaled.nrows() {
            scaled[(i, k)] /= C64::new(sv[k], 0.0);
        }
    }
    let pinv = scaled * u.adjoint();
    Ok(Factors { u, sv, v, pinv })
}

/// Row `j` of `y` as a column vector in C^N.
fn row_vec(y: &CMatrix, j: usize) -> CVector {
    y.row(j).transpose()
}

/// Distance from row `j` to the span of the other rows, via the
/// projection residual against an orthonormal basis of that span.
fn row_distance(y: &CMatrix, j: usize) -> f64 {
    let n = y.nrows();
    let cols = y.ncols();
    let mut others = CMatrix::zeros(cols, n - 1);
    let mut c = 0;
    for k in 0..n {
        if k != j {
            others.set_column(c, &row_vec(y, k));
            c += 1;
        }
    }
    let q = others.qr().q();
    let yj = row_vec(y, j);
    let resid = &yj - &q * (q.adjoint() * &yj);
    resid.norm()
}

fn row_distances(y: &CMatrix) -> Vec<f64> {
    (0..y.nrows()).map(|j| row_distance(y, j)).collect()
}

/// Full identification diagnostics for one bundle.
#[derive(Clone, Debug)]
pub struct OlsDiagnostics {
    pub a_hat: SquareMatrix,
    /// `||A - A_hat||_F`.
    pub frob_error: f64,
    /// `||E X_minus^+||_F`, computed independently from the noise.
    pub frob_error_noise_route: f64,
    /// N x n, column `k` is the pseudo-inverse column `c_k`.
    pub pinv_columns: CMatrix,
    /// Distance from each row of `X_minus` to the span of the others.
    pub distances: Vec<f64>,
    /// `(X_minus X_minus*)^-1`.
    pub inv_cov: CMatrix,
    /// Singular values of `X_minus`, decreasing.
    pub singular_values: Vec<f64>,
    /// `(sigma_n(EV) sqrt(sum d^-2), sigma_1(EV) sqrt(sum d^-2))` where
    /// `EV` is the noise restricted to the row space of `X_minus`.
    pub sandwich_neg: (f64, f64),
    /// Martingale-term sandwich: `||E X*(XX*)^(-1/2)||_F / sigma_1` and
    /// the same over `sigma_n`.
    pub sandwich_mart: (f64, f64),
    /// Condition number of the sample covariance `X_minus X_minus*`.
    pub cond_gram: f64,
}

pub fn ols_estimate(bundle: &TrajectoryBundle) -> Result<OlsDiagnostics> {
    let f = factor(&bundle.x_minus)?;
    let n = bundle.dim();
    let a_hat = SquareMatrix::new(&bundle.x_plus * &f.pinv)?;
    let frob_error = (a_hat.inner() - bundle.a.inner()).norm();
    let noise_route = (&bundle.noise * &f.pinv).norm();

    let mut inv_cov = f.u.clone();
    for k in 0..n {
        let s = f.sv[k];
        for i in 0..n {
            inv_cov[(i, k)] /= C64::new(s * s, 0.0);
        }
    }
    let inv_cov = inv_cov * f.u.adjoint();

    let distances = row_distances(&bundle.x_minus);
    let dsum: f64 = distances.iter().map(|d| d.powi(-2)).sum();

    let ev = &bundle.noise * &f.v;
    let ev_sv = singular_values(&ev);
    let sandwich_neg = (ev_sv[n - 1] * dsum.sqrt(), ev_sv[0] * dsum.sqrt());

    // E X* (X X*)^(-1/2), evaluated literally
    let mut inv_sqrt = f.u.clone();
    for k in 0..n {
        for i in 0..n {
            inv_sqrt[(i, k)] /= C64::new(f.sv[k], 0.0);
        }
    }
    let inv_sqrt = inv_sqrt * f.u.adjoint();
    let mart = (&bundle.noise * bundle.x_minus.adjoint() * inv_sqrt).norm();
    let sandwich_mart = (mart / f.sv[0], mart / f.sv[n - 1]);

    Ok(OlsDiagnostics {
        a_hat,
        frob_error,
        frob_error_noise_route: noise_route,
        pinv_columns: f.pinv,
        distances,
        inv_cov,
        singular_values: f.sv.clone(),
        sandwich_neg,
        sandwich_mart,
        cond_gram: (f.sv[0] / f.sv[n - 1]).powi(2),
    })
}

/// Both sides of the negative second moment identity for a full-row-rank
/// `d x p` matrix: `sum_j sigma_j^-2` (SVD route) and `sum_j d_j^-2`
/// (projection route).
pub fn negative_second_moment(y: &CMatrix) -> Result<(f64, f64)> {
    let d = y.nrows();
    if d > y.ncols() {
        return Err(CoreError::Invalid("need d <= p".into()));
    }
    if d < 2 {
        return Err(CoreError::Invalid("need at least two rows".into()));
    }
    let sv = singular_values(y);
    let threshold = d as f64 * f64::EPSILON * sv[0];
    if !(sv[d - 1] > threshold) {
        return Err(CoreError::RankDeficient { sigma_min: sv[d - 1], threshold });
    }
    let lhs: f64 = sv.iter().take(d).map(|s| s.powi(-2)).sum();
    let rhs: f64 = row_distances(y).iter().map(|d| d.powi(-2)).sum();
    Ok((lhs, rhs))
}

/// Residuals of the linear constraints pinning the inverse sample
/// covariance `V = (X X*)^-1` to the row geometry, plus the observed
/// sign statistic of the off-diagonal interaction sums (reported, not
/// asserted).
#[derive(Clone, Debug, Serialize)]
pub struct ConstraintReport {
    /// `max_j` relative residual of
    /// `sum_{k != j} v_jk <y_k, y_j> = 1 - v_jj ||y_j||^2`.
    pub row_identity_residual: f64,
    /// `max_{l != j}` normalized residual of `sum_k v_jk <y_k, y_l> = 0`.
    pub cross_residual: f64,
    /// `max_j` relative residual of `v_jj = 1 / d^2(y_j, v_j)`.
    pub diagonal_residual: f64,
    /// Condition number of the Gram matrix.
    pub kappa: f64,
    /// Pass threshold `1e-7 * kappa`.
    pub tolerance: f64,
    pub passed: bool,
    /// `Re sum_{k != j} v_jk <y_k, y_j>` per row.
    pub offdiag_sums: Vec<f64>,
    pub nonpositive_offdiag_count: usize,
}

pub fn inverse_cov_constraints(bundle: &TrajectoryBundle) -> Result<ConstraintReport> {
    let f = factor(&bundle.x_minus)?;
    let n = bundle.dim();
    let y = &bundle.x_minus;
    let mut inv_cov = f.u.clone();
    for k in 0..n {
        for i in 0..n {
            inv_cov[(i, k)] /= C64::new(f.sv[k] * f.sv[k], 0.0);
        }
    }
    let inv_cov = inv_cov * f.u.adjoint();
    let gram = y * y.adjoint();

    let mut row_identity = 0.0f64;
    let mut cross = 0.0f64;
    let mut offdiag_sums = Vec::with_capacity(n);
    for j in 0..n {
        let mut off = C64::new(0.0, 0.0);
        let mut scale = 0.0f64;
        for k in 0..n {
            if k != j {
                off += inv_cov[(j, k)] * gram[(k, j)];
                scale += (inv_cov[(j, k)] * gram[(k, j)]).norm();
            }
        }
        let target = C64::new(1.0, 0.0) - inv_cov[(j, j)] * gram[(j, j)];
        row_identity = row_identity.max((off - target).norm() / (1.0 + scale + target.norm()));
        offdiag_sums.push(off.re);
        for l in 0..n {
            if l == j {
                continue;
            }
            let mut s = C64::new(0.0, 0.0);
            let mut sc = 0.0f64;
            for k in 0..n {
                s += inv_cov[(j, k)] * gram[(k, l)];
                sc += (inv_cov[(j, k)] * gram[(k, l)]).norm();
            }
            cross = cross.max(s.norm() / (1.0 + sc));
        }
    }

    let distances = row_distances(y);
    let mut diag = 0.0f64;
    for j in 0..n {
        let vjj = inv_cov[(j, j)].re;
        diag = diag.max((vjj - distances[j].powi(-2)).abs() / vjj.abs().max(f64::MIN_POSITIVE));
    }

    let kappa = (f.sv[0] / f.sv[n - 1]).powi(2);
    let tolerance = 1e-7 * kappa.max(1.0);
    let nonpositive = offdiag_sums.iter().filter(|&&s| s <= 1e-9).count();
    Ok(ConstraintReport {
        row_identity_residual: row_identity,
        cross_residual: cross,
        diagonal_residual: diag,
        kappa,
        tolerance,
        passed: row_identity <= tolerance && cross <= tolerance && diag <= tolerance,
        offdiag_sums,
        nonpositive_offdiag_count: nonpositive,
    })
}

/// Element-wise error walks and the constraint residuals that pin them.
#[derive(Clone, Debug)]
pub struct ElementwiseError {
    /// `A_hat - A`, equal to `E X_minus^+`.
    pub error: CMatrix,
    /// Max deviation between the explicit per-entry walk sum and the
    /// matrix-product route.
    pub walk_residual: f64,
    /// Max residual of the normal equations `X_minus c_k = e_k`, scale
    /// aware.
    pub normal_eq_residual: f64,
    /// Max `|<c_k, z>|` over sampled unit vectors `z` in the null space
    /// of `X_minus`.
    pub nullspace_residual: f64,
}

/// The additive terms of the walk for entry `(j, k)`:
/// `<w_i, e_j> <c_k, e_i>` for `i = 1..=N`.
pub fn walk_terms(bundle: &TrajectoryBundle, pinv: &CMatrix, j: usize, k: usize) -> Vec<C64> {
    (0..bundle.len).map(|i| bundle.noise[(j, i)] * pinv[(i, k)]).collect()
}

pub fn elementwise_error(bundle: &TrajectoryBundle) -> Result<ElementwiseError> {
    let f = factor(&bundle.x_minus)?;
    let n = bundle.dim();
    let product_route = &bundle.noise * &f.pinv;

    let mut walk_residual = 0.0f64;
    for j in 0..n {
        for k in 0..n {
            let terms = walk_terms(bundle, &f.pinv, j, k);
            let sum: C64 = terms.iter().sum();
            let scale: f64 = terms.iter().map(|t| t.norm()).sum();
            walk_residual = walk_residual
                .max((sum - product_route[(j, k)]).norm() / (1.0 + scale));
        }
    }

    // normal equations: X_minus c_k = e_k
    let gram_action = &bundle.x_minus * &f.pinv;
    let mut normal_eq = 0.0f64;
    for j in 0..n {
        for k in 0..n {
            let target = if j == k { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
            let scale = row_vec(&bundle.x_minus, j).norm() * f.pinv.column(k).norm();
            normal_eq = normal_eq.max((gram_action[(j, k)] - target).norm() / (1.0 + scale));
        }
    }

    // sampled null-space vectors: z = r - V (V* r)
    let mut nullspace = 0.0f64;
    if bundle.len > n {
        let mut g = crate::rng::GaussianStream::new(0x5EED);
        for _ in 0..5 {
            let r = DVector::<C64>::from_fn(bundle.len, |_, _| {
                C64::new(g.next_normal(), g.next_normal())
            });
            let z = &r - &f.v * (f.v.adjoint() * &r);
            let norm = z.norm();
            if norm < 1e-12 {
                continue;
            }
            let z = z.unscale(norm);
            for k in 0..n {
                let ck: CVector = f.pinv.column(k).into();
                nullspace = nullspace.max(inner(&ck, &z).norm() / ck.norm());
            }
        }
    }

    Ok(ElementwiseError {
        error: product_route,
        walk_residual,
        normal_eq_residual: normal_eq,
        nullspace_residual: nullspace,
    })
}

/// Both error sandwiches with their orderings.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SandwichReport {
    pub frob_error: f64,
    pub neg_lower: f64,
    pub neg_upper: f64,
    pub mart_lower: f64,
    pub mart_upper: f64,
    pub neg_ordered: bool,
    pub mart_ordered: bool,
}

pub fn error_sandwiches(bundle: &TrajectoryBundle) -> Result<SandwichReport> {
    let diag = ols_estimate(bundle)?;
    let err = diag.frob_error_noise_route;
    let slack = 1e-9 * (1.0 + err);
    Ok(SandwichReport {
        frob_error: err,
        neg_lower: diag.sandwich_neg.0,
        neg_upper: diag.sandwich_neg.1,
        mart_lower: diag.sandwich_mart.0,
        mart_upper: diag.sandwich_mart.1,
        neg_ordered: diag.sandwich_neg.0 <= err + slack && err <= diag.sandwich_neg.1 + slack,
        mart_ordered: diag.sandwich_mart.0 <= err + slack && err <= diag.sandwich_mart.1 + slack,
    })
}

/// The two sides of the basis-invariance identity: the Frobenius error
/// computed from the unitarily conjugated data `(U E, U X_minus)` and
/// from the original data. They agree because the pseudo-inverse
/// conjugates covariantly.
pub fn conjugated_frob_error(bundle: &TrajectoryBundle, u: &SquareMatrix) -> Result<(f64, f64)> {
    if u.dim() != bundle.dim() {
        return Err(CoreError::DimensionMismatch("unitary size".into()));
    }
    let defect = u.unitary_defect();
    if defect > 1e-10 {
        return Err(CoreError::NonUnitaryBasis { defect, tol: 1e-10 });
    }
    let w = u.inner() * &bundle.noise;
    let z = u.inner() * &bundle.x_minus;
    let fz = factor(&z)?;
    let lhs = (&w * &fz.pinv).norm();
    let fx = factor(&bundle.x_minus)?;
    let rhs = (&bundle.noise * &fx.pinv).norm();
    Ok((lhs, rhs))
}

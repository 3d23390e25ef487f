//! Exact matrix power norms and the analytic decay bounds they certify.
//!
//! For a single Jordan block `J_m(lambda)` the crate evaluates several
//! upper bounds on `||J_m(lambda)^k||_2`:
//!
//! * `ubdexact` - `|l|^k k^(m-1) sum_{j<m} |l|^-j`, valid for every
//!   `lambda` and `k >= 1`;
//! * `best_nonasym` - the simplification `k^(m-1) |l|^(k+1-m)`. As
//!   printed it drops a factor `m` and can dip below the exact norm at
//!   small `k`; the corrected variant restores the factor;
//! * `btrubdstbl` - the geometric-sum closed form. As printed the
//!   fraction is inverted relative to the closed form of `ubdexact`
//!   (desk check: lambda 0.5, m 2, k 1 gives 1/3 versus exact 1.2071);
//!   the corrected variant `k^(m-1) |l|^(k-m+1) (1-|l|^m)/(1-|l|)` is
//!   exactly the closed geometric sum and is sound.
//!
//! Both orientations are always evaluated and every violation of a bound
//! by the exact norm is recorded, never silently dropped.
//!
//! Thresholds: the fixed point of
//! `k > ln(m)/ln(1/|l|) + (m-1) ln(k)/ln(1/|l|) + (m-1)` is a sound
//! per-block horizon after which `||J_m(lambda)^k|| < 1` (it is exactly
//! the condition `m k^(m-1) |l|^(k+1-m) < 1`). The closed form
//! `4 (m-1) ln(m) / ln(1/|l|)` is also evaluated; it does not dominate
//! the fixed point for `|lambda|` near one (desk check:
//! `||J_2(0.9)^28|| = 28 * 0.9^27 = 1.63 > 1` while the closed form
//! gives 27), so certificates carry both and the window check below runs
//! against the sound value.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::matrix::{binomial, op_norm, SquareMatrix};
use crate::spectral::{structured_decomposition, EigenBlockSpec, SpectralDecomposition};

/// Exact `||A^k||_2` for `k = 1..=K`, with log values for comparisons
/// far below the underflow threshold.
#[derive(Clone, Debug, Serialize)]
pub struct PowerNorms {
    pub values: Vec<f64>,
    pub log_values: Vec<f64>,
}

/// Exact power norms by iterated multiplication. The accumulated power
/// is rescaled by its norm after every step so the recursion stays well
/// conditioned; the running log of the scale factors preserves the true
/// magnitude.
pub fn exact_power_norms(a: &SquareMatrix, horizon: usize) -> Result<PowerNorms> {
    if horizon == 0 {
        return Err(CoreError::Invalid("horizon must be at least 1".into()));
    }
    let mut values = Vec::with_capacity(horizon);
    let mut log_values = Vec::with_capacity(horizon);
    let mut acc = a.inner().clone();
    let mut log_scale = 0.0f64;
    for k in 1..=horizon {
        if k > 1 {
            acc = a.inner() * &acc;
        }
        let s1 = op_norm(&acc);
        if !s1.is_finite() {
            return Err(CoreError::PowerOverflow { last_finite: k - 1 });
        }
        if s1 == 0.0 {
            // nilpotent from here on
            for _ in k..=horizon {
                values.push(0.0);
                log_values.push(f64::NEG_INFINITY);
            }
            return Ok(PowerNorms { values, log_values });
        }
        let log_norm = log_scale + s1.ln();
        let value = log_norm.exp();
        if value.is_infinite() {
            return Err(CoreError::PowerOverflow { last_finite: k - 1 });
        }
        values.push(value);
        log_values.push(log_norm);
        acc.unscale_mut(s1);
        log_scale += s1.ln();
    }
    Ok(PowerNorms { values, log_values })
}

/// A bound value carried in both linear and log form.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BoundValue {
    pub value: f64,
    pub log_value: f64,
}

impl BoundValue {
    fn from_log(log_value: f64) -> Self {
        Self { value: log_value.exp(), log_value }
    }
}

/// `|l|^k k^(m-1) sum_{j=0}^{m-1} |l|^-j`. For the nilpotent block
/// (`lambda = 0`, `m > 1`) the bound is `k^(m-1)` below the block size
/// and zero afterwards.
pub fn bound_ubdexact(lambda_abs: f64, m: usize, k: u64) -> BoundValue {
    assert!(m >= 1 && k >= 1);
    if lambda_abs == 0.0 {
        return if (k as usize) < m {
            BoundValue::from_log((m as f64 - 1.0) * (k as f64).ln())
        } else {
            BoundValue { value: 0.0, log_value: f64::NEG_INFINITY }
        };
    }
    let ln_l = lambda_abs.ln();
    let ln_geo = if lambda_abs == 1.0 {
        (m as f64).ln()
    } else {
        -(m as f64 - 1.0) * ln_l + ((1.0 - lambda_abs.powi(m as i32)) / (1.0 - lambda_abs)).ln()
    };
    BoundValue::from_log(k as f64 * ln_l + (m as f64 - 1.0) * (k as f64).ln() + ln_geo)
}

fn require_stable_block(lambda_abs: f64) -> Result<()> {
    if lambda_abs <= 0.0 {
        return Err(CoreError::Invalid(format!(
            "block magnitude must lie in (0, 1), got {lambda_abs}"
        )));
    }
    if lambda_abs >= 1.0 {
        return Err(CoreError::Unstable { rho: lambda_abs });
    }
    Ok(())
}

/// `k^(m-1) |l|^(k+1-m)`, optionally with the factor `m` restored.
pub fn bound_best_nonasym(lambda_abs: f64, m: usize, k: u64, corrected: bool) -> Result<BoundValue> {
    require_stable_block(lambda_abs)?;
    let mut log = (m as f64 - 1.0) * (k as f64).ln()
        + (k as f64 + 1.0 - m as f64) * lambda_abs.ln();
    if corrected {
        log += (m as f64).ln();
    }
    Ok(BoundValue::from_log(log))
}

/// Geometric-sum bound. `corrected = false` evaluates the printed
/// orientation `k^(m-1)|l|^k (1-|l|)/(1-|l|^m)`; `corrected = true` the
/// closed geometric sum `k^(m-1)|l|^(k-m+1) (1-|l|^m)/(1-|l|)`.
pub fn bound_btrubdstbl(lambda_abs: f64, m: usize, k: u64, corrected: bool) -> Result<BoundValue> {
    require_stable_block(lambda_abs)?;
    let ln_k = (k as f64).ln();
    let ln_l = lambda_abs.ln();
    let ln_frac = ((1.0 - lambda_abs) / (1.0 - lambda_abs.powi(m as i32))).ln();
    let log = if corrected {
        (m as f64 - 1.0) * ln_k + (k as f64 - m as f64 + 1.0) * ln_l - ln_frac
    } else {
        (m as f64 - 1.0) * ln_k + k as f64 * ln_l + ln_frac
    };
    Ok(BoundValue::from_log(log))
}

const THRESHOLD_ITERATION_CAP: usize = 1_000_000;

/// Smallest integer `k` with
/// `k > ln(m)/ln(1/|l|) + (m-1) ln(k)/ln(1/|l|) + (m-1)`, found by the
/// monotone iteration `k <- floor(rhs(k)) + 1` from `k = m`. Above this
/// horizon `||J_m(lambda)^k|| < 1`.
pub fn per_block_threshold(lambda_abs: f64, m: usize) -> Result<u64> {
    require_stable_block(lambda_abs)?;
    if m == 1 {
        return Ok(1);
    }
    let inv_log = 1.0 / (1.0 / lambda_abs).ln();
    let rhs = |k: f64| -> f64 {
        (m as f64).ln() * inv_log + (m as f64 - 1.0) * k.ln() * inv_log + (m as f64 - 1.0)
    };
    let mut k = m as u64;
    for _ in 0..THRESHOLD_ITERATION_CAP {
        let r = rhs(k as f64);
        if (k as f64) > r {
            return Ok(k);
        }
        k = r.floor() as u64 + 1;
    }
    Err(CoreError::IterationCap { cap: THRESHOLD_ITERATION_CAP })
}

/// The closed-form horizon `ceil(4 (m-1) ln(m) / ln(1/|l|))`, with the
/// `m = 1` case read as 1. Reported alongside the fixed point; not
/// sound on its own for `|lambda|` close to one.
pub fn closed_form_threshold(lambda_abs: f64, m: usize) -> Result<u64> {
    require_stable_block(lambda_abs)?;
    if m == 1 {
        return Ok(1);
    }
    let v = 4.0 * (m as f64 - 1.0) * (m as f64).ln() / (1.0 / lambda_abs).ln();
    Ok((v.ceil() as u64).max(1))
}

/// Per distinct eigenvalue: sound fixed-point horizon and the closed
/// form, evaluated at block size `D + 1`.
#[derive(Clone, Debug, Serialize)]
pub struct BlockThreshold {
    pub lambda: num_complex::Complex<f64>,
    pub block_size: usize,
    pub threshold: u64,
    pub closed_form: u64,
    /// Whether the closed form is at least the sound fixed point.
    pub closed_form_covers: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GlobalThreshold {
    /// Sound horizon: maximum of the per-block fixed points. Above it the
    /// exact norms drop below one (in the orthogonal regime).
    pub k_hat: u64,
    /// Maximum of the per-block closed forms, as printed.
    pub k_hat_closed_form: u64,
    /// `(n-1) ln(n) / ln(1/rho)`: the dimension-uniform horizon scale.
    pub gamma: f64,
    pub per_block: Vec<BlockThreshold>,
    /// Set when the decomposition's orthogonality defect exceeds 1e-8;
    /// the horizon is still computed, but the cross-term cancellation it
    /// relies on is not certified.
    pub defect_warning: Option<f64>,
}

pub const ORTHOGONALITY_GATE: f64 = 1e-8;

pub fn global_threshold(dec: &SpectralDecomposition) -> Result<GlobalThreshold> {
    let rho = dec.spectral_radius();
    if rho >= 1.0 {
        return Err(CoreError::Unstable { rho });
    }
    let mut per_block = Vec::new();
    for g in &dec.groups {
        let m = g.discrepancy() + 1;
        let la = g.lambda.norm();
        let (threshold, closed_form) = if la == 0.0 {
            (m as u64, m as u64)
        } else {
            (per_block_threshold(la, m)?, closed_form_threshold(la, m)?)
        };
        per_block.push(BlockThreshold {
            lambda: g.lambda,
            block_size: m,
            threshold,
            closed_form,
            closed_form_covers: closed_form >= threshold,
        });
    }
    let k_hat = per_block.iter().map(|b| b.threshold).max().unwrap_or(1);
    let k_hat_closed_form = per_block.iter().map(|b| b.closed_form).max().unwrap_or(1);
    let n = dec.dim as f64;
    let gamma = if dec.dim <= 1 || rho == 0.0 {
        0.0
    } else {
        (n - 1.0) * n.ln() / (1.0 / rho).ln()
    };
    let defect_warning = (dec.orthogonality_defect > ORTHOGONALITY_GATE)
        .then_some(dec.orthogonality_defect);
    Ok(GlobalThreshold { k_hat, k_hat_closed_form, gamma, per_block, defect_warning })
}

/// Exact norms over the window `(k_hat, k_hat + window]`.
#[derive(Clone, Debug, Serialize)]
pub struct ThresholdCheck {
    pub start_exclusive: u64,
    pub end_inclusive: u64,
    pub norms: Vec<f64>,
    pub all_below_one: bool,
}

/// Walks the power recursion up to `k_hat` with running rescaling, then
/// evaluates the exact norms on the following `window` powers.
pub fn validate_threshold(a: &SquareMatrix, k_hat: u64, window: usize) -> Result<ThresholdCheck> {
    let mut acc = a.inner().clone();
    let mut log_scale = 0.0f64;
    for _ in 1..k_hat {
        let f = acc.norm();
        if f == 0.0 {
            break;
        }
        acc.unscale_mut(f);
        log_scale += f.ln();
        acc = a.inner() * &acc;
    }
    let mut norms = Vec::with_capacity(window);
    for _ in 0..window {
        let f = acc.norm();
        if f > 0.0 {
            acc.unscale_mut(f);
            log_scale += f.ln();
        }
        acc = a.inner() * &acc;
        norms.push((log_scale + op_norm(&acc).ln()).exp());
    }
    let all_below_one = norms.iter().all(|&v| v < 1.0);
    Ok(ThresholdCheck {
        start_exclusive: k_hat,
        end_inclusive: k_hat + window as u64,
        norms,
        all_below_one,
    })
}

/// Witness that decay cannot be dimension-free: `J_n(rho)^(n-1)` applied
/// to the last canonical vector has norm
/// `sqrt(sum_m binom(n-1, m)^2 rho^(2(n-1-m)))`, which exceeds one for
/// every `n >= 2` and `rho` in `(0, 1)`.
pub fn lower_bound_witness(n: usize, rho: f64) -> Result<(DVector<f64>, f64)> {
    if n < 2 || rho <= 0.0 || rho >= 1.0 {
        return Err(CoreError::Invalid("need n >= 2 and rho in (0,1)".into()));
    }
    let mut sum = 0.0f64;
    for m in 0..n {
        let b = binomial((n - 1) as u64, m as u64);
        sum += b * b * rho.powi(2 * (n - 1 - m) as i32);
    }
    let mut e_n = DVector::zeros(n);
    e_n[n - 1] = 1.0;
    Ok((e_n, sum.sqrt()))
}

/// Max-over-eigenvalues decay bound driven by discrepancies, in both
/// fraction orientations, with the achieving eigenvalue.
#[derive(Clone, Debug, Serialize)]
pub struct DiscrepancyBound {
    pub printed: BoundValue,
    pub corrected: BoundValue,
    pub argmax_printed: num_complex::Complex<f64>,
    pub argmax_corrected: num_complex::Complex<f64>,
}

/// `max_i k^(D_i) |l_i|^k (1-|l_i|)/(1-|l_i|^(D_i+1))` (printed) and the
/// corrected orientation, which equals `ubdexact` at block size `D + 1`.
pub fn bound_discrepancy_max(dec: &SpectralDecomposition, k: u64) -> Result<DiscrepancyBound> {
    if !dec.is_stable() {
        return Err(CoreError::Unstable { rho: dec.spectral_radius() });
    }
    if k == 0 {
        return Err(CoreError::Invalid("k must be at least 1".into()));
    }
    let mut printed: Option<(f64, num_complex::Complex<f64>)> = None;
    let mut corrected: Option<(f64, num_complex::Complex<f64>)> = None;
    for g in &dec.groups {
        let m = g.discrepancy() + 1;
        let la = g.lambda.norm();
        let p = if la == 0.0 {
            bound_ubdexact(la, m, k).log_value
        } else {
            bound_btrubdstbl(la, m, k, false)?.log_value
        };
        let c = bound_ubdexact(la, m, k).log_value;
        if printed.is_none_or(|(v, _)| p > v) {
            printed = Some((p, g.lambda));
        }
        if corrected.is_none_or(|(v, _)| c > v) {
            corrected = Some((c, g.lambda));
        }
    }
    let (pl, pa) = printed.ok_or_else(|| CoreError::Invalid("empty decomposition".into()))?;
    let (cl, ca) = corrected.unwrap();
    Ok(DiscrepancyBound {
        printed: BoundValue::from_log(pl),
        corrected: BoundValue::from_log(cl),
        argmax_printed: pa,
        argmax_corrected: ca,
    })
}

/// The `k = 1` specialization: an operator-norm bound from the spectrum
/// and its discrepancies alone.
pub fn bound_operator_norm(dec: &SpectralDecomposition) -> Result<DiscrepancyBound> {
    bound_discrepancy_max(dec, 1)
}

/// Names used for certificate records.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundKind {
    UbdExact,
    BestNonAsymAsPrinted,
    BestNonAsymCorrected,
    BtrUbdStblAsPrinted,
    BtrUbdStblCorrected,
    Qnthdl,
    QnthdlAsPrinted,
    TwoNorm,
    TwoNormAsPrinted,
}

impl Serialize for BoundKind {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.wire_name())
    }
}

impl BoundKind {
    pub fn wire_name(self) -> &'static str {
        match self {
            BoundKind::UbdExact => "ubdexact",
            BoundKind::BestNonAsymAsPrinted => "best_nonasym_as_printed",
            BoundKind::BestNonAsymCorrected => "best_nonasym_corrected",
            BoundKind::BtrUbdStblAsPrinted => "btrubdstbl_as_printed",
            BoundKind::BtrUbdStblCorrected => "btrubdstbl_corrected",
            BoundKind::Qnthdl => "qnthdl",
            BoundKind::QnthdlAsPrinted => "qnthdl_as_printed",
            BoundKind::TwoNorm => "two_norm",
            BoundKind::TwoNormAsPrinted => "two_norm_as_printed",
        }
    }

    /// Sound bounds must never fall below the exact norm; printed
    /// variants are expected to.
    pub fn is_sound(self) -> bool {
        matches!(
            self,
            BoundKind::UbdExact
                | BoundKind::BestNonAsymCorrected
                | BoundKind::BtrUbdStblCorrected
                | BoundKind::Qnthdl
                | BoundKind::TwoNorm
        )
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundRecord {
    pub k: u64,
    pub kind: BoundKind,
    pub value: f64,
    pub log_value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ViolationRecord {
    pub k: u64,
    pub kind: BoundKind,
    pub bound: f64,
    pub exact: f64,
}

/// Everything the toolkit knows about the power decay of one structured
/// matrix over a horizon.
#[derive(Clone, Debug, Serialize)]
pub struct PowerNormCertificate {
    pub horizon: usize,
    pub blocks: Vec<EigenBlockSpec>,
    pub exact: PowerNorms,
    pub bounds: Vec<BoundRecord>,
    pub violations: Vec<ViolationRecord>,
    pub per_block_thresholds: Vec<BlockThreshold>,
    pub global: GlobalThreshold,
    pub threshold_check: ThresholdCheck,
}

/// Relative slack used when comparing exact norms against bounds; SVD
/// accuracy is far better than this.
const VIOLATION_SLACK: f64 = 1e-9;

fn max_over_blocks(
    dec: &SpectralDecomposition,
    k: u64,
    kind: BoundKind,
) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for g in &dec.groups {
        let m = g.discrepancy() + 1;
        let la = g.lambda.norm();
        let log = if la == 0.0 {
            bound_ubdexact(la, m, k).log_value
        } else {
            match kind {
                BoundKind::UbdExact | BoundKind::BtrUbdStblCorrected => {
                    bound_ubdexact(la, m, k).log_value
                }
                BoundKind::BestNonAsymAsPrinted => bound_best_nonasym(la, m, k, false)?.log_value,
                BoundKind::BestNonAsymCorrected => bound_best_nonasym(la, m, k, true)?.log_value,
                BoundKind::BtrUbdStblAsPrinted => bound_btrubdstbl(la, m, k, false)?.log_value,
                BoundKind::Qnthdl | BoundKind::TwoNorm => bound_ubdexact(la, m, k).log_value,
                BoundKind::QnthdlAsPrinted | BoundKind::TwoNormAsPrinted => {
                    bound_btrubdstbl(la, m, k, false)?.log_value
                }
            }
        };
        best = best.max(log);
    }
    Ok(best)
}

/// Builds the structured matrix, computes its exact power norms over the
/// horizon, evaluates every bound variant, enumerates violations, and
/// attaches per-block and global thresholds with the window check.
pub fn certificate(
    blocks: &[EigenBlockSpec],
    basis: Option<&SquareMatrix>,
    horizon: usize,
) -> Result<PowerNormCertificate> {
    let (a, dec) = structured_decomposition(blocks, basis)?;
    if !dec.is_stable() {
        return Err(CoreError::Unstable { rho: dec.spectral_radius() });
    }
    let exact = exact_power_norms(&a, horizon)?;

    let per_k_kinds = [
        BoundKind::UbdExact,
        BoundKind::BestNonAsymAsPrinted,
        BoundKind::BestNonAsymCorrected,
        BoundKind::BtrUbdStblAsPrinted,
        BoundKind::BtrUbdStblCorrected,
        BoundKind::Qnthdl,
        BoundKind::QnthdlAsPrinted,
    ];
    let mut bounds = Vec::new();
    let mut violations = Vec::new();
    for k in 1..=horizon as u64 {
        let exact_log = exact.log_values[k as usize - 1];
        for kind in per_k_kinds {
            let log = max_over_blocks(&dec, k, kind)?;
            bounds.push(BoundRecord { k, kind, value: log.exp(), log_value: log });
            if exact_log > log + VIOLATION_SLACK {
                violations.push(ViolationRecord {
                    k,
                    kind,
                    bound: log.exp(),
                    exact: exact_log.exp(),
                });
            }
        }
    }
    for kind in [BoundKind::TwoNorm, BoundKind::TwoNormAsPrinted] {
        let log = max_over_blocks(&dec, 1, kind)?;
        bounds.push(BoundRecord { k: 1, kind, value: log.exp(), log_value: log });
        if exact.log_values[0] > log + VIOLATION_SLACK {
            violations.push(ViolationRecord {
                k: 1,
                kind,
                bound: log.exp(),
                exact: exact.values[0],
            });
        }
    }

    let global = global_threshold(&dec)?;
    let threshold_check = validate_threshold(&a, global.k_hat, 10)?;
    Ok(PowerNormCertificate {
        horizon,
        blocks: blocks.to_vec(),
        exact,
        bounds,
        violations,
        per_block_thresholds: global.per_block.clone(),
        global,
        threshold_check,
    })
}

//! Dense complex matrices, operator norms, and CSV interchange.
//!
//! Everything downstream works over `Complex<f64>`; real inputs are
//! embedded with zero imaginary part. CSV files carry one matrix row per
//! line with entries rendered `a+bi` (pure reals as `a`).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::error::{CoreError, Result};
use crate::rng::GaussianStream;

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub fn c(re: f64, im: f64) -> C64 {
    Complex::new(re, im)
}

pub fn cr(re: f64) -> C64 {
    Complex::new(re, 0.0)
}

/// Square complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SquareMatrix {
    data: CMatrix,
}

impl SquareMatrix {
    pub fn new(data: CMatrix) -> Result<Self> {
        if data.nrows() != data.ncols() || data.nrows() == 0 {
            return Err(CoreError::NotSquare { rows: data.nrows(), cols: data.ncols() });
        }
        Ok(Self { data })
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self { data: CMatrix::from_fn(n, n, f) }
    }

    pub fn from_real(data: &DMatrix<f64>) -> Result<Self> {
        Self::new(data.map(cr))
    }

    pub fn identity(n: usize) -> Self {
        Self { data: CMatrix::identity(n, n) }
    }

    pub fn zeros(n: usize) -> Self {
        Self { data: CMatrix::zeros(n, n) }
    }

    pub fn scalar(v: C64) -> Self {
        Self { data: CMatrix::from_element(1, 1, v) }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn inner(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_inner(self) -> CMatrix {
        self.data
    }

    /// Matrix 2-norm (largest singular value).
    pub fn op_norm(&self) -> f64 {
        op_norm(&self.data)
    }

    pub fn frobenius(&self) -> f64 {
        self.data.norm()
    }

    pub fn adjoint(&self) -> SquareMatrix {
        SquareMatrix { data: self.data.adjoint() }
    }

    /// ||U* U - I||_2; zero for exactly unitary matrices.
    pub fn unitary_defect(&self) -> f64 {
        let n = self.dim();
        op_norm(&(self.data.adjoint() * &self.data - CMatrix::identity(n, n)))
    }

    pub fn is_real(&self) -> bool {
        self.data.iter().all(|z| z.im == 0.0)
    }
}

impl std::ops::Deref for SquareMatrix {
    type Target = CMatrix;
    fn deref(&self) -> &CMatrix {
        &self.data
    }
}

/// Largest singular value of a rectangular complex matrix.
pub fn op_norm(m: &CMatrix) -> f64 {
    if m.iter().all(|z| z.norm_sqr() == 0.0) {
        return 0.0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    sv.iter().fold(0.0f64, |a, &b| a.max(b))
}

/// All singular values, sorted in decreasing order.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    let sv = m.clone().svd(false, false).singular_values;
    let mut v: Vec<f64> = sv.iter().copied().collect();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap());
    v
}

/// Inner product linear in the first argument, conjugate-linear in the
/// second: `sum_i u_i * conj(v_i)`.
pub fn inner(u: &CVector, v: &CVector) -> C64 {
    v.dotc(u)
}

/// Haar-ish random unitary: QR of a seeded complex Gaussian matrix.
pub fn random_unitary(n: usize, seed: u64) -> SquareMatrix {
    let mut g = GaussianStream::new(seed);
    let m = CMatrix::from_fn(n, n, |_, _| c(g.next_normal(), g.next_normal()));
    let q = m.qr().q();
    SquareMatrix { data: q }
}

pub fn format_complex(z: C64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else if z.im < 0.0 {
        format!("{}-{}i", z.re, -z.im)
    } else {
        format!("{}+{}i", z.re, z.im)
    }
}

pub fn parse_complex(s: &str) -> Result<C64> {
    let t = s.trim();
    if t.is_empty() {
        return Err(CoreError::Parse("empty complex literal".into()));
    }
    let parse_f = |x: &str| -> Result<f64> {
        x.trim()
            .parse::<f64>()
            .map_err(|_| CoreError::Parse(format!("bad float `{x}` in `{t}`")))
    };
    if let Some(body) = t.strip_suffix(['i', 'I']) {
        // split at the last sign that is not leading and not an exponent sign
        let bytes = body.as_bytes();
        let mut split = None;
        for idx in (1..bytes.len()).rev() {
            let ch = bytes[idx];
            if (ch == b'+' || ch == b'-') && !matches!(bytes[idx - 1], b'e' | b'E') {
                split = Some(idx);
                break;
            }
        }
        match split {
            Some(idx) => {
                let re = parse_f(&body[..idx])?;
                let sign = if bytes[idx] == b'-' { -1.0 } else { 1.0 };
                let im = parse_f(&body[idx + 1..])?;
                Ok(c(re, sign * im))
            }
            None => Ok(c(0.0, parse_f(body)?)),
        }
    } else {
        Ok(cr(parse_f(t)?))
    }
}

pub fn matrix_to_csv(m: &CMatrix) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format_complex(m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn matrix_from_csv(text: &str) -> Result<CMatrix> {
    let mut rows: Vec<Vec<C64>> = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Result<Vec<C64>> = line.split(',').map(parse_complex).collect();
        rows.push(row?);
    }
    if rows.is_empty() {
        return Err(CoreError::Parse("empty matrix".into()));
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(CoreError::Parse("ragged rows".into()));
    }
    Ok(CMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

pub fn write_matrix_csv(path: &std::path::Path, m: &CMatrix) -> Result<()> {
    std::fs::write(path, matrix_to_csv(m))?;
    Ok(())
}

pub fn read_matrix_csv(path: &std::path::Path) -> Result<CMatrix> {
    matrix_from_csv(&std::fs::read_to_string(path)?)
}

/// FNV-1a 64-bit digest of the canonical CSV form; used to fingerprint
/// matrices in simulation metadata.
pub fn matrix_fingerprint(m: &CMatrix) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in matrix_to_csv(m).as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

/// Natural log of n!.
pub fn ln_factorial(n: u64) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// Natural log of binomial(n, k); `-inf` when k > n.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Exact f64 binomial for small arguments.
pub fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// log(sum(exp(terms))) with the usual max shift; empty input gives -inf.
pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

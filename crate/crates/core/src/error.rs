use num_complex::Complex;
use thiserror::Error;

/// Error type shared by every module of the crate.
///
/// Variants split into two families: validation errors (bad arguments,
/// malformed input) and numerical failures (rank deficiency, overflow,
/// divergence). `exit_code` maps the family to the process exit status
/// used by the CLI.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("block sizes sum to {got}, expected {expected}")]
    BlockSizeMismatch { expected: usize, got: usize },
    #[error("basis is not unitary: defect {defect:.3e} exceeds {tol:.1e}")]
    NonUnitaryBasis { defect: f64, tol: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("{lambda} is not an eigenvalue of this decomposition")]
    UnknownEigenvalue { lambda: Complex<f64> },
    #[error("spectral radius {rho} is not strictly inside the unit disk")]
    Unstable { rho: f64 },
    #[error("series diverged: term norms non-decreasing over the last {window} terms")]
    Diverged { window: usize },
    #[error("rank deficient: sigma_min {sigma_min:.3e} at or below threshold {threshold:.3e}")]
    RankDeficient { sigma_min: f64, threshold: f64 },
    #[error("state overflow at step {step}")]
    Overflow { step: usize },
    #[error("power norm overflow; last finite power k={last_finite}")]
    PowerOverflow { last_finite: usize },
    #[error("orthogonality defect {defect:.3e} exceeds {tol:.1e}")]
    HighDefect { defect: f64, tol: f64 },
    #[error("problem size {size} exceeds cap {cap}; a power-iteration fallback is required")]
    SizeCap { size: usize, cap: usize },
    #[error("iteration cap {cap} reached without convergence")]
    IterationCap { cap: usize },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;

impl CoreError {
    /// Short machine-readable tag for report error objects.
    pub fn kind(&self) -> &'static str {
        match self {
            CoreError::NotSquare { .. } => "shape",
            CoreError::BlockSizeMismatch { .. } => "blocks",
            CoreError::NonUnitaryBasis { .. } => "basis",
            CoreError::DimensionMismatch(_) => "shape",
            CoreError::UnknownEigenvalue { .. } => "eigenvalue",
            CoreError::Unstable { .. } => "unstable",
            CoreError::Diverged { .. } => "divergence",
            CoreError::RankDeficient { .. } => "rank",
            CoreError::Overflow { .. } => "overflow",
            CoreError::PowerOverflow { .. } => "overflow",
            CoreError::HighDefect { .. } => "defect",
            CoreError::SizeCap { .. } => "size-cap",
            CoreError::IterationCap { .. } => "iteration-cap",
            CoreError::Invalid(_) => "validation",
            CoreError::Parse(_) => "parse",
            CoreError::Io(_) => "io",
        }
    }

    /// 2 for validation failures, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CoreError::NotSquare { .. }
            | CoreError::BlockSizeMismatch { .. }
            | CoreError::NonUnitaryBasis { .. }
            | CoreError::DimensionMismatch(_)
            | CoreError::UnknownEigenvalue { .. }
            | CoreError::SizeCap { .. }
            | CoreError::Invalid(_)
            | CoreError::Parse(_)
            | CoreError::Io(_) => 2,
            _ => 3,
        }
    }
}

//! Spectral structure of stable linear systems, exact least-squares
//! identification diagnostics, and the Monte-Carlo experiments that
//! validate them.
//!
//! Modules:
//!
//! * [`matrix`] - dense complex matrices, norms, CSV interchange.
//! * [`spectral`] - invariant-subspace decompositions: exact structured
//!   construction and a best-effort numerical detector.
//! * [`power`] - exact power norms, decay bounds in printed and
//!   corrected orientations, horizons, certificates.
//! * [`sim`] - seeded trajectory simulation and covariate algebra.
//! * [`ols`] - least-squares estimate with exact error identities.
//! * [`covariance`] - AR(1) covariance spectrum handles.
//! * [`concentration`] - reproducible Monte-Carlo experiments.
//! * [`selftest`] - the acceptance checks behind the CLI selftest.

pub mod concentration;
pub mod covariance;
pub mod error;
pub mod matrix;
pub mod ols;
pub mod power;
pub mod rng;
pub mod selftest;
pub mod sim;
pub mod spectral;

pub use error::{CoreError, Result};
pub use matrix::{C64, CMatrix, CVector, SquareMatrix};

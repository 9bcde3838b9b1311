//! Special functions and Hermitian linear-algebra primitives shared by the
//! other modules.
//!
//! Everything here is a pure function on immutable values and safe to call
//! concurrently from any number of threads.

mod linalg;
mod special;

pub(crate) use linalg::cholesky_pd;
pub use linalg::{hermitian_solve, principal_eigenpair, ComplexVector, HermitianMatrix};
pub use special::{bessel_i, marcum_q, standard_normal_q, standard_normal_q_inv};

use thiserror::Error;

/// Errors from numerics routines.
#[derive(Debug, Error)]
pub enum NumericsError {
    /// Argument outside the function's domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// Bessel overflow guard tripped (|x| > 700).
    #[error("bessel_i argument |x| = {0} exceeds the overflow guard of 700")]
    BesselOverflow(f64),
    /// Matrix fails the Hermitian symmetry check.
    #[error("matrix is not Hermitian: max |M - M^H| entry = {0:.3e}")]
    NotHermitian(f64),
    /// Cholesky factorization failed.
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    /// Incompatible dimensions.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

//! Optimal diagonal and block-diagonal preconditioning for sparse symmetric
//! positive definite matrices.
//!
//! The crate evaluates and minimizes two scale-invariant conditioning
//! measures of an SPD matrix `A` over positive diagonal scalings `D`:
//!
//! * the spectral condition number `kappa = lambda_max / lambda_min`, and
//! * the trace/determinant ratio `omega = (trace/n) / det^(1/n)`,
//!
//! both taken of the two-sided scaling `D^(1/2) A D^(1/2)`. `omega`-optimal
//! scalings have closed forms (Jacobi and block-Jacobi); `kappa`-optimal
//! scalings are computed iteratively by projected subgradient and
//! gradient-with-line-search methods that only ever touch `A` through
//! sparse matrix-vector products. Preconditioned conjugate gradients is
//! included to measure the effect of a scaling on an actual solve.
//!
//! Module map:
//!
//! * [`sparse`] - symmetric CSR storage, scaled operator products, Gershgorin bound
//! * [`dense`] - small dense matrices and the dense eigendecomposition oracle
//! * [`mm`] - Matrix Market and plain vector file exchange
//! * [`chol`] - sparse Cholesky factorization (log-determinants, SPD checks)
//! * [`eigen`] - restarted Lanczos for extreme eigenpairs of scaled operators
//! * [`cond`] - `kappa`/`omega` evaluation, gradients, optimality residuals
//! * [`kappa`] - the three `kappa`-minimization solvers
//! * [`omega`] - closed-form `omega`-optimal diagonal and block scalings
//! * [`pcg`] - preconditioned conjugate gradients
//! * [`gen`] - reproducible test instance generators
//! * [`bench`] - manifest-driven benchmark tables (CSV)

pub mod bench;
pub mod chol;
pub mod cond;
pub mod dense;
pub mod eigen;
pub mod gen;
pub mod kappa;
pub mod mm;
pub mod omega;
pub mod pcg;
pub mod sparse;

use std::fmt;

/// Crate-wide error type.
#[derive(Debug)]
pub enum Error {
    /// Dimension mismatch, out-of-range argument, or otherwise unusable input.
    InvalidInput(String),
    /// The matrix in play is not symmetric positive definite where it must be
    /// (non-positive diagonal, Cholesky breakdown, indefinite CG curvature).
    NotSpd(String),
    /// A text file (Matrix Market, vector, manifest) failed to parse.
    /// `line` is 1-based.
    Parse { line: usize, msg: String },
    /// The iterative eigensolver hit its iteration cap before reaching the
    /// requested residual tolerance.
    NonConvergence { iterations: usize, best_residual: f64 },
    /// Underlying I/O failure.
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::NotSpd(msg) => write!(f, "matrix is not positive definite: {msg}"),
            Error::Parse { line, msg } => write!(f, "parse error at line {line}: {msg}"),
            Error::NonConvergence {
                iterations,
                best_residual,
            } => write!(
                f,
                "eigensolver did not converge within {iterations} iterations \
                 (best residual {best_residual:.3e})"
            ),
            Error::Io(err) => write!(f, "i/o error: {err}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err)
    }
}

pub type Result<T> = std::result::Result<T, Error>;

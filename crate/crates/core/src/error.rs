//! Library-wide error type.

use thiserror::Error;

/// Result alias used throughout the library.
pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong in a band computation or an inverse run.
#[derive(Debug, Error)]
#[non_exhaustive]
pub enum Error {
    /// Invalid argument or parameter combination supplied by the caller.
    #[error("invalid argument: {0}")]
    InvalidArg(String),

    /// Coefficient container with inconsistent shape or non-finite entries.
    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    /// Exponential coefficients violating the v_{-n} = conj(v_n) symmetry of
    /// a real potential (typically a corrupted coefficient file).
    #[error("coefficients not Hermitian at |n| = {index}: deviation {deviation:.3e}")]
    NonHermitian { index: usize, deviation: f64 },

    /// Malformed potential text file.
    #[error("potential file, line {line}: {msg}")]
    PotentialFile { line: usize, msg: String },

    /// Eigensolver failed to converge or left an unacceptable residual.
    #[error("eigensolve failed at q = {q}, s = {s}: {detail}")]
    Eigen { q: f64, s: usize, detail: String },

    /// Dispersion function has no sign change over the bisection bracket.
    #[error("dispersion function does not change sign over the bracket at lambda = {lambda}")]
    NoSignChange { lambda: f64 },

    /// Spectral variance from traces came out negative beyond rounding noise.
    #[error("negative spectral variance: sigma^2 = {sigma2:.3e}")]
    NegativeVariance { sigma2: f64 },

    /// The spectral shift c_delta collides with a reference eigenvalue.
    #[error("shift c_delta = {c_delta} is within {dist:.3e} of a reference eigenvalue; perturb theta")]
    ShiftCollision { c_delta: f64, dist: f64 },

    /// No step satisfying the strong Wolfe conditions was found.
    #[error("line search failed after {evals} evaluations (initial slope {slope:.3e})")]
    LineSearch { evals: usize, slope: f64 },

    /// A NaN or infinity appeared where a finite value was required.
    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    /// Inconsistent internal state; indicates a bug.
    #[error("internal inconsistency: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

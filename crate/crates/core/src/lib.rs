//! Band structure of 1D periodic Schrödinger (Hill) operators and the inverse
//! problem of recovering a periodic potential from target bands.
//!
//! The operator −d²/dx² + V on the torus [0, 2π) fibers over the Brillouin
//! zone Γ* = [−1/2, 1/2) into self-adjoint operators A_q = |−i d/dx + q|² + V
//! whose ordered eigenvalues ε_{q,m} form the bands. Everything here works in
//! the plane-wave basis e^{ikx}/√(2π), |k| ≤ s.
//!
//! Module map:
//! - [`fourier`]: real trigonometric potentials, exponential coefficients,
//!   Dirac-comb measures, and the potential text format.
//! - [`bloch`]: fiber assembly, dense Hermitian eigensolves, band sweeps.
//! - [`oracle`]: closed-form references — free bands and the Kronig–Penney
//!   dispersion relation solved by bisection.
//! - [`objective`]: least-squares band misfit and its exact Hellmann–Feynman
//!   gradient in potential coefficients.
//! - [`optim`]: steepest descent, Polak–Ribière, and BFGS with a strong-Wolfe
//!   line search, plus per-iteration run records.
//! - [`estimator`]: a posteriori eigenvalue error bounds and the derived
//!   refinement indicators.
//! - [`adaptive`]: the driver that grows the discretization (s) and the
//!   coefficient space (p) during optimization.
//! - [`rng`]: pinned SplitMix64 stream for reproducible random targets.

pub mod adaptive;
pub mod bloch;
mod error;
pub mod estimator;
pub mod fourier;
pub mod objective;
pub mod optim;
pub mod oracle;
pub mod rng;

pub use error::{Error, Result};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar the library is generic over; `f32` and `f64` qualify.
pub trait Scalar: RealField + FromPrimitive + ToPrimitive + Copy + Send + Sync {}
impl<T> Scalar for T where T: RealField + FromPrimitive + ToPrimitive + Copy + Send + Sync {}

/// Complex number over the working scalar.
pub type Cplx<T> = nalgebra::Complex<T>;

/// Converts an `f64` literal to the working scalar.
#[inline]
pub(crate) fn fl<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("numeric literal must convert to the working scalar")
}

/// Formats a value with 17 significant digits, enough to round-trip an `f64`.
pub(crate) fn fmt17<T: Scalar>(x: T) -> String {
    format!("{:.16e}", x.to_f64().unwrap_or(f64::NAN))
}

// Concrete aliases for the common instantiations.
pub type TrigPotential64 = fourier::TrigPotential<f64>;
pub type TrigPotential32 = fourier::TrigPotential<f32>;
pub type ExpCoeffs64 = fourier::ExpCoeffs<f64>;
pub type MeasurePotential64 = fourier::MeasurePotential<f64>;
pub type QGrid64 = bloch::QGrid<f64>;
pub type BandSheet64 = bloch::BandSheet<f64>;
pub type TargetBands64 = objective::TargetBands<f64>;
pub type RunRecord64 = optim::RunRecord<f64>;

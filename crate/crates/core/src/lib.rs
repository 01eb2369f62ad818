//! Band and long-range percolation random matrices: sampling, spectra,
//! resolvents, the finite self-consistent system, cumulant expansions and
//! Monte Carlo scans of the variance and semicircle convergence rates.
//!
//! Numerical code is generic over [`scalar::Real`] (`f32`, `f64`); the
//! moment/cumulant algebra also accepts exact rationals.

pub mod cumulant_expansion;
pub mod ensemble;
pub mod entries;
pub mod error;
pub mod experiments;
pub mod kernels;
pub mod linalg;
pub mod quadrature;
pub mod resolvent;
pub mod rng;
pub mod scalar;
pub mod spectra;

pub use error::{Error, Result};

pub type Matrix64 = ensemble::SampledMatrix<f64>;
pub type Matrix32 = ensemble::SampledMatrix<f32>;
pub type Spectrum64 = spectra::Spectrum<f64>;
pub type Spectrum32 = spectra::Spectrum<f32>;
pub type Complex64 = scalar::C<f64>;
pub type Complex32 = scalar::C<f32>;
pub type FixedPoint64 = resolvent::FixedPointSolution<f64>;
pub type Cumulants64 = entries::CumulantVector<f64>;
/// Cumulants of a finitely supported law with rational atoms, computed exactly.
pub type ExactCumulants = entries::CumulantVector<num_rational::Rational64>;

//! A desk-scale laboratory for popular-difference phenomena in F_p^n:
//! progression-free set constructions, exact per-difference 3-AP spectra,
//! weak regularity and density-increment steps, and the multilevel weighted
//! counterexample construction, with every identity checked exactly.
//!
//! Core computations are generic over the scalar: `f64` for large scans,
//! `BigRational` wherever an identity is asserted bit-exactly.

mod bitset;
pub mod capsets;
pub mod construction;
pub mod error;
pub mod fourier;
pub mod group;
pub mod io;
pub mod regularity;
pub mod sampling;
pub mod scalar;
pub mod spectrum;
pub mod weighted;

pub use error::{Error, Result};
pub use group::{AffineSubspace, MatrixGF, PrimeModulus, Space};
pub use scalar::{rat, Rat, Scalar};
pub use weighted::{WeightedF64, WeightedFunction, WeightedRat};

/// Spectrum over exact rationals.
pub type SpectrumRat = spectrum::Spectrum<Rat>;
/// Spectrum over f64.
pub type SpectrumF64 = spectrum::Spectrum<f64>;

//! Simulated CMB power spectra as a random bit generator.
//!
//! The crate covers the numerical side (Gaussian sky simulation on a
//! Gauss–Legendre grid, pseudo-Cℓ estimation, binning, Gaussian likelihoods
//! and noise/signal separation) and the cryptographic side (bit harvesting
//! below the noise floor, FIPS 140-2 power-up tests, XOR key combination and
//! a Vernam one-time pad with an n×n key matrix).

pub mod entropy;
pub mod error;
pub mod harmonics;
pub mod io;
pub mod likelihood;
pub mod rng;
pub mod skysim;
pub mod vernam;

pub use error::{Error, Result};

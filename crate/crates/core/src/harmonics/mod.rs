//! Forward spherical-harmonic analysis, pseudo-spectra and spectral binning.

mod alm;
mod binning;
pub mod legendre;
pub mod sht;
mod spectra;

pub use alm::HarmonicCoeffs;
pub use binning::{bin_spectrum, effective_modes, make_binning, Bin, BinnedSpectrum, BinningScheme};
pub use sht::analyze_map;
pub use spectra::{pseudo_cross_spectrum, CrossSpectrumSet, PseudoSpectrum};

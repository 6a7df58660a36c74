//! Band-limited Gaussian skies, detector noise and sky masks.

mod grid;
mod map;
mod spectrum;

use num_complex::Complex64;

pub use grid::{gauss_legendre, SphereGrid};
pub use map::{add_noise, apply_mask, SkyMap, SkyMask};
pub use spectrum::{fiducial_spectrum, AngularSpectrum, ToyModelParams};

use crate::error::Result;
use crate::harmonics::{sht, HarmonicCoeffs};
use crate::rng::SplitMix64;

/// Draws a Gaussian realization of `spectrum`: a_ℓ0 ~ N(0, Cℓ) and, for m > 0,
/// independent real and imaginary parts ~ N(0, Cℓ/2). Draw order is ℓ-major,
/// then m, then (re, im); zero-power multipoles still consume their draws.
pub fn synthesize_alm(spectrum: &AngularSpectrum, seed: u64) -> HarmonicCoeffs {
    let lmax = spectrum.lmax();
    let mut alm = HarmonicCoeffs::zeros(lmax, "");
    let mut rng = SplitMix64::new(seed);
    for l in 0..=lmax {
        let cl = spectrum.get(l);
        let full = cl.sqrt();
        let half = (cl / 2.0).sqrt();
        alm.set(l, 0, Complex64::new(full * rng.next_normal(), 0.0));
        for m in 1..=l {
            let re = half * rng.next_normal();
            let im = half * rng.next_normal();
            alm.set(l, m, Complex64::new(re, im));
        }
    }
    alm
}

pub fn synthesize_map(alm: &HarmonicCoeffs, grid: &SphereGrid) -> Result<SkyMap> {
    let pixels = sht::synthesize(alm, grid)?;
    SkyMap::new(grid.clone(), pixels, alm.detector_id.clone())
}

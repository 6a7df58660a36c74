//! Spherical-harmonic synthesis and analysis on the Gauss–Legendre grid.
//!
//! Both directions parallelize over latitude rings. Each ring is computed with
//! a fixed loop order and ring contributions are reduced sequentially in ring
//! order, so results do not depend on the thread schedule.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::skysim::{SkyMap, SphereGrid};

use super::alm::HarmonicCoeffs;
use super::legendre::{lm_index, n_lm, normalized_legendre_into};

/// cos and sin of 2πk/n for k in 0..n.
fn trig_table(n: usize) -> (Vec<f64>, Vec<f64>) {
    (0..n)
        .map(|k| (std::f64::consts::TAU * k as f64 / n as f64).sin_cos())
        .map(|(s, c)| (c, s))
        .unzip()
}

/// Evaluates T(θ, φ) = Σ a_ℓm Y_ℓm(θ, φ) on every pixel of `grid`.
pub fn synthesize(alm: &HarmonicCoeffs, grid: &SphereGrid) -> Result<Vec<f64>> {
    let lmax = alm.lmax();
    if grid.lmax() < lmax {
        return Err(Error::BandLimit {
            requested: lmax,
            available: grid.lmax(),
        });
    }
    let n_phi = grid.n_phi();
    let (cos_t, sin_t) = trig_table(n_phi);
    let rings: Vec<Vec<f64>> = grid
        .cos_theta()
        .par_iter()
        .map(|&x| {
            let mut lambda = vec![0.0; n_lm(lmax)];
            normalized_legendre_into(lmax, x, &mut lambda);
            let fm: Vec<Complex64> = (0..=lmax)
                .map(|m| {
                    (m..=lmax).fold(Complex64::new(0.0, 0.0), |acc, l| {
                        acc + alm.get(l, m) * lambda[lm_index(l, m)]
                    })
                })
                .collect();
            (0..n_phi)
                .map(|k| {
                    let mut t = fm[0].re;
                    for (m, f) in fm.iter().enumerate().skip(1) {
                        let idx = (m * k) % n_phi;
                        t += 2.0 * (f.re * cos_t[idx] - f.im * sin_t[idx]);
                    }
                    t
                })
                .collect()
        })
        .collect();
    Ok(rings.concat())
}

/// Quadrature estimate a_ℓm = Σ_p T_p Y*_ℓm(p) Ω_p, exact for band-limited maps.
pub fn analyze(pixels: &[f64], grid: &SphereGrid, lmax: usize) -> Result<Vec<Complex64>> {
    if lmax > grid.lmax() {
        return Err(Error::BandLimit {
            requested: lmax,
            available: grid.lmax(),
        });
    }
    if pixels.len() != grid.n_pixels() {
        return Err(Error::GridMismatch(format!(
            "{} pixels for a grid of {}",
            pixels.len(),
            grid.n_pixels()
        )));
    }
    let n_phi = grid.n_phi();
    let (cos_t, sin_t) = trig_table(n_phi);
    let contributions: Vec<Vec<Complex64>> = (0..grid.n_theta())
        .into_par_iter()
        .map(|j| {
            let ring = &pixels[j * n_phi..(j + 1) * n_phi];
            let area = grid.pixel_area(j);
            let gm: Vec<Complex64> = (0..=lmax)
                .map(|m| {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (k, &t) in ring.iter().enumerate() {
                        let idx = (m * k) % n_phi;
                        acc.re += t * cos_t[idx];
                        acc.im -= t * sin_t[idx];
                    }
                    acc * area
                })
                .collect();
            let mut lambda = vec![0.0; n_lm(lmax)];
            normalized_legendre_into(lmax, grid.cos_theta()[j], &mut lambda);
            let mut out = vec![Complex64::new(0.0, 0.0); n_lm(lmax)];
            for l in 0..=lmax {
                for m in 0..=l {
                    let i = lm_index(l, m);
                    out[i] = gm[m] * lambda[i];
                }
            }
            out
        })
        .collect();
    let mut total = vec![Complex64::new(0.0, 0.0); n_lm(lmax)];
    for ring in &contributions {
        for (t, c) in total.iter_mut().zip(ring) {
            *t += c;
        }
    }
    for l in 0..=lmax {
        total[lm_index(l, 0)].im = 0.0;
    }
    Ok(total)
}

/// Forward transform of a map into a_ℓm up to `lmax`.
pub fn analyze_map(map: &SkyMap, lmax: usize) -> Result<HarmonicCoeffs> {
    let coeffs = analyze(&map.pixels, &map.grid, lmax)?;
    HarmonicCoeffs::from_vec(lmax, map.detector_id.clone(), coeffs)
}

//! Orthonormalized associated Legendre functions.
//!
//! λ_ℓm(x) = √((2ℓ+1)/4π · (ℓ−m)!/(ℓ+m)!) P_ℓm(x) with the Condon–Shortley
//! phase, so that Y_ℓm(θ, φ) = λ_ℓm(cos θ) e^{imφ}.

use std::f64::consts::PI;

/// Index of (ℓ, m), 0 ≤ m ≤ ℓ, in ℓ-major triangular storage.
#[inline]
pub fn lm_index(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

#[inline]
pub fn n_lm(lmax: usize) -> usize {
    (lmax + 1) * (lmax + 2) / 2
}

/// Fills λ_ℓm(x) for all 0 ≤ m ≤ ℓ ≤ lmax into `out` (length `n_lm(lmax)`).
pub fn normalized_legendre_into(lmax: usize, x: f64, out: &mut [f64]) {
    debug_assert_eq!(out.len(), n_lm(lmax));
    let sin_theta = (1.0 - x * x).max(0.0).sqrt();
    let mut pmm = (1.0 / (4.0 * PI)).sqrt();
    for m in 0..=lmax {
        if m > 0 {
            let mf = m as f64;
            pmm *= -((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * sin_theta;
        }
        out[lm_index(m, m)] = pmm;
        if m == lmax {
            break;
        }
        let mf = m as f64;
        let mut p_prev = pmm;
        let mut p_cur = x * (2.0 * mf + 3.0).sqrt() * pmm;
        out[lm_index(m + 1, m)] = p_cur;
        for l in (m + 2)..=lmax {
            let lf = l as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0).powi(2) - mf * mf) / (4.0 * (lf - 1.0).powi(2) - 1.0)).sqrt();
            let p_next = a * (x * p_cur - b * p_prev);
            out[lm_index(l, m)] = p_next;
            p_prev = p_cur;
            p_cur = p_next;
        }
    }
}

pub fn normalized_legendre(lmax: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; n_lm(lmax)];
    normalized_legendre_into(lmax, x, &mut out);
    out
}

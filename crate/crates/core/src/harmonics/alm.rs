use num_complex::Complex64;

use crate::error::{Error, Result};

use super::legendre::{lm_index, n_lm};

/// Spherical-harmonic coefficients a_ℓm of a real map, stored for m ≥ 0 only.
/// Negative m follow from a_ℓ,−m = (−1)^m conj(a_ℓm).
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicCoeffs {
    lmax: usize,
    pub detector_id: String,
    coeffs: Vec<Complex64>,
}

impl HarmonicCoeffs {
    pub fn zeros(lmax: usize, detector_id: impl Into<String>) -> Self {
        Self {
            lmax,
            detector_id: detector_id.into(),
            coeffs: vec![Complex64::new(0.0, 0.0); n_lm(lmax)],
        }
    }

    pub fn from_vec(
        lmax: usize,
        detector_id: impl Into<String>,
        coeffs: Vec<Complex64>,
    ) -> Result<Self> {
        if coeffs.len() != n_lm(lmax) {
            return Err(Error::LmaxMismatch(format!(
                "{} coefficients for lmax {lmax}",
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::param("non-finite harmonic coefficient"));
        }
        for l in 0..=lmax {
            let im = coeffs[lm_index(l, 0)].im;
            if im.abs() > 1e-12 {
                return Err(Error::param(format!("a_{l}0 has imaginary part {im}")));
            }
        }
        Ok(Self {
            lmax,
            detector_id: detector_id.into(),
            coeffs,
        })
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    #[inline]
    pub fn get(&self, l: usize, m: usize) -> Complex64 {
        self.coeffs[lm_index(l, m)]
    }

    /// Sets a_ℓm; for m = 0 only the real part is kept.
    pub fn set(&mut self, l: usize, m: usize, value: Complex64) {
        let v = if m == 0 { Complex64::new(value.re, 0.0) } else { value };
        self.coeffs[lm_index(l, m)] = v;
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn max_abs_diff(&self, other: &HarmonicCoeffs) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

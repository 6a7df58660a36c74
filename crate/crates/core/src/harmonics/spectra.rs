use std::collections::BTreeMap;

use crate::error::{Error, Result};

use super::alm::HarmonicCoeffs;

/// Pseudo cross-spectrum C̃ℓ^ij of a detector pair, ℓ = 0..=lmax, μK².
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoSpectrum {
    pub pair: (usize, usize),
    values: Vec<f64>,
}

impl PseudoSpectrum {
    pub fn new(pair: (usize, usize), values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::param("pseudo-spectrum needs at least one multipole"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("non-finite pseudo-spectrum value"));
        }
        Ok(Self { pair, values })
    }

    pub fn lmax(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, l: usize) -> f64 {
        self.values[l]
    }

    pub fn is_auto(&self) -> bool {
        self.pair.0 == self.pair.1
    }
}

/// C̃ℓ = (1/(2ℓ+1)) Σ_{m=−ℓ}^{ℓ} a_ℓm conj(b_ℓm), with the negative-m half
/// folded onto m > 0 through the reality condition.
pub fn pseudo_cross_spectrum(a: &HarmonicCoeffs, b: &HarmonicCoeffs) -> Result<Vec<f64>> {
    if a.lmax() != b.lmax() {
        return Err(Error::LmaxMismatch(format!(
            "cross-spectrum of lmax {} and lmax {}",
            a.lmax(),
            b.lmax()
        )));
    }
    Ok((0..=a.lmax())
        .map(|l| {
            let mut sum = (a.get(l, 0) * b.get(l, 0).conj()).re;
            for m in 1..=l {
                sum += 2.0 * (a.get(l, m) * b.get(l, m).conj()).re;
            }
            sum / (2 * l + 1) as f64
        })
        .collect())
}

/// All auto- and cross-spectra between `n_detectors` detectors, keyed by
/// the ordered pair (i, j) with i ≤ j.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSpectrumSet {
    pub n_detectors: usize,
    pub f_sky: f64,
    spectra: BTreeMap<(usize, usize), PseudoSpectrum>,
}

impl CrossSpectrumSet {
    pub fn from_coeffs(coeffs: &[HarmonicCoeffs], f_sky: f64) -> Result<Self> {
        let mut set = Self::empty(coeffs.len(), f_sky)?;
        for i in 0..coeffs.len() {
            for j in i..coeffs.len() {
                let values = pseudo_cross_spectrum(&coeffs[i], &coeffs[j])?;
                set.insert(PseudoSpectrum::new((i, j), values)?)?;
            }
        }
        Ok(set)
    }

    pub fn empty(n_detectors: usize, f_sky: f64) -> Result<Self> {
        if !(f_sky > 0.0 && f_sky <= 1.0) {
            return Err(Error::param(format!("f_sky must lie in (0, 1], got {f_sky}")));
        }
        Ok(Self {
            n_detectors,
            f_sky,
            spectra: BTreeMap::new(),
        })
    }

    pub fn insert(&mut self, spectrum: PseudoSpectrum) -> Result<()> {
        let (i, j) = spectrum.pair;
        let key = (i.min(j), i.max(j));
        if key.1 >= self.n_detectors {
            return Err(Error::param(format!(
                "pair ({i}, {j}) outside {} detectors",
                self.n_detectors
            )));
        }
        if let Some(first) = self.spectra.values().next() {
            if first.lmax() != spectrum.lmax() {
                return Err(Error::LmaxMismatch(format!(
                    "pair ({i}, {j}) has lmax {} but the set has {}",
                    spectrum.lmax(),
                    first.lmax()
                )));
            }
        }
        self.spectra.insert(key, PseudoSpectrum { pair: key, ..spectrum });
        Ok(())
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&PseudoSpectrum> {
        self.spectra.get(&(i.min(j), i.max(j)))
    }

    pub fn lmax(&self) -> Option<usize> {
        self.spectra.values().next().map(PseudoSpectrum::lmax)
    }

    pub fn iter(&self) -> impl Iterator<Item = &PseudoSpectrum> {
        self.spectra.values()
    }

    pub fn len(&self) -> usize {
        self.spectra.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spectra.is_empty()
    }
}

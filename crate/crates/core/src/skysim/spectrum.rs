use crate::error::{Error, Result};

/// Angular power spectrum Cℓ for ℓ = 0..=lmax, in μK².
#[derive(Debug, Clone, PartialEq)]
pub struct AngularSpectrum {
    values: Vec<f64>,
}

impl AngularSpectrum {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::param("spectrum needs at least one multipole"));
        }
        if let Some((l, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::param(format!("C_{l} = {v} is negative or non-finite")));
        }
        Ok(Self { values })
    }

    /// Spectrum equal to `value` for ℓ ≥ `lmin` and zero below.
    pub fn flat(lmax: usize, lmin: usize, value: f64) -> Result<Self> {
        Self::new((0..=lmax).map(|l| if l >= lmin { value } else { 0.0 }).collect())
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
}

/// Parameters of the damped toy spectrum Cℓ = A·exp(−(ℓ/ℓ_damp)²)/(ℓ(ℓ+1)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyModelParams {
    pub amplitude: f64,
    pub l_damp: f64,
}

impl ToyModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0) || !self.amplitude.is_finite() {
            return Err(Error::param(format!(
                "amplitude must be non-negative, got {}",
                self.amplitude
            )));
        }
        if !(self.l_damp > 0.0) || !self.l_damp.is_finite() {
            return Err(Error::param(format!(
                "damping scale must be positive, got {}",
                self.l_damp
            )));
        }
        Ok(())
    }
}

pub fn fiducial_spectrum(params: ToyModelParams, lmax: usize) -> Result<AngularSpectrum> {
    params.validate()?;
    if lmax < 2 {
        return Err(Error::param(format!("lmax must be at least 2, got {lmax}")));
    }
    let values = (0..=lmax)
        .map(|l| {
            if l < 2 {
                0.0
            } else {
                let lf = l as f64;
                params.amplitude * (-(lf / params.l_damp).powi(2)).exp() / (lf * (lf + 1.0))
            }
        })
        .collect();
    AngularSpectrum::new(values)
}

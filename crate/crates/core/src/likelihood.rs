//! Gaussian likelihoods of angular spectra and detector noise estimation.
//!
//! The divergence between zero-mean Gaussians with covariances Ĉ and C is
//! κ = ½[tr(ĈC⁻¹) − ln det(ĈC⁻¹) − n]. The exact full-sky likelihood sums
//! (2ℓ+1)κ over multipoles; the binned approximation sums n_r κ over bins.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::harmonics::CrossSpectrumSet;

const SYMMETRY_TOL: f64 = 1e-12;

/// Real symmetric covariance over detectors, μK².
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix(DMatrix<f64>);

impl CovMatrix {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "covariance must be square and non-empty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("non-finite covariance entry"));
        }
        let scale = matrix.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let asym = (&matrix - matrix.transpose()).amax();
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(Self(matrix))
    }

    pub fn scalar(value: f64) -> Result<Self> {
        Self::new(DMatrix::from_element(1, 1, value))
    }

    pub fn from_row_slice(n: usize, values: &[f64]) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::Dimension(format!("{} values for a {n}x{n} matrix", values.len())));
        }
        Self::new(DMatrix::from_row_slice(n, n, values))
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(values)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// A·M·Aᵀ, symmetrized to absorb rounding.
    pub fn congruence(&self, a: &DMatrix<f64>) -> Result<Self> {
        let m = a * &self.0 * a.transpose();
        Self::new((&m + m.transpose()) * 0.5)
    }
}

/// κ(Ĉ, C). Returns `f64::INFINITY` when Ĉ is singular or indefinite.
pub fn kullback(chat: &CovMatrix, c: &CovMatrix) -> Result<f64> {
    let n = c.dim();
    if chat.dim() != n {
        return Err(Error::Dimension(format!(
            "empirical {}x{} vs model {n}x{n}",
            chat.dim(),
            chat.dim()
        )));
    }
    if n == 1 {
        return scalar_kullback(chat.0[(0, 0)], c.0[(0, 0)]);
    }
    let model = c.0.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    let Some(data) = chat.0.clone().cholesky() else {
        return Ok(f64::INFINITY);
    };
    let trace = model.solve(&chat.0).trace();
    let log_det = |l: &DMatrix<f64>| 2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let log_det_ratio = log_det(&data.l()) - log_det(&model.l());
    if !log_det_ratio.is_finite() {
        return Ok(f64::INFINITY);
    }
    Ok(0.5 * (trace - log_det_ratio - n as f64))
}

fn scalar_kullback(chat: f64, c: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    if !(chat > 0.0) {
        return Ok(f64::INFINITY);
    }
    let x = chat / c;
    Ok(0.5 * (x - x.ln() - 1.0))
}

/// −ln p(maps|θ) up to a constant: Σ_{ℓ=lmin}^{lmax} (2ℓ+1) κ(Ĉℓ, Cℓ(θ)).
/// `chat` is indexed by ℓ.
pub fn exact_loglike<F>(chat: &[CovMatrix], model: F, lmin: usize, lmax: usize) -> Result<f64>
where
    F: Fn(usize) -> Result<CovMatrix>,
{
    if lmin < 2 {
        return Err(Error::param(format!("lmin must be at least 2, got {lmin}")));
    }
    if lmax < lmin || lmax >= chat.len() {
        return Err(Error::LmaxMismatch(format!(
            "range [{lmin}, {lmax}] against {} empirical multipoles",
            chat.len()
        )));
    }
    (lmin..=lmax).try_fold(0.0, |acc, l| {
        Ok(acc + (2 * l + 1) as f64 * kullback(&chat[l], &model(l)?)?)
    })
}

/// L(θ) = Σ_r n_r κ(Ĉ_r, C_r) for a single detector pair.
pub fn binned_loglike(data: &[f64], model: &[f64], modes: &[f64]) -> Result<f64> {
    if data.len() != model.len() || data.len() != modes.len() {
        return Err(Error::Dimension(format!(
            "{} data bins, {} model bins, {} mode counts",
            data.len(),
            model.len(),
            modes.len()
        )));
    }
    if let Some(r) = model.iter().position(|&c| !(c > 0.0)) {
        return Err(Error::param(format!("model bin {r} is not positive")));
    }
    data.iter()
        .zip(model)
        .zip(modes)
        .try_fold(0.0, |acc, ((&d, &m), &n)| Ok(acc + n * scalar_kullback(d, m)?))
}

/// Output of the two-step noise/signal separation.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseEstimate {
    /// N_i(ℓ) per detector, μK².
    pub noise: Vec<Vec<f64>>,
    /// Signal from step one: mean of all cross-spectra.
    pub signal_initial: Vec<f64>,
    /// Signal re-extracted in step two from cross-spectra with noise held fixed.
    pub signal: Vec<f64>,
    /// Approximate one-sigma sampling error of N_i(ℓ).
    pub sampling_error: Vec<Vec<f64>>,
    /// (detector, ℓ) entries with N_i(ℓ) below −5σ.
    pub flagged: Vec<(usize, usize)>,
}

impl NoiseEstimate {
    pub fn mean_noise(&self, detector: usize, lmin: usize, lmax: usize) -> f64 {
        let s = &self.noise[detector][lmin..=lmax];
        s.iter().sum::<f64>() / s.len() as f64
    }
}

/// Two-step separation. Step one estimates the signal as the mean of all
/// cross-spectra (i < j) and each detector's noise as its auto-spectrum minus
/// that signal. Step two fixes the noise and re-extracts the signal from the
/// cross-spectra alone, weighting pair (i, j) by the inverse of its fiducial
/// Gaussian variance (S+N_i)(S+N_j) + S².
pub fn estimate_noise_and_signal(spectra: &CrossSpectrumSet) -> Result<NoiseEstimate> {
    let n = spectra.n_detectors;
    if n < 2 {
        return Err(Error::param("noise estimation needs at least two detectors"));
    }
    let lmax = spectra
        .lmax()
        .ok_or_else(|| Error::param("no spectra in the set"))?;
    let mut auto = Vec::with_capacity(n);
    for i in 0..n {
        let s = spectra
            .get(i, i)
            .ok_or_else(|| Error::param(format!("missing auto-spectrum ({i}, {i})")))?;
        auto.push(s.values());
    }
    let mut cross = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let s = spectra
                .get(i, j)
                .ok_or_else(|| Error::param(format!("missing cross-spectrum ({i}, {j})")))?;
            cross.push(((i, j), s.values()));
        }
    }
    if spectra.iter().all(|s| s.values().iter().all(|&v| v == 0.0)) {
        return Err(Error::param("all spectra are zero"));
    }

    let n_cross = cross.len() as f64;
    let signal_initial: Vec<f64> = (0..=lmax)
        .map(|l| cross.iter().map(|(_, c)| c[l]).sum::<f64>() / n_cross)
        .collect();
    let noise: Vec<Vec<f64>> = auto
        .iter()
        .map(|a| (0..=lmax).map(|l| a[l] - signal_initial[l]).collect())
        .collect();

    let signal: Vec<f64> = (0..=lmax)
        .map(|l| {
            let s = signal_initial[l].max(0.0);
            let (num, den) = cross.iter().fold((0.0, 0.0), |(num, den), ((i, j), c)| {
                let var = (s + noise[*i][l].max(0.0)) * (s + noise[*j][l].max(0.0)) + s * s;
                let w = if var > 0.0 { 1.0 / var } else { 0.0 };
                (num + w * c[l], den + w)
            });
            if den > 0.0 && num.is_finite() {
                num / den
            } else {
                signal_initial[l]
            }
        })
        .collect();

    let f_sky = spectra.f_sky;
    let sampling_error: Vec<Vec<f64>> = noise
        .iter()
        .map(|ni| {
            (0..=lmax)
                .map(|l| {
                    let level = signal_initial[l].max(0.0) + ni[l].max(0.0);
                    (2.0 / ((2 * l + 1) as f64 * f_sky)).sqrt() * level
                })
                .collect()
        })
        .collect();
    let mut flagged = Vec::new();
    for (i, ni) in noise.iter().enumerate() {
        for l in 0..=lmax {
            if ni[l] < -5.0 * sampling_error[i][l] {
                flagged.push((i, l));
            }
        }
    }

    Ok(NoiseEstimate {
        noise,
        signal_initial,
        signal,
        sampling_error,
        flagged,
    })
}

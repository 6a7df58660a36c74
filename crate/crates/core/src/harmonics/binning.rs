use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Bin {
    pub lmin: usize,
    pub lmax: usize,
    /// w_r(ℓ) for ℓ = lmin..=lmax.
    pub weights: Vec<f64>,
}

impl Bin {
    pub fn weight(&self, l: usize) -> f64 {
        if l < self.lmin || l > self.lmax {
            0.0
        } else {
            self.weights[l - self.lmin]
        }
    }

    pub fn multipoles(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.lmin..=self.lmax).zip(self.weights.iter().copied())
    }

    /// Σ_ℓ∈bin (2ℓ+1), the full-sky mode count of the bin.
    pub fn mode_count(&self) -> f64 {
        (self.lmin..=self.lmax).map(|l| (2 * l + 1) as f64).sum()
    }
}

/// Spectral bins weighted by ℓ(ℓ+1)(2ℓ+1), normalized to unit sum per bin.
#[derive(Debug, Clone, PartialEq)]
pub struct BinningScheme {
    bins: Vec<Bin>,
}

impl BinningScheme {
    pub fn bins(&self) -> &[Bin] {
        &self.bins
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn ranges(&self) -> Vec<(usize, usize)> {
        self.bins.iter().map(|b| (b.lmin, b.lmax)).collect()
    }

    pub fn lmax(&self) -> Option<usize> {
        self.bins.last().map(|b| b.lmax)
    }

    /// Consecutive bins of `width` multipoles covering lmin..=lmax; the last
    /// bin is truncated at lmax.
    pub fn uniform(lmin: usize, lmax: usize, width: usize) -> Result<Self> {
        if width == 0 || lmax < lmin {
            return Err(Error::Binning(format!(
                "cannot tile [{lmin}, {lmax}] with width {width}"
            )));
        }
        let ranges: Vec<_> = (lmin..=lmax)
            .step_by(width)
            .map(|lo| (lo, (lo + width - 1).min(lmax)))
            .collect();
        make_binning(&ranges)
    }
}

pub fn make_binning(ranges: &[(usize, usize)]) -> Result<BinningScheme> {
    if ranges.is_empty() {
        return Err(Error::Binning("no bins".into()));
    }
    let mut bins = Vec::with_capacity(ranges.len());
    let mut previous: Option<usize> = None;
    for &(lmin, lmax) in ranges {
        if lmin < 2 {
            return Err(Error::Binning(format!("bin [{lmin}, {lmax}] starts below ℓ = 2")));
        }
        if lmax < lmin {
            return Err(Error::Binning(format!("bin [{lmin}, {lmax}] is descending")));
        }
        if let Some(p) = previous {
            if lmin <= p {
                return Err(Error::Binning(format!(
                    "bin [{lmin}, {lmax}] overlaps or precedes a bin ending at {p}"
                )));
            }
        }
        previous = Some(lmax);
        let raw: Vec<f64> = (lmin..=lmax)
            .map(|l| {
                let lf = l as f64;
                lf * (lf + 1.0) * (2.0 * lf + 1.0)
            })
            .collect();
        let norm: f64 = raw.iter().sum();
        bins.push(Bin {
            lmin,
            lmax,
            weights: raw.iter().map(|v| v / norm).collect(),
        });
    }
    Ok(BinningScheme { bins })
}

/// Ĉ_r = Σ_ℓ w_r(ℓ) Cℓ for every bin; works on empirical and model spectra alike.
pub fn bin_spectrum(values: &[f64], scheme: &BinningScheme) -> Result<Vec<f64>> {
    let top = scheme.lmax().ok_or_else(|| Error::Binning("no bins".into()))?;
    if values.len() <= top {
        return Err(Error::Binning(format!(
            "binning reaches ℓ = {top} but the spectrum stops at ℓ = {}",
            values.len() as isize - 1
        )));
    }
    Ok(scheme
        .bins
        .iter()
        .map(|b| b.multipoles().map(|(l, w)| w * values[l]).sum())
        .collect())
}

/// n_r = f_sky·(Σ(2ℓ+1)w_r)² / Σ(2ℓ+1)w_r² per bin.
pub fn effective_modes(scheme: &BinningScheme, f_sky: f64) -> Result<Vec<f64>> {
    if !(f_sky > 0.0 && f_sky <= 1.0) {
        return Err(Error::param(format!("f_sky must lie in (0, 1], got {f_sky}")));
    }
    Ok(scheme
        .bins
        .iter()
        .map(|b| {
            let (num, den) = b.multipoles().fold((0.0, 0.0), |(n, d), (l, w)| {
                let dof = (2 * l + 1) as f64;
                (n + dof * w, d + dof * w * w)
            });
            f_sky * num * num / den
        })
        .collect())
}

/// Binned band powers with their mode counts.
#[derive(Debug, Clone, PartialEq)]
pub struct BinnedSpectrum {
    pub pair: (usize, usize),
    pub ranges: Vec<(usize, usize)>,
    pub values: Vec<f64>,
    pub modes: Vec<f64>,
    pub f_sky: f64,
}

impl BinnedSpectrum {
    pub fn from_spectrum(
        pair: (usize, usize),
        values: &[f64],
        scheme: &BinningScheme,
        f_sky: f64,
    ) -> Result<Self> {
        Ok(Self {
            pair,
            ranges: scheme.ranges(),
            values: bin_spectrum(values, scheme)?,
            modes: effective_modes(scheme, f_sky)?,
            f_sky,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scheme(&self) -> Result<BinningScheme> {
        make_binning(&self.ranges)
    }
}

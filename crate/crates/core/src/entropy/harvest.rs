use crate::error::{Error, Result};
use crate::harmonics::BinnedSpectrum;

use super::bitstream::{von_neumann, BitStream, Provenance};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Whitening {
    None,
    VonNeumann,
}

impl Whitening {
    pub fn name(self) -> &'static str {
        match self {
            Whitening::None => "none",
            Whitening::VonNeumann => "von-neumann",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Whitening::None),
            "von-neumann" | "vonneumann" | "vn" => Ok(Whitening::VonNeumann),
            other => Err(Error::param(format!("unknown whitening '{other}'"))),
        }
    }
}

/// How band powers turn into bits: the quantum sits `guard` octaves below the
/// `bits_per_bin` extracted bits, which in turn sit below the noise scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExtractionPolicy {
    pub bits_per_bin: u32,
    pub guard: u32,
    pub whitening: Whitening,
}

impl ExtractionPolicy {
    pub fn new(bits_per_bin: u32, guard: u32, whitening: Whitening) -> Result<Self> {
        let p = Self {
            bits_per_bin,
            guard,
            whitening,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=16).contains(&self.bits_per_bin) {
            return Err(Error::param(format!(
                "bits per bin must be in 1..=16, got {}",
                self.bits_per_bin
            )));
        }
        if self.guard < 2 {
            return Err(Error::param(format!("guard factor must be at least 2, got {}", self.guard)));
        }
        Ok(())
    }

    pub fn id(&self) -> String {
        format!("k{}-g{}-{}", self.bits_per_bin, self.guard, self.whitening.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Harvest {
    pub stream: BitStream,
    /// Every extracted raw bit was zero.
    pub degenerate: bool,
}

/// Raw (unwhitened) bits of one binned spectrum.
///
/// Per bin: σ_r = C_r √(2/n_r), q_r = σ_r / 2^(k+g), and the k low-order bits
/// of ⌊Ĉ_r / q_r⌋ (two's complement) are emitted most significant first.
pub fn quantize_bins(data: &BinnedSpectrum, model: &[f64], policy: &ExtractionPolicy) -> Result<Vec<bool>> {
    policy.validate()?;
    if data.is_empty() {
        return Err(Error::Binning("no bins to harvest".into()));
    }
    if model.len() != data.len() || data.modes.len() != data.len() {
        return Err(Error::Dimension(format!(
            "{} data bins, {} model bins, {} mode counts",
            data.len(),
            model.len(),
            data.modes.len()
        )));
    }
    let k = policy.bits_per_bin;
    let scale = 2f64.powi((k + policy.guard) as i32);
    let mut bits = Vec::with_capacity(data.len() * k as usize);
    for r in 0..data.len() {
        let (c_model, n_r) = (model[r], data.modes[r]);
        if !(c_model > 0.0) {
            return Err(Error::param(format!("model bin {r} is not positive ({c_model})")));
        }
        if !(n_r > 0.0) {
            return Err(Error::param(format!("bin {r} has no effective modes ({n_r})")));
        }
        let sigma = c_model * (2.0 / n_r).sqrt();
        let q = sigma / scale;
        let level = (data.values[r] / q).floor();
        if !level.is_finite() || level.abs() >= i64::MAX as f64 {
            return Err(Error::param(format!("bin {r} value is out of quantizer range")));
        }
        let level = level as i64;
        bits.extend((0..k).rev().map(|b| (level >> b) & 1 == 1));
    }
    Ok(bits)
}

pub fn harvest_bits(data: &BinnedSpectrum, model: &[f64], policy: &ExtractionPolicy) -> Result<Harvest> {
    let source = format!("binned:{}x{}", data.pair.0, data.pair.1);
    harvest_many(std::slice::from_ref(data), model, policy, &source)
}

/// Concatenates the raw bits of several spectra in order, then whitens once.
pub fn harvest_many(
    data: &[BinnedSpectrum],
    model: &[f64],
    policy: &ExtractionPolicy,
    source: &str,
) -> Result<Harvest> {
    if data.is_empty() {
        return Err(Error::param("no spectra to harvest"));
    }
    let mut raw = Vec::new();
    for d in data {
        raw.extend(quantize_bins(d, model, policy)?);
    }
    let degenerate = !raw.iter().any(|&b| b);
    let bits = match policy.whitening {
        Whitening::None => raw,
        Whitening::VonNeumann => von_neumann(&raw),
    };
    Ok(Harvest {
        stream: BitStream::new(bits, Provenance::new(source, policy.id(), vec![])),
        degenerate,
    })
}

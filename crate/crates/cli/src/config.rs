//! `key = value` run configuration with command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use cmbrbg::entropy::{ExtractionPolicy, Whitening};
use cmbrbg::harmonics::{make_binning, BinningScheme};
use cmbrbg::skysim::ToyModelParams;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub lmax: usize,
    pub detectors: usize,
    pub amplitude: f64,
    pub l_damp: f64,
    /// One value for every detector, or one per detector.
    pub noise_sigma: Vec<f64>,
    /// Half-width in cos θ of the retained latitude band; 1 keeps the full sky.
    pub mask_zmax: f64,
    pub bins: String,
    pub bits_per_bin: u32,
    pub guard: u32,
    pub whitening: Whitening,
    pub seed: u64,
    pub matrix_n: usize,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            lmax: 32,
            detectors: 20,
            amplitude: 37_700.0,
            l_damp: 50.0,
            noise_sigma: vec![1000.0],
            mask_zmax: 1.0,
            bins: "2-32/1".into(),
            bits_per_bin: 4,
            guard: 4,
            whitening: Whitening::None,
            seed: 20_240_601,
            matrix_n: 16,
            out: PathBuf::from("cmbrbg-run"),
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            cfg.apply(line)
                .with_context(|| format!("{}:{}", path.display(), n + 1))?;
        }
        Ok(cfg)
    }

    /// Applies one `key = value` assignment.
    pub fn apply(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| anyhow!("expected 'key = value', got '{assignment}'"))?;
        let (key, value) = (key.trim(), value.trim());
        let bad = || format!("invalid value '{value}' for {key}");
        match key {
            "lmax" => self.lmax = value.parse().with_context(bad)?,
            "detectors" => self.detectors = value.parse().with_context(bad)?,
            "amplitude" => self.amplitude = value.parse().with_context(bad)?,
            "l_damp" => self.l_damp = value.parse().with_context(bad)?,
            "noise_sigma" => {
                self.noise_sigma = value
                    .split(',')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<Result<_, _>>()
                    .with_context(bad)?
            }
            "mask_zmax" => self.mask_zmax = value.parse().with_context(bad)?,
            "bins" => self.bins = value.to_string(),
            "bits_per_bin" => self.bits_per_bin = value.parse().with_context(bad)?,
            "guard" => self.guard = value.parse().with_context(bad)?,
            "whitening" => self.whitening = Whitening::parse(value)?,
            "seed" => self.seed = value.parse().with_context(bad)?,
            "matrix_n" => self.matrix_n = value.parse().with_context(bad)?,
            "out" => self.out = PathBuf::from(value),
            other => bail!("unknown config key '{other}'"),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.lmax < 2 {
            bail!("lmax must be at least 2");
        }
        if self.detectors == 0 {
            bail!("need at least one detector");
        }
        if self.noise_sigma.len() != 1 && self.noise_sigma.len() != self.detectors {
            bail!(
                "noise_sigma has {} values for {} detectors",
                self.noise_sigma.len(),
                self.detectors
            );
        }
        if !(0.0..=1.0).contains(&self.mask_zmax) || self.mask_zmax == 0.0 {
            bail!("mask_zmax must lie in (0, 1]");
        }
        self.toy_model().validate()?;
        self.policy()?;
        let scheme = self.binning()?;
        if scheme.lmax().unwrap_or(0) > self.lmax {
            bail!("bins reach beyond lmax = {}", self.lmax);
        }
        Ok(())
    }

    pub fn toy_model(&self) -> ToyModelParams {
        ToyModelParams {
            amplitude: self.amplitude,
            l_damp: self.l_damp,
        }
    }

    pub fn sigma_for(&self, detector: usize) -> f64 {
        if self.noise_sigma.len() == 1 {
            self.noise_sigma[0]
        } else {
            self.noise_sigma[detector]
        }
    }

    pub fn policy(&self) -> Result<ExtractionPolicy> {
        Ok(ExtractionPolicy::new(self.bits_per_bin, self.guard, self.whitening)?)
    }

    pub fn binning(&self) -> Result<BinningScheme> {
        Ok(make_binning(&parse_ranges(&self.bins)?)?)
    }
}

/// Parses "2-10,11-20" or "2-32/4" (uniform width) or a mix of both.
pub fn parse_ranges(text: &str) -> Result<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (range, width) = match part.split_once('/') {
            Some((r, w)) => (r, Some(w.trim().parse::<usize>().with_context(|| format!("bad width in '{part}'"))?)),
            None => (part, None),
        };
        let (lo, hi) = match range.split_once('-') {
            Some((a, b)) => (a.trim().parse::<usize>()?, b.trim().parse::<usize>()?),
            None => {
                let l = range.trim().parse::<usize>()?;
                (l, l)
            }
        };
        match width {
            Some(0) => bail!("bin width must be positive in '{part}'"),
            Some(w) => {
                let mut l = lo;
                while l <= hi {
                    out.push((l, (l + w - 1).min(hi)));
                    l += w;
                }
            }
            None => out.push((lo, hi)),
        }
    }
    if out.is_empty() {
        bail!("no bins in '{text}'");
    }
    Ok(out)
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sigmas: Vec<String> = self.noise_sigma.iter().map(|s| s.to_string()).collect();
        writeln!(f, "lmax = {}", self.lmax)?;
        writeln!(f, "detectors = {}", self.detectors)?;
        writeln!(f, "amplitude = {}", self.amplitude)?;
        writeln!(f, "l_damp = {}", self.l_damp)?;
        writeln!(f, "noise_sigma = {}", sigmas.join(","))?;
        writeln!(f, "mask_zmax = {}", self.mask_zmax)?;
        writeln!(f, "bins = {}", self.bins)?;
        writeln!(f, "bits_per_bin = {}", self.bits_per_bin)?;
        writeln!(f, "guard = {}", self.guard)?;
        writeln!(f, "whitening = {}", self.whitening.name())?;
        writeln!(f, "seed = {}", self.seed)?;
        writeln!(f, "matrix_n = {}", self.matrix_n)?;
        writeln!(f, "out = {}", self.out.display())
    }
}

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

use super::grid::SphereGrid;

/// Temperature map in μK on a Gauss–Legendre grid, ring-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SkyMap {
    pub grid: SphereGrid,
    pub pixels: Vec<f64>,
    pub detector_id: String,
    /// Set once a mask has been applied; the map is then a weighted map.
    pub masked: bool,
}

impl SkyMap {
    pub fn new(grid: SphereGrid, pixels: Vec<f64>, detector_id: impl Into<String>) -> Result<Self> {
        if pixels.len() != grid.n_pixels() {
            return Err(Error::GridMismatch(format!(
                "{} pixels for a grid of {}",
                pixels.len(),
                grid.n_pixels()
            )));
        }
        Ok(Self {
            grid,
            pixels,
            detector_id: detector_id.into(),
            masked: false,
        })
    }

    pub fn zeros(grid: SphereGrid, detector_id: impl Into<String>) -> Self {
        let n = grid.n_pixels();
        Self {
            grid,
            pixels: vec![0.0; n],
            detector_id: detector_id.into(),
            masked: false,
        }
    }

    pub fn ring(&self, j: usize) -> &[f64] {
        let n_phi = self.grid.n_phi();
        &self.pixels[j * n_phi..(j + 1) * n_phi]
    }
}

/// Per-pixel sky weights in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct SkyMask {
    pub grid: SphereGrid,
    values: Vec<f64>,
}

impl SkyMask {
    pub fn new(grid: SphereGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_pixels() {
            return Err(Error::GridMismatch(format!(
                "mask has {} values for a grid of {}",
                values.len(),
                grid.n_pixels()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::param(format!("mask value {v} outside [0, 1]")));
        }
        Ok(Self { grid, values })
    }

    pub fn full(grid: SphereGrid) -> Self {
        let n = grid.n_pixels();
        Self { grid, values: vec![1.0; n] }
    }

    pub fn empty(grid: SphereGrid) -> Self {
        let n = grid.n_pixels();
        Self { grid, values: vec![0.0; n] }
    }

    /// Keeps the band |cos θ| ≤ `zmax`.
    ///
    /// Ring j stands for the latitude cell between consecutive partial sums of
    /// the quadrature weights; the ring value is the fraction of that cell
    /// inside the band. Interior rings get 1, the two boundary rings get an
    /// apodized value, and f_sky equals `zmax` to rounding.
    pub fn latitude_band(grid: SphereGrid, zmax: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&zmax) {
            return Err(Error::param(format!("band half-width {zmax} outside [0, 1]")));
        }
        let n_phi = grid.n_phi();
        let mut values = Vec::with_capacity(grid.n_pixels());
        // Cells run from z = +1 downwards since rings are ordered north to south.
        let mut upper = 1.0;
        for &w in grid.ring_weights() {
            let lower = upper - w;
            let overlap = (upper.min(zmax) - lower.max(-zmax)).max(0.0);
            let v = (overlap / w).clamp(0.0, 1.0);
            values.extend(std::iter::repeat_n(v, n_phi));
            upper = lower;
        }
        Self::new(grid, values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Retained sky fraction Σ(mask·pixel area)/4π.
    pub fn f_sky(&self) -> f64 {
        let n_phi = self.grid.n_phi();
        let area: f64 = (0..self.grid.n_theta())
            .map(|j| {
                let ring: f64 = self.values[j * n_phi..(j + 1) * n_phi].iter().sum();
                ring * self.grid.pixel_area(j)
            })
            .sum();
        (area / (4.0 * std::f64::consts::PI)).clamp(0.0, 1.0)
    }
}

pub fn add_noise(map: &SkyMap, sigma_pix: f64, seed: u64) -> Result<SkyMap> {
    if !(sigma_pix >= 0.0) || !sigma_pix.is_finite() {
        return Err(Error::param(format!("noise sigma must be non-negative, got {sigma_pix}")));
    }
    let mut out = map.clone();
    if sigma_pix == 0.0 {
        return Ok(out);
    }
    let mut rng = SplitMix64::new(seed);
    for p in &mut out.pixels {
        *p += sigma_pix * rng.next_normal();
    }
    Ok(out)
}

pub fn apply_mask(map: &SkyMap, mask: &SkyMask) -> Result<SkyMap> {
    if map.grid != mask.grid {
        return Err(Error::GridMismatch(format!(
            "map band limit {} vs mask band limit {}",
            map.grid.lmax(),
            mask.grid.lmax()
        )));
    }
    let mut out = map.clone();
    for (p, m) in out.pixels.iter_mut().zip(mask.values()) {
        *p *= m;
    }
    out.masked = true;
    Ok(out)
}

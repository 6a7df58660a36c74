use std::f64::consts::{PI, TAU};

/// Gauss–Legendre iso-latitude grid with band limit `lmax`.
///
/// Rings are ordered north to south (`cos_theta` descending). Each ring holds
/// `2·lmax + 1` equally spaced longitudes starting at φ = 0. For band-limited
/// fields the grid integrates products of two such fields exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereGrid {
    lmax: usize,
    cos_theta: Vec<f64>,
    weights: Vec<f64>,
}

impl SphereGrid {
    pub fn new(lmax: usize) -> Self {
        let (cos_theta, weights) = gauss_legendre(lmax + 1);
        Self {
            lmax,
            cos_theta,
            weights,
        }
    }

    pub fn lmax(&self) -> usize {
        self.lmax
    }

    pub fn n_theta(&self) -> usize {
        self.lmax + 1
    }

    pub fn n_phi(&self) -> usize {
        2 * self.lmax + 1
    }

    pub fn n_pixels(&self) -> usize {
        self.n_theta() * self.n_phi()
    }

    pub fn cos_theta(&self) -> &[f64] {
        &self.cos_theta
    }

    /// Gauss–Legendre weights per ring; they sum to 2.
    pub fn ring_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Solid angle carried by every pixel of ring `ring`.
    pub fn pixel_area(&self, ring: usize) -> f64 {
        self.weights[ring] * TAU / self.n_phi() as f64
    }

    pub fn phi(&self, k: usize) -> f64 {
        TAU * k as f64 / self.n_phi() as f64
    }

    /// Sum of pixel areas over the whole grid (4π up to rounding).
    pub fn total_area(&self) -> f64 {
        (0..self.n_theta())
            .map(|j| self.pixel_area(j) * self.n_phi() as f64)
            .sum()
    }

    /// Expected pseudo-spectrum level of white pixel noise with standard
    /// deviation `sigma`: σ² Σ_p Ω_p² / 4π, flat in ℓ.
    pub fn white_noise_level(&self, sigma: f64) -> f64 {
        let sum_sq: f64 = (0..self.n_theta())
            .map(|j| self.pixel_area(j).powi(2) * self.n_phi() as f64)
            .sum();
        sigma * sigma * sum_sq / (4.0 * PI)
    }
}

/// Nodes (descending) and weights of the n-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = x;
        nodes[n - 1 - i] = -x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

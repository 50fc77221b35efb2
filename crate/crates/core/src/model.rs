//! Model parameters, SNR conversions and seeded samplers.
//!
//! Randomness comes from ChaCha8 streams (portable, reproducible across
//! platforms) and Gaussians from `rand_distr`'s Ziggurat `StandardNormal`.
//! Each independent block of the sample draws from its own ChaCha stream, so
//! results do not depend on how many threads fill the tensor.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Mat, Tensor3};
use crate::theory::ShapeRatios;

const STREAM_SIGNALS: u64 = 0;
const STREAM_MATRIX_NOISE: u64 = 1;
const STREAM_LABELS: u64 = 2;
const STREAM_TENSOR_NOISE: u64 = 16;

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for trial `index` of a run started from `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix64(mix64(master) ^ index.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_mul(0xd6e8_feb8_6659_fd93))
}

/// Independent ChaCha8 stream `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn fill_normal(rng: &mut impl Rng, out: &mut [f64]) {
    for v in out {
        *v = rng.sample(StandardNormal);
    }
}

/// Uniform draw from the unit sphere in `R^n` (normalized Gaussian).
pub fn unit_sphere(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    loop {
        fill_normal(rng, &mut v);
        if let Some(u) = crate::tensor::normalized(&v) {
            return u;
        }
    }
}

/// `ρ_T = β_T² n_T / √(n1 n2 n3)`.
pub fn rho_from_beta(dims: [usize; 3], beta_t: f64) -> f64 {
    let [n1, n2, n3] = dims.map(|d| d as f64);
    beta_t * beta_t * (n1 + n2 + n3) / (n1 * n2 * n3).sqrt()
}

pub fn beta_from_rho(dims: [usize; 3], rho_t: f64) -> f64 {
    let [n1, n2, n3] = dims.map(|d| d as f64);
    (rho_t * (n1 * n2 * n3).sqrt() / (n1 + n2 + n3)).sqrt()
}

/// `ϱ = (β_T² n_T/√(n1n2n3)) (n1 n2 / n_M + β_M²)`, keeping the `β_M²` term.
pub fn varrho_from_beta(dims: [usize; 3], beta_m: f64, beta_t: f64) -> f64 {
    let [n1, n2, _] = dims.map(|d| d as f64);
    rho_from_beta(dims, beta_t) * (n1 * n2 / (n1 + n2) + beta_m * beta_m)
}

pub fn beta_from_varrho(dims: [usize; 3], beta_m: f64, varrho: f64) -> f64 {
    let [n1, n2, _] = dims.map(|d| d as f64);
    beta_from_rho(dims, varrho / (n1 * n2 / (n1 + n2) + beta_m * beta_m))
}

/// Tensor signal strength, given in whichever parametrization is natural.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Snr {
    BetaT(f64),
    RhoT(f64),
    Varrho(f64),
}

/// Parameters of the general model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralParams {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    pub beta_m: f64,
    pub snr: Snr,
    #[serde(default)]
    pub seed: u64,
}

impl GeneralParams {
    pub fn new(dims: [usize; 3], beta_m: f64, snr: Snr, seed: u64) -> Result<Self> {
        let p = GeneralParams {
            n1: dims[0],
            n2: dims[1],
            n3: dims[2],
            beta_m,
            snr,
            seed,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims().contains(&0) {
            return Err(Error::arg(format!("dimensions must be positive, got {:?}", self.dims())));
        }
        if !(self.beta_m >= 0.0 && self.beta_m.is_finite()) {
            return Err(Error::arg(format!("beta_M must be finite and >= 0, got {}", self.beta_m)));
        }
        let v = match self.snr {
            Snr::BetaT(v) | Snr::RhoT(v) | Snr::Varrho(v) => v,
        };
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::arg(format!("SNR must be finite and >= 0, got {v}")));
        }
        Ok(())
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.n1, self.n2, self.n3]
    }

    pub fn n_m(&self) -> usize {
        self.n1 + self.n2
    }

    pub fn n_t(&self) -> usize {
        self.n1 + self.n2 + self.n3
    }

    pub fn ratios(&self) -> ShapeRatios {
        ShapeRatios::from_dims(self.dims())
    }

    pub fn beta_t(&self) -> f64 {
        match self.snr {
            Snr::BetaT(b) => b,
            Snr::RhoT(r) => beta_from_rho(self.dims(), r),
            Snr::Varrho(v) => beta_from_varrho(self.dims(), self.beta_m, v),
        }
    }

    pub fn rho_t(&self) -> f64 {
        match self.snr {
            Snr::RhoT(r) => r,
            _ => rho_from_beta(self.dims(), self.beta_t()),
        }
    }

    pub fn varrho(&self) -> f64 {
        match self.snr {
            Snr::Varrho(v) => v,
            _ => varrho_from_beta(self.dims(), self.beta_m, self.beta_t()),
        }
    }

    /// Noise level of the weighted-mean matrix, `ς² = β_T² + n_M/n_T`.
    pub fn varsigma2(&self) -> f64 {
        let b = self.beta_t();
        b * b + self.n_m() as f64 / self.n_t() as f64
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        GeneralParams { seed, ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedSignals {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

impl PlantedSignals {
    /// Validates unit norms and lengths against `dims`.
    pub fn new(x: Vec<f64>, y: Vec<f64>, z: Vec<f64>, dims: [usize; 3]) -> Result<Self> {
        for (v, d, name) in [(&x, dims[0], "x"), (&y, dims[1], "y"), (&z, dims[2], "z")] {
            if v.len() != d {
                return Err(Error::arg(format!("{name} has length {}, expected {d}", v.len())));
            }
            let n = crate::tensor::norm(v);
            if (n - 1.0).abs() > 1e-12 {
                return Err(Error::arg(format!("{name} must have unit norm, got {n}")));
            }
        }
        Ok(PlantedSignals { x, y, z })
    }
}

/// Test hooks for the samplers.
#[derive(Debug, Clone)]
pub struct SampleOptions {
    /// Multiplies both noise blocks; 0 gives the noise-free model.
    pub noise_scale: f64,
    /// Fixed signals instead of uniform-on-sphere draws.
    pub signals: Option<PlantedSignals>,
}

impl Default for SampleOptions {
    fn default() -> Self {
        SampleOptions {
            noise_scale: 1.0,
            signals: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeneralSample {
    pub tensor: Tensor3,
    pub matrix: Mat,
    pub signals: PlantedSignals,
}

pub fn sample_general(p: &GeneralParams) -> Result<GeneralSample> {
    sample_general_with(p, &SampleOptions::default())
}

/// Draws `T = β_T M ⊗ z + W/√n_T` with `M = β_M x yᵀ + Z/√n_M`.
pub fn sample_general_with(p: &GeneralParams, opts: &SampleOptions) -> Result<GeneralSample> {
    p.validate()?;
    let [n1, n2, n3] = p.dims();
    let signals = match &opts.signals {
        Some(s) => PlantedSignals::new(s.x.clone(), s.y.clone(), s.z.clone(), p.dims())?,
        None => {
            let mut rng = stream_rng(p.seed, STREAM_SIGNALS);
            let x = unit_sphere(&mut rng, n1);
            let y = unit_sphere(&mut rng, n2);
            let z = unit_sphere(&mut rng, n3);
            PlantedSignals { x, y, z }
        }
    };

    let noise = opts.noise_scale;
    let mut m = vec![0.0; n1 * n2];
    fill_normal(&mut stream_rng(p.seed, STREAM_MATRIX_NOISE), &mut m);
    let zscale = noise / (p.n_m() as f64).sqrt();
    for (i, row) in m.chunks_exact_mut(n2).enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = p.beta_m * signals.x[i] * signals.y[j] + zscale * *v;
        }
    }

    let beta_t = p.beta_t();
    let wscale = noise / (p.n_t() as f64).sqrt();
    let z = &signals.z;
    let mut data = vec![0.0; n1 * n2 * n3];
    data.par_chunks_mut(n2 * n3).enumerate().for_each(|(i, slice)| {
        let mut rng = stream_rng(p.seed, STREAM_TENSOR_NOISE + i as u64);
        fill_normal(&mut rng, slice);
        for (j, fibre) in slice.chunks_exact_mut(n3).enumerate() {
            let mij = beta_t * m[i * n2 + j];
            for (v, &zk) in fibre.iter_mut().zip(z) {
                *v = mij * zk + wscale * *v;
            }
        }
    });

    Ok(GeneralSample {
        tensor: Tensor3::from_raw(p.dims(), data),
        matrix: Mat::from_raw(n1, n2, m),
        signals,
    })
}

/// Parameters of the two-class multi-view model
/// `X = (μ ȳᵀ + Z) ⊗ h + W`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiViewParams {
    pub p: usize,
    pub n: usize,
    pub m: usize,
    pub mu: Vec<f64>,
    pub h: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl MultiViewParams {
    pub fn new(p: usize, n: usize, m: usize, mu: Vec<f64>, h: Vec<f64>, seed: u64) -> Result<Self> {
        let out = MultiViewParams { p, n, m, mu, h, seed };
        out.validate()?;
        Ok(out)
    }

    /// `μ` and `h` spread evenly over their coordinates with the given norms.
    pub fn with_norms(p: usize, n: usize, m: usize, mu_norm: f64, h_norm: f64, seed: u64) -> Result<Self> {
        if p == 0 || m == 0 {
            return Err(Error::arg("p and m must be positive"));
        }
        let mu = vec![mu_norm / (p as f64).sqrt(); p];
        let h = vec![h_norm / (m as f64).sqrt(); m];
        Self::new(p, n, m, mu, h, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.n == 0 || self.m == 0 {
            return Err(Error::arg(format!(
                "dimensions must be positive, got ({}, {}, {})",
                self.p, self.n, self.m
            )));
        }
        if self.mu.len() != self.p || self.h.len() != self.m {
            return Err(Error::arg("mu must have length p and h length m"));
        }
        if self.mu.iter().chain(&self.h).any(|v| !v.is_finite()) {
            return Err(Error::arg("mu and h must be finite"));
        }
        Ok(())
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.p, self.n, self.m]
    }

    pub fn mu_norm(&self) -> f64 {
        crate::tensor::norm(&self.mu)
    }

    pub fn h_norm(&self) -> f64 {
        crate::tensor::norm(&self.h)
    }

    /// `(c_p, c_n, c_m) = (p, n, m)/(p + n + m)`.
    pub fn ratios(&self) -> ShapeRatios {
        ShapeRatios::from_dims(self.dims())
    }

    /// `ρ = ‖h‖² (p + n + m)/√(p n m)`.
    pub fn rho(&self) -> f64 {
        rho_from_beta(self.dims(), self.h_norm())
    }

    /// The equivalent general model: `(‖μ‖, ‖h‖)` in the role of `(β_M, β_T)`.
    pub fn as_general(&self) -> GeneralParams {
        GeneralParams {
            n1: self.p,
            n2: self.n,
            n3: self.m,
            beta_m: self.mu_norm(),
            snr: Snr::BetaT(self.h_norm()),
            seed: self.seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        MultiViewParams { seed, ..self.clone() }
    }
}

#[derive(Debug, Clone)]
pub struct MultiViewOptions {
    pub noise_scale: f64,
    /// Size of the `+1` class; `None` means `n/2` (requires even `n`).
    pub n_positive: Option<usize>,
}

impl Default for MultiViewOptions {
    fn default() -> Self {
        MultiViewOptions {
            noise_scale: 1.0,
            n_positive: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MultiViewSample {
    pub tensor: Tensor3,
    /// ±1 class of each individual.
    pub labels: Vec<f64>,
}

impl MultiViewSample {
    /// `ȳ = labels/√n`.
    pub fn ybar(&self) -> Vec<f64> {
        let s = (self.labels.len() as f64).sqrt();
        self.labels.iter().map(|l| l / s).collect()
    }
}

pub fn sample_multiview(p: &MultiViewParams) -> Result<MultiViewSample> {
    sample_multiview_with(p, &MultiViewOptions::default())
}

/// Draws `X = (μ ȳᵀ + Z) ⊗ h + W`, `Z ~ N(0, 1/(p+n))`, `W ~ N(0, 1/(p+n+m))`.
pub fn sample_multiview_with(p: &MultiViewParams, opts: &MultiViewOptions) -> Result<MultiViewSample> {
    p.validate()?;
    let (pd, n, m) = (p.p, p.n, p.m);
    let n_pos = match opts.n_positive {
        Some(k) if k <= n => k,
        Some(k) => return Err(Error::arg(format!("class size {k} exceeds n = {n}"))),
        None if n % 2 == 0 => n / 2,
        None => return Err(Error::arg(format!("balanced classes need even n, got {n}"))),
    };
    let mut labels: Vec<f64> = (0..n).map(|j| if j < n_pos { 1.0 } else { -1.0 }).collect();
    labels.shuffle(&mut stream_rng(p.seed, STREAM_LABELS));
    let ybar_scale = 1.0 / (n as f64).sqrt();

    let mut mat = vec![0.0; pd * n];
    fill_normal(&mut stream_rng(p.seed, STREAM_MATRIX_NOISE), &mut mat);
    let zscale = opts.noise_scale / ((pd + n) as f64).sqrt();
    for (i, row) in mat.chunks_exact_mut(n).enumerate() {
        for (v, l) in row.iter_mut().zip(&labels) {
            *v = p.mu[i] * l * ybar_scale + zscale * *v;
        }
    }

    let wscale = opts.noise_scale / ((pd + n + m) as f64).sqrt();
    let h = &p.h;
    let mut data = vec![0.0; pd * n * m];
    data.par_chunks_mut(n * m).enumerate().for_each(|(i, slice)| {
        let mut rng = stream_rng(p.seed, STREAM_TENSOR_NOISE + i as u64);
        fill_normal(&mut rng, slice);
        for (j, fibre) in slice.chunks_exact_mut(m).enumerate() {
            let a = mat[i * n + j];
            for (v, &hk) in fibre.iter_mut().zip(h) {
                *v = a * hk + wscale * *v;
            }
        }
    });
    Ok(MultiViewSample {
        tensor: Tensor3::from_raw(p.dims(), data),
        labels,
    })
}

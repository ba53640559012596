//! Synthetic sparse GLM data with AR(1)-correlated covariates.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::glm::{sigmoid, Dataset, GlmFamily, DEFAULT_POISSON_CLAMP};
use crate::support::Support;

/// Resampling attempts for θ⋆ when a Poisson rate overflows.
pub const MAX_POISSON_ATTEMPTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub n: usize,
    pub p: usize,
    /// Design correlation: `Cov(x_j, x_k) = rho^{|j−k|}`.
    pub rho: f64,
    pub s_star: usize,
    pub signal_low: f64,
    pub signal_high: f64,
    pub family: GlmFamily,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(n: usize, p: usize, family: GlmFamily, seed: u64) -> Self {
        SimConfig { n, p, rho: 0.0, s_star: 10.min(p), signal_low: 2.0, signal_high: 3.0, family, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 {
            return Err(Error::InvalidArgument("n and p must be positive".into()));
        }
        if self.s_star > self.p {
            return Err(Error::InvalidArgument(format!("s_star = {} exceeds p = {}", self.s_star, self.p)));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::InvalidArgument(format!("rho = {} outside [0, 1)", self.rho)));
        }
        if !(self.signal_low.is_finite() && self.signal_high.is_finite() && 0.0 <= self.signal_low && self.signal_low < self.signal_high) {
            return Err(Error::InvalidArgument("signal range must satisfy 0 ≤ low < high".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Simulated {
    pub data: Dataset,
    pub theta_star: Vec<f64>,
    pub delta_star: Support,
}

/// Rows by the AR(1) recursion `x₁ ~ N(0,1)`, `x_j = ρx_{j−1} + √(1−ρ²)ε_j`.
pub fn ar1_design(n: usize, p: usize, rho: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let scale = libm::sqrt(1.0 - rho * rho);
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        let mut prev: f64 = rng.sample(StandardNormal);
        x[(i, 0)] = prev;
        for j in 1..p {
            let e: f64 = rng.sample(StandardNormal);
            prev = rho * prev + scale * e;
            x[(i, j)] = prev;
        }
    }
    x
}

fn draw_theta(cfg: &SimConfig, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut theta = alloc::vec![0.0; cfg.p];
    for t in theta.iter_mut().take(cfg.s_star) {
        let mag = cfg.signal_low + (cfg.signal_high - cfg.signal_low) * rng.random::<f64>();
        *t = if rng.random::<bool>() { mag } else { -mag };
    }
    theta
}

/// Responses for design `x` under coefficients `theta`; `None` when a
/// Poisson rate overflows.
pub fn draw_responses(x: &DMatrix<f64>, theta: &[f64], family: GlmFamily, rng: &mut ChaCha8Rng) -> Option<Vec<f64>> {
    let eta = x * nalgebra::DVector::from_column_slice(theta);
    eta.iter()
        .map(|&e| match family {
            GlmFamily::Gaussian => Some(e + rng.sample::<f64, _>(StandardNormal)),
            GlmFamily::Logistic => Some(if rng.random::<f64>() < sigmoid(e) { 1.0 } else { 0.0 }),
            GlmFamily::Poisson => {
                if e > DEFAULT_POISSON_CLAMP {
                    return None;
                }
                Poisson::new(libm::exp(e)).ok().map(|d| d.sample(rng))
            }
        })
        .collect()
}

/// Design, responses and truth; `θ⋆` has `s_star` leading nonzeros.
pub fn simulate(cfg: &SimConfig) -> Result<Simulated> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let x = ar1_design(cfg.n, cfg.p, cfg.rho, &mut rng);
    for _ in 0..MAX_POISSON_ATTEMPTS {
        let theta = draw_theta(cfg, &mut rng);
        if let Some(y) = draw_responses(&x, &theta, cfg.family, &mut rng) {
            let delta_star = Support::from_bools(&theta.iter().map(|&t| t != 0.0).collect::<Vec<_>>());
            let data = Dataset::new(x, y, cfg.family)?;
            return Ok(Simulated { data, theta_star: theta, delta_star });
        }
    }
    Err(Error::InvalidData(format!("Poisson rates overflowed in {MAX_POISSON_ATTEMPTS} draws of θ⋆")))
}

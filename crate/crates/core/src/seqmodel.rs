//! Discretized Gaussian sequence model.
//!
//! Functions on `[-1/2, 1/2]` live on a uniform grid of `d` midpoints with
//! spacing `1/d`. A function value `f(t_i)` is stored as `sqrt(1/d) * f(t_i)`
//! so that the coordinate Euclidean norm tracks the L2 norm.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{input, Result};

/// Uniform midpoint grid on `[-1/2, 1/2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub d: usize,
    pub delta: f64,
    pub t: Vec<f64>,
    /// Index of the grid point nearest 0 (ties go to the lower index).
    pub i0: usize,
}

impl Grid {
    pub fn new(d: usize) -> Result<Grid> {
        if d == 0 {
            return input("grid needs d >= 1");
        }
        let delta = 1.0 / d as f64;
        let t = (0..d).map(|i| -0.5 + (i as f64 + 0.5) * delta).collect();
        let i0 = if d % 2 == 1 { (d - 1) / 2 } else { d / 2 - 1 };
        Ok(Grid { d, delta, t, i0 })
    }

    /// Storage scale `sqrt(delta)` mapping function values to coordinates.
    pub fn scale(&self) -> f64 {
        self.delta.sqrt()
    }

    /// Embeds a function sampled on the grid.
    pub fn embed(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        let s = self.scale();
        self.t.iter().map(|&t| s * f(t)).collect()
    }

    /// Inverse of [`Grid::embed`].
    pub fn function_values(&self, x: &[f64]) -> Vec<f64> {
        let s = self.scale();
        x.iter().map(|v| v / s).collect()
    }
}

/// `Y_i = x_i + sigma * z_i` with `sigma = 1/sqrt(n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SequenceModel {
    pub d: usize,
    pub n: f64,
    pub sigma: f64,
}

impl SequenceModel {
    pub fn new(d: usize, n: f64) -> Result<SequenceModel> {
        if d == 0 {
            return input("model dimension must be positive");
        }
        if !(n > 0.0) || !n.is_finite() {
            return input(format!("sample size must be positive and finite, got {n}"));
        }
        Ok(SequenceModel { d, n, sigma: 1.0 / n.sqrt() })
    }

    /// Noise-free model (`n = inf`, `sigma = 0`), used for smoke tests.
    pub fn noiseless(d: usize) -> Result<SequenceModel> {
        if d == 0 {
            return input("model dimension must be positive");
        }
        Ok(SequenceModel { d, n: f64::INFINITY, sigma: 0.0 })
    }
}

/// `Tf = <w, f>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFunctional {
    pub w: Vec<f64>,
}

impl LinearFunctional {
    pub fn new(w: Vec<f64>) -> Result<LinearFunctional> {
        if w.is_empty() {
            return input("functional needs at least one coordinate");
        }
        let norm = dot(&w, &w).sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return input("functional representer must have finite positive norm");
        }
        Ok(LinearFunctional { w })
    }

    /// Point evaluation at `t = 0` on the grid embedding.
    pub fn point_evaluation(grid: &Grid) -> LinearFunctional {
        let mut w = vec![0.0; grid.d];
        w[grid.i0] = 1.0 / grid.scale();
        LinearFunctional { w }
    }

    /// `Tf = sum_i f_i`.
    pub fn sum(d: usize) -> Result<LinearFunctional> {
        LinearFunctional::new(vec![1.0; d])
    }

    pub fn coordinate(d: usize, i: usize) -> Result<LinearFunctional> {
        if i >= d {
            return input(format!("coordinate {i} out of range for d = {d}"));
        }
        let mut w = vec![0.0; d];
        w[i] = 1.0;
        Ok(LinearFunctional { w })
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn norm(&self) -> f64 {
        dot(&self.w, &self.w).sqrt()
    }

    pub fn evaluate(&self, f: &[f64]) -> Result<f64> {
        if f.len() != self.w.len() {
            return input(format!("dimension mismatch: functional {} vs vector {}", self.w.len(), f.len()));
        }
        Ok(dot(&self.w, f))
    }
}

/// Free-function form of [`LinearFunctional::evaluate`].
pub fn evaluate(functional: &LinearFunctional, f: &[f64]) -> Result<f64> {
    functional.evaluate(f)
}

/// Upper-tail standard normal quantile `Phi^{-1}(1 - p)`.
pub fn upper_quantile(p: f64) -> f64 {
    std_normal().inverse_cdf(1.0 - p)
}

pub fn std_normal() -> Normal {
    Normal::standard()
}

pub fn phi_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

/// Upper tail `P(Z > x)`, accurate far into the tail.
pub fn phi_sf(x: f64) -> f64 {
    std_normal().sf(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceLevel {
    pub alpha: f64,
    pub z_alpha: f64,
    pub z_alpha_half: f64,
}

impl ConfidenceLevel {
    pub fn new(alpha: f64) -> Result<ConfidenceLevel> {
        if !(alpha > 0.0 && alpha < 0.5) {
            return input(format!("alpha must lie in (0, 1/2), got {alpha}"));
        }
        Ok(ConfidenceLevel {
            alpha,
            z_alpha: upper_quantile(alpha),
            z_alpha_half: upper_quantile(alpha / 2.0),
        })
    }

    /// Level `alpha / k` used by Bonferroni-style constructions.
    pub fn split(&self, k: usize) -> ConfidenceLevel {
        let alpha = self.alpha / k.max(1) as f64;
        ConfidenceLevel { alpha, z_alpha: upper_quantile(alpha), z_alpha_half: upper_quantile(alpha / 2.0) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub y: Vec<f64>,
    pub seed: u64,
}

/// Draws `y = f + sigma * z` from a generator keyed only by `seed`.
pub fn sample(model: &SequenceModel, f: &[f64], seed: u64) -> Result<Observation> {
    if f.len() != model.d {
        return input(format!("dimension mismatch: model {} vs vector {}", model.d, f.len()));
    }
    let mut y = f.to_vec();
    if model.sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in y.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v += model.sigma * z;
        }
    }
    Ok(Observation { y, seed })
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Seed of replicate `index` under `master` (splitmix64 finalizer).
pub fn derive_replicate_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(GOLDEN_GAMMA.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}


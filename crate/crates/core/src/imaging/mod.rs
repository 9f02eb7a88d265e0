//! Total-variation deblurring models, degradation, and image I/O.
//!
//! Images are stored column-major: pixel `(r, c)` lives at `c·rows + r`.

mod io;

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

pub use io::{read_dpdf, read_pgm, write_dpdf, write_pgm};

use crate::error::{check_len, DpdError, Result};
use crate::linops::{ConvolutionOperator, DifferenceOperator, Kernel2D, LinearOperator, StackedOperator};
use crate::model::{BoxLinearDual, QuadraticFidelity, SaddleProblem, SmoothedTvDual, StackedDual, ZeroFunction};
use crate::seeded_rng;

#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ImageGrid {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(DpdError::InvalidInput(format!("empty image {rows}x{cols}")));
        }
        check_len("image data", rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for c in 0..cols {
            for r in 0..rows {
                data.push(f(r, c));
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[c * self.rows + r]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        Self::new(self.rows, self.cols, data)
    }
}

/// Piecewise-constant test image on `[0, 1]`: a background, a large
/// ellipse, a bright rectangle, a dark disk and a thin bar.
pub fn make_phantom(rows: usize, cols: usize) -> Result<ImageGrid> {
    ImageGrid::from_fn(rows, cols, |r, c| {
        let y = (r as f64 + 0.5) / rows as f64;
        let x = (c as f64 + 0.5) / cols as f64;
        let mut v = 0.1;
        if ((x - 0.5) / 0.4).powi(2) + ((y - 0.5) / 0.3).powi(2) <= 1.0 {
            v = 0.5;
        }
        if (0.25..0.5).contains(&x) && (0.35..0.6).contains(&y) {
            v = 0.9;
        }
        if (x - 0.68).powi(2) + (y - 0.45).powi(2) <= 0.1f64.powi(2) {
            v = 0.25;
        }
        if (0.2..0.8).contains(&x) && (0.72..0.77).contains(&y) {
            v = 0.75;
        }
        v
    })
}

/// Periodic blur `K ∗ img`.
pub fn blur(img: &ImageGrid, kernel: &Kernel2D) -> Result<ImageGrid> {
    let k = ConvolutionOperator::new(kernel.clone(), img.rows, img.cols)?;
    img.with_data(k.apply(&img.data)?)
}

/// Adds i.i.d. `N(0, σ²)` noise drawn in storage order from
/// [`seeded_rng`]`(seed)`. No clipping.
pub fn add_gaussian_noise(img: &ImageGrid, sigma: f64, seed: u64) -> Result<ImageGrid> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(DpdError::Config(format!("sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let mut rng = seeded_rng(seed);
    let data = img
        .data
        .iter()
        .map(|v| v + sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();
    img.with_data(data)
}

/// Sets exactly `round(fraction·len)` distinct pixels, chosen by a seeded
/// partial shuffle, to 0 or 1 with equal probability.
pub fn add_salt_pepper(img: &ImageGrid, fraction: f64, seed: u64) -> Result<ImageGrid> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(DpdError::Config(format!("fraction must lie in [0, 1], got {fraction}")));
    }
    let n = img.len();
    let count = (fraction * n as f64).round() as usize;
    let mut rng = seeded_rng(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    let (chosen, _) = idx.partial_shuffle(&mut rng, count);
    let mut data = img.data.clone();
    for &i in chosen.iter() {
        data[i] = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
    }
    img.with_data(data)
}

/// `μ_g0 · 2^(−⌊(t−1)/h⌋)`, constant when `h = 0`.
pub fn continuation_mu_g(t: usize, mu_g0: f64, halve_every: usize) -> f64 {
    if halve_every == 0 || t == 0 {
        return mu_g0;
    }
    let halvings = (t - 1) / halve_every;
    mu_g0 * 0.5f64.powi(halvings.min(i32::MAX as usize) as i32)
}

/// `min_x (μ/2)‖Kx − b‖² + TV_{μ_g}(x)`.
#[derive(Debug, Clone)]
pub struct GaussianDeblurSpec {
    pub observed: ImageGrid,
    pub kernel: Kernel2D,
    pub mu: f64,
    pub mu_g: f64,
}

/// `f(x) = (μ/2)‖Kx − b‖²` with `L_f = μ‖K‖²` from the circulant spectrum,
/// `A = D`, `g` the smoothed TV dual.
pub fn build_gaussian_problem(spec: &GaussianDeblurSpec) -> Result<SaddleProblem> {
    if !(spec.mu > 0.0 && spec.mu.is_finite()) {
        return Err(DpdError::Config(format!("mu must be positive, got {}", spec.mu)));
    }
    if !(spec.mu_g >= 0.0) {
        return Err(DpdError::Config(format!("mu_g must be >= 0, got {}", spec.mu_g)));
    }
    let (rows, cols) = (spec.observed.rows, spec.observed.cols);
    let k = Arc::new(ConvolutionOperator::new(spec.kernel.clone(), rows, cols)?);
    let lipschitz = spec.mu * k.spectral_norm().powi(2);
    let f = QuadraticFidelity::new(k, spec.observed.data.clone(), spec.mu)?.with_constants(lipschitz, 0.0);
    let d = Arc::new(DifferenceOperator::new(rows, cols)?);
    let g = SmoothedTvDual::new(2 * rows * cols, spec.mu_g);
    SaddleProblem::new(Box::new(f), Box::new(g), d)
}

/// `min_x α‖Kx − b‖₁ + TV_{μ_g}(x)`.
#[derive(Debug, Clone)]
pub struct SaltPepperDeblurSpec {
    pub observed: ImageGrid,
    pub kernel: Kernel2D,
    pub alpha: f64,
    pub mu_g0: f64,
    /// Halve `μ_g` every this many iterations; 0 keeps it fixed.
    pub halve_every: usize,
}

/// `f ≡ 0`, `A = [D; αK]`, dual `y = (v, u)` with `v` in unit disks and `u`
/// in the unit box, `g(v, u) = ⟨αb, u⟩ + (μ_g/2)‖(v, u)‖²` on that set.
pub fn build_saltpepper_problem(spec: &SaltPepperDeblurSpec) -> Result<SaddleProblem> {
    if !(spec.alpha > 0.0 && spec.alpha.is_finite()) {
        return Err(DpdError::Config(format!("alpha must be positive, got {}", spec.alpha)));
    }
    if !(spec.mu_g0 >= 0.0) {
        return Err(DpdError::Config(format!("mu_g0 must be >= 0, got {}", spec.mu_g0)));
    }
    let (rows, cols) = (spec.observed.rows, spec.observed.cols);
    let n = rows * cols;
    let k = ConvolutionOperator::new(spec.kernel.clone(), rows, cols)?;
    let k_norm = k.spectral_norm();
    let d: Arc<dyn LinearOperator> = Arc::new(DifferenceOperator::new(rows, cols)?);
    let a = StackedOperator::new(vec![(1.0, d), (spec.alpha, Arc::new(k))])?;
    let norm_a = (8.0 + (spec.alpha * k_norm).powi(2)).sqrt() * (1.0 + 1e-12);
    let c: Vec<f64> = spec.observed.data.iter().map(|b| spec.alpha * b).collect();
    let g = StackedDual::new(vec![
        Box::new(SmoothedTvDual::new(2 * n, spec.mu_g0)),
        Box::new(BoxLinearDual::new(c, spec.mu_g0)),
    ]);
    Ok(SaddleProblem::new(Box::new(ZeroFunction::new(n)), Box::new(g), Arc::new(a))?.with_norm_a(norm_a))
}

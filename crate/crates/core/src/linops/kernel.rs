use crate::error::{DpdError, Result};

/// Small 2-D filter with odd dimensions, centred on its middle entry.
/// Weights are stored column-major like images.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel2D {
    height: usize,
    width: usize,
    weights: Vec<f64>,
}

impl Kernel2D {
    pub fn new(height: usize, width: usize, weights: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || height.is_multiple_of(2) || width.is_multiple_of(2) {
            return Err(DpdError::Config(format!(
                "kernel dimensions must be odd and positive, got {height}x{width}"
            )));
        }
        if weights.len() != height * width {
            return Err(DpdError::DimensionMismatch {
                context: "kernel weights",
                expected: height * width,
                actual: weights.len(),
            });
        }
        Ok(Self { height, width, weights })
    }

    pub fn identity() -> Self {
        Self {
            height: 1,
            width: 1,
            weights: vec![1.0],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.weights[row + col * self.height]
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn abs_sum(&self) -> f64 {
        self.weights.iter().map(|w| w.abs()).sum()
    }

    /// Point reflection `w'[p, q] = w[h−1−p, w−1−q]`.
    pub fn reflected(&self) -> Self {
        let mut weights = self.weights.clone();
        weights.reverse();
        Self {
            height: self.height,
            width: self.width,
            weights,
        }
    }
}

/// `size × size` box filter with all weights `1/size²`.
pub fn make_average_kernel(size: usize) -> Result<Kernel2D> {
    if size == 0 || size.is_multiple_of(2) {
        return Err(DpdError::Config(format!(
            "average kernel size must be odd and positive, got {size}"
        )));
    }
    let w = 1.0 / (size * size) as f64;
    Kernel2D::new(size, size, vec![w; size * size])
}

/// Linear motion blur of `length` pixels at `theta_degrees` counter-clockwise
/// from the horizontal axis.
///
/// Each pixel receives weight `max(0, 1 − d)` where `d` is the distance from the
/// pixel centre to the centred segment; the result is cropped to the smallest
/// centred box with non-zero weights and normalized to unit sum.
pub fn make_motion_kernel(length: usize, theta_degrees: f64) -> Result<Kernel2D> {
    if length == 0 {
        return Err(DpdError::Config("motion kernel length must be >= 1".into()));
    }
    let half = (length as f64 - 1.0) / 2.0;
    let theta = theta_degrees.to_radians();
    let snap = |v: f64| if v.abs() < 1e-12 { 0.0 } else { v };
    // Columns grow to the right, rows grow downwards.
    let dc = snap(theta.cos());
    let dr = snap(-theta.sin());

    let radius = half.ceil() as i64 + 1;
    let side = (2 * radius + 1) as usize;
    let mut full = vec![0.0; side * side];
    for c in -radius..=radius {
        for r in -radius..=radius {
            let (pc, pr) = (c as f64, r as f64);
            let along = (pc * dc + pr * dr).clamp(-half, half);
            let d = ((pc - along * dc).powi(2) + (pr - along * dr).powi(2)).sqrt();
            let w = (1.0 - d).max(0.0);
            full[(r + radius) as usize + (c + radius) as usize * side] = w;
        }
    }

    let mut ry = 0i64;
    let mut rx = 0i64;
    for c in -radius..=radius {
        for r in -radius..=radius {
            if full[(r + radius) as usize + (c + radius) as usize * side] > 0.0 {
                ry = ry.max(r.abs());
                rx = rx.max(c.abs());
            }
        }
    }
    let (h, w) = ((2 * ry + 1) as usize, (2 * rx + 1) as usize);
    let mut weights = Vec::with_capacity(h * w);
    for c in -rx..=rx {
        for r in -ry..=ry {
            weights.push(full[(r + radius) as usize + (c + radius) as usize * side]);
        }
    }
    let total: f64 = weights.iter().sum();
    for v in &mut weights {
        *v /= total;
    }
    Kernel2D::new(h, w, weights)
}

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// 2-D FFT over a column-major `rows × cols` grid.
#[derive(Clone)]
pub(crate) struct Fft2 {
    rows: usize,
    cols: usize,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .finish()
    }
}

impl Fft2 {
    pub(crate) fn new(rows: usize, cols: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            rows,
            cols,
            col_fwd: planner.plan_fft_forward(rows),
            col_inv: planner.plan_fft_inverse(rows),
            row_fwd: planner.plan_fft_forward(cols),
            row_inv: planner.plan_fft_inverse(cols),
        }
    }

    pub(crate) fn forward_real(&self, x: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut buf, false);
        buf
    }

    /// Inverse transform, normalized, keeping the real part.
    pub(crate) fn inverse_real(&self, mut buf: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut buf, true);
        let scale = 1.0 / (self.rows * self.cols) as f64;
        buf.iter().map(|c| c.re * scale).collect()
    }

    fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        let (m, n) = (self.rows, self.cols);
        let (col, row) = if inverse {
            (&self.col_inv, &self.row_inv)
        } else {
            (&self.col_fwd, &self.row_fwd)
        };
        buf.par_chunks_mut(m).for_each(|c| col.process(c));

        let mut t = vec![Complex64::new(0.0, 0.0); m * n];
        for j in 0..n {
            for i in 0..m {
                t[j + i * n] = buf[i + j * m];
            }
        }
        t.par_chunks_mut(n).for_each(|r| row.process(r));
        for j in 0..n {
            for i in 0..m {
                buf[i + j * m] = t[j + i * n];
            }
        }
    }
}

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use crate::error::{check_len, DpdError, Result};
use crate::vector;

use super::fft::Fft2;
use super::{Kernel2D, LinearOperator, NormalSolve};

/// Kernels with more taps than this are applied through the FFT.
const DIRECT_MAX_TAPS: usize = 49;

/// Periodic 2-D convolution `K x = k ⊛ x` on a column-major `rows × cols` grid.
///
/// `(Kx)[i, j] = Σ_{p,q} w[p, q] · x[i − (p − cy), j − (q − cx)]` with indices
/// taken modulo the grid and `(cy, cx)` the kernel centre. The adjoint is
/// convolution with the point-reflected kernel.
#[derive(Debug, Clone)]
pub struct ConvolutionOperator {
    kernel: Kernel2D,
    rows: usize,
    cols: usize,
    fft: Fft2,
    spectrum: Vec<Complex64>,
}

impl ConvolutionOperator {
    pub fn new(kernel: Kernel2D, rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(DpdError::Config("convolution grid must be non-empty".into()));
        }
        if kernel.height() > rows || kernel.width() > cols {
            return Err(DpdError::Config(format!(
                "kernel {}x{} does not fit a {rows}x{cols} grid",
                kernel.height(),
                kernel.width()
            )));
        }
        let fft = Fft2::new(rows, cols);
        let mut embedded = vec![0.0; rows * cols];
        let (cy, cx) = (kernel.height() / 2, kernel.width() / 2);
        for q in 0..kernel.width() {
            for p in 0..kernel.height() {
                let i = (p + rows - cy) % rows;
                let j = (q + cols - cx) % cols;
                embedded[i + j * rows] += kernel.at(p, q);
            }
        }
        let spectrum = fft.forward_real(&embedded);
        Ok(Self {
            kernel,
            rows,
            cols,
            fft,
            spectrum,
        })
    }

    pub fn kernel(&self) -> &Kernel2D {
        &self.kernel
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Exact spectral norm: the largest modulus of the circulant eigenvalues.
    pub fn spectral_norm(&self) -> f64 {
        self.spectrum.iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    fn direct(&self, x: &[f64], out: &mut [f64], sign: isize) {
        let (m, n) = (self.rows as isize, self.cols as isize);
        let k = &self.kernel;
        let (cy, cx) = ((k.height() / 2) as isize, (k.width() / 2) as isize);
        out.par_chunks_mut(self.rows).enumerate().for_each(|(j, col)| {
            let j = j as isize;
            for (i, o) in col.iter_mut().enumerate() {
                let i = i as isize;
                let mut acc = 0.0;
                for q in 0..k.width() {
                    let jj = (j - sign * (q as isize - cx)).rem_euclid(n);
                    for p in 0..k.height() {
                        let ii = (i - sign * (p as isize - cy)).rem_euclid(m);
                        acc += k.at(p, q) * x[(ii + jj * m) as usize];
                    }
                }
                *o = acc;
            }
        });
    }

    fn spectral(&self, x: &[f64], out: &mut [f64], conjugate: bool) {
        let mut xf = self.fft.forward_real(x);
        for (v, s) in xf.iter_mut().zip(&self.spectrum) {
            *v *= if conjugate { s.conj() } else { *s };
        }
        out.copy_from_slice(&self.fft.inverse_real(xf));
    }

    fn use_direct(&self) -> bool {
        self.kernel.weights().len() <= DIRECT_MAX_TAPS
    }
}

/// Same as [`ConvolutionOperator::new`].
pub fn make_convolution_operator(kernel: Kernel2D, rows: usize, cols: usize) -> Result<ConvolutionOperator> {
    ConvolutionOperator::new(kernel, rows, cols)
}

impl LinearOperator for ConvolutionOperator {
    fn input_dim(&self) -> usize {
        self.rows * self.cols
    }

    fn output_dim(&self) -> usize {
        self.rows * self.cols
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        if self.use_direct() {
            self.direct(x, out, 1)
        } else {
            self.spectral(x, out, false)
        }
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        if self.use_direct() {
            self.direct(y, out, -1)
        } else {
            self.spectral(y, out, true)
        }
    }

    fn norm_bound(&self) -> f64 {
        self.kernel.abs_sum()
    }
}

impl NormalSolve for ConvolutionOperator {
    fn solve_shifted_normal(&self, s: f64, rhs: &[f64]) -> Result<Vec<f64>> {
        check_len("convolution normal solve", self.input_dim(), rhs.len())?;
        let mut rf = self.fft.forward_real(rhs);
        for (v, k) in rf.iter_mut().zip(&self.spectrum) {
            *v /= s * k.norm_sqr() + 1.0;
        }
        let x = self.fft.inverse_real(rf);
        if !vector::all_finite(&x) {
            return Err(DpdError::Numerical("non-finite transform-domain solve".into()));
        }
        Ok(x)
    }
}

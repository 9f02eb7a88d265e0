//! Linear coupling operators: finite differences, circular convolution,
//! dense matrices and scaled vertical stacks, plus spectral-norm estimation.
//!
//! Images are flattened column-major (`data[row + col * rows]`) everywhere.

mod convolution;
mod difference;
mod fft;
mod kernel;

use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, DpdError, Result};
use crate::vector;

pub use convolution::{make_convolution_operator, ConvolutionOperator};
pub use difference::{make_difference_operator, DifferenceOperator};
pub use kernel::{make_average_kernel, make_motion_kernel, Kernel2D};

/// A real linear map `A: R^input_dim -> R^output_dim` together with its
/// transpose and a certified upper bound on the spectral norm.
pub trait LinearOperator: Send + Sync + Debug {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;

    /// `out = A x`. Slices must have the operator's dimensions.
    fn apply_into(&self, x: &[f64], out: &mut [f64]);

    /// `out = Aᵀ y`.
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]);

    /// Upper bound on `‖A‖₂`.
    fn norm_bound(&self) -> f64;

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("operator apply", self.input_dim(), x.len())?;
        let mut out = vec![0.0; self.output_dim()];
        self.apply_into(x, &mut out);
        Ok(out)
    }

    fn adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len("operator adjoint", self.output_dim(), y.len())?;
        let mut out = vec![0.0; self.input_dim()];
        self.adjoint_into(y, &mut out);
        Ok(out)
    }
}

/// Operators that can solve the shifted normal system `(s·AᵀA + I) x = r`
/// exactly. Needed by the exact proximal map of `(μ/2)‖Ax − b‖²`.
pub trait NormalSolve: LinearOperator {
    fn solve_shifted_normal(&self, s: f64, rhs: &[f64]) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone)]
pub struct IdentityOperator {
    dim: usize,
}

impl IdentityOperator {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl LinearOperator for IdentityOperator {
    fn input_dim(&self) -> usize {
        self.dim
    }
    fn output_dim(&self) -> usize {
        self.dim
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x);
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        out.copy_from_slice(y);
    }
    fn norm_bound(&self) -> f64 {
        1.0
    }
}

impl NormalSolve for IdentityOperator {
    fn solve_shifted_normal(&self, s: f64, rhs: &[f64]) -> Result<Vec<f64>> {
        check_len("identity normal solve", self.dim, rhs.len())?;
        Ok(rhs.iter().map(|r| r / (s + 1.0)).collect())
    }
}

/// `diag(d)`.
#[derive(Debug, Clone)]
pub struct DiagonalOperator {
    diag: Vec<f64>,
}

impl DiagonalOperator {
    pub fn new(diag: Vec<f64>) -> Self {
        Self { diag }
    }
}

impl LinearOperator for DiagonalOperator {
    fn input_dim(&self) -> usize {
        self.diag.len()
    }
    fn output_dim(&self) -> usize {
        self.diag.len()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for ((o, d), xi) in out.iter_mut().zip(&self.diag).zip(x) {
            *o = d * xi;
        }
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        self.apply_into(y, out)
    }
    fn norm_bound(&self) -> f64 {
        self.diag.iter().fold(0.0, |m, d| m.max(d.abs()))
    }
}

/// Dense matrix stored row-major; rows index the output.
#[derive(Debug, Clone)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    norm: f64,
}

impl DenseMatrix {
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_len("dense matrix data", rows * cols, data.len())?;
        let m = DMatrix::from_row_slice(rows, cols, &data);
        let sigma = if rows == 0 || cols == 0 {
            0.0
        } else {
            m.singular_values().max()
        };
        // Relative slack covers SVD round-off so the bound stays an upper bound.
        let norm = sigma * (1.0 + 1e-12) + f64::MIN_POSITIVE;
        Ok(Self { rows, cols, data, norm })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
            norm: 0.0,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row_major(&self) -> &[f64] {
        &self.data
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }
}

impl LinearOperator for DenseMatrix {
    fn input_dim(&self) -> usize {
        self.cols
    }
    fn output_dim(&self) -> usize {
        self.rows
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            *o = vector::dot(&self.data[r * self.cols..(r + 1) * self.cols], x);
        }
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (r, yr) in y.iter().enumerate() {
            vector::axpy(*yr, &self.data[r * self.cols..(r + 1) * self.cols], out);
        }
    }
    fn norm_bound(&self) -> f64 {
        self.norm
    }
}

impl NormalSolve for DenseMatrix {
    fn solve_shifted_normal(&self, s: f64, rhs: &[f64]) -> Result<Vec<f64>> {
        check_len("dense normal solve", self.cols, rhs.len())?;
        let a = self.to_nalgebra();
        let mut lhs = a.transpose() * &a * s;
        for i in 0..self.cols {
            lhs[(i, i)] += 1.0;
        }
        let chol = lhs
            .cholesky()
            .ok_or_else(|| DpdError::Numerical("shifted normal matrix not positive definite".into()))?;
        let sol = chol.solve(&nalgebra::DVector::from_column_slice(rhs));
        Ok(sol.iter().copied().collect())
    }
}

/// Vertical concatenation `[s₁A₁; s₂A₂; …]` of operators sharing an input space.
#[derive(Debug, Clone)]
pub struct StackedOperator {
    parts: Vec<(f64, Arc<dyn LinearOperator>)>,
    input_dim: usize,
    output_dim: usize,
}

impl StackedOperator {
    pub fn new(parts: Vec<(f64, Arc<dyn LinearOperator>)>) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| DpdError::Config("stacked operator needs at least one part".into()))?;
        let input_dim = first.1.input_dim();
        for (_, op) in &parts {
            check_len("stacked operator input", input_dim, op.input_dim())?;
        }
        let output_dim = parts.iter().map(|(_, op)| op.output_dim()).sum();
        Ok(Self {
            parts,
            input_dim,
            output_dim,
        })
    }

    pub fn parts(&self) -> &[(f64, Arc<dyn LinearOperator>)] {
        &self.parts
    }
}

/// Convenience constructor mirroring [`StackedOperator::new`].
pub fn make_stacked_operator(parts: Vec<(f64, Arc<dyn LinearOperator>)>) -> Result<StackedOperator> {
    StackedOperator::new(parts)
}

impl LinearOperator for StackedOperator {
    fn input_dim(&self) -> usize {
        self.input_dim
    }
    fn output_dim(&self) -> usize {
        self.output_dim
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let mut offset = 0;
        for (s, op) in &self.parts {
            let block = &mut out[offset..offset + op.output_dim()];
            op.apply_into(x, block);
            if *s != 1.0 {
                vector::scale(*s, block);
            }
            offset += op.output_dim();
        }
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let mut tmp = vec![0.0; self.input_dim];
        let mut offset = 0;
        for (s, op) in &self.parts {
            op.adjoint_into(&y[offset..offset + op.output_dim()], &mut tmp);
            vector::axpy(*s, &tmp, out);
            offset += op.output_dim();
        }
    }
    fn norm_bound(&self) -> f64 {
        self.parts
            .iter()
            .map(|(s, op)| (s * op.norm_bound()).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Result of [`estimate_operator_norm`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Power iteration on `AᵀA` from a seeded Gaussian start.
///
/// Stops when the relative change of the Rayleigh estimate drops below `tol`.
/// The estimate never exceeds `op.norm_bound()`.
pub fn estimate_operator_norm(op: &dyn LinearOperator, tol: f64, max_iter: usize, seed: u64) -> NormEstimate {
    let n = op.input_dim();
    if n == 0 || op.output_dim() == 0 {
        return NormEstimate {
            value: 0.0,
            iterations: 0,
            converged: true,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.sample(rand_distr::StandardNormal)).collect();
    let nv = vector::norm(&v);
    vector::scale(1.0 / nv, &mut v);

    let mut av = vec![0.0; op.output_dim()];
    let mut w = vec![0.0; n];
    let mut sigma = 0.0;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        iterations += 1;
        op.apply_into(&v, &mut av);
        let next = vector::norm(&av);
        op.adjoint_into(&av, &mut w);
        let nw = vector::norm(&w);
        if nw == 0.0 {
            sigma = 0.0;
            converged = true;
            break;
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / nw;
        }
        let change = (next - sigma).abs();
        sigma = next;
        if change <= tol * sigma {
            converged = true;
            break;
        }
    }
    NormEstimate {
        value: sigma.min(op.norm_bound()),
        iterations,
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_norm_estimate() {
        let op = IdentityOperator::new(5);
        let est = estimate_operator_norm(&op, 1e-12, 100, 1);
        assert!((est.value - 1.0).abs() < 1e-8);
        assert!(est.converged);
    }

    #[test]
    fn diagonal_norm_estimate() {
        let op = DiagonalOperator::new(vec![1.0, 2.0, 3.0]);
        let est = estimate_operator_norm(&op, 1e-14, 10_000, 7);
        assert!((est.value - 3.0).abs() < 1e-6, "{est:?}");
    }

    #[test]
    fn estimate_is_deterministic() {
        let op = DiagonalOperator::new(vec![1.0, 2.0, 2.9, 3.0]);
        let a = estimate_operator_norm(&op, 1e-9, 50, 3);
        let b = estimate_operator_norm(&op, 1e-9, 50, 3);
        assert_eq!(a, b);
    }

    #[test]
    fn unconverged_is_flagged() {
        let op = DiagonalOperator::new(vec![1.0, 2.0, 2.999, 3.0]);
        let est = estimate_operator_norm(&op, 1e-15, 2, 3);
        assert!(!est.converged);
        assert_eq!(est.iterations, 2);
    }

    #[test]
    fn stacked_single_identity() {
        let op = StackedOperator::new(vec![(1.0, Arc::new(IdentityOperator::new(3)) as _)]).unwrap();
        assert_eq!(op.apply(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(op.norm_bound(), 1.0);
    }

    #[test]
    fn stacked_rejects_mismatched_inputs() {
        let parts: Vec<(f64, Arc<dyn LinearOperator>)> = vec![
            (1.0, Arc::new(IdentityOperator::new(3))),
            (1.0, Arc::new(IdentityOperator::new(4))),
        ];
        assert!(matches!(
            StackedOperator::new(parts),
            Err(DpdError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn stacked_difference_and_scaled_identity_on_constant() {
        let parts: Vec<(f64, Arc<dyn LinearOperator>)> = vec![
            (1.0, Arc::new(DifferenceOperator::new(2, 2).unwrap())),
            (4.0, Arc::new(IdentityOperator::new(4))),
        ];
        let op = StackedOperator::new(parts).unwrap();
        let out = op.apply(&[0.5; 4]).unwrap();
        assert_eq!(out, vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0, 2.0, 2.0, 2.0]);
        assert!((op.norm_bound() - (8.0f64 + 16.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn apply_checks_dimensions() {
        let op = IdentityOperator::new(3);
        assert!(op.apply(&[1.0]).is_err());
        assert!(op.adjoint(&[1.0; 4]).is_err());
    }

    #[test]
    fn dense_normal_solve_matches_direct() {
        let a = DenseMatrix::from_row_major(3, 2, vec![1.0, 2.0, 0.0, 1.0, -1.0, 3.0]).unwrap();
        let rhs = [0.3, -0.7];
        let x = a.solve_shifted_normal(0.5, &rhs).unwrap();
        // (0.5 AᵀA + I) x == rhs
        let ax = a.apply(&x).unwrap();
        let atax = a.adjoint(&ax).unwrap();
        for i in 0..2 {
            assert!((0.5 * atax[i] + x[i] - rhs[i]).abs() < 1e-12);
        }
    }
}

use crate::error::{DpdError, Result};

use super::LinearOperator;

/// Periodic forward-difference operator `D: R^{mn} -> R^{2mn}`.
///
/// The first `mn` outputs are vertical differences `x[i+1,j] − x[i,j]`, the
/// last `mn` are horizontal differences `x[i,j+1] − x[i,j]`, both wrapping
/// around the image border.
#[derive(Debug, Clone)]
pub struct DifferenceOperator {
    rows: usize,
    cols: usize,
}

impl DifferenceOperator {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(DpdError::Config(format!(
                "difference operator needs a non-empty grid, got {rows}x{cols}"
            )));
        }
        Ok(Self { rows, cols })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }
}

/// Same as [`DifferenceOperator::new`].
pub fn make_difference_operator(rows: usize, cols: usize) -> Result<DifferenceOperator> {
    DifferenceOperator::new(rows, cols)
}

impl LinearOperator for DifferenceOperator {
    fn input_dim(&self) -> usize {
        self.rows * self.cols
    }

    fn output_dim(&self) -> usize {
        2 * self.rows * self.cols
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let (m, n) = (self.rows, self.cols);
        let mn = m * n;
        let (vert, horiz) = out.split_at_mut(mn);
        for j in 0..n {
            let jn = if j + 1 == n { 0 } else { j + 1 };
            for i in 0..m {
                let inext = if i + 1 == m { 0 } else { i + 1 };
                let here = x[i + j * m];
                vert[i + j * m] = x[inext + j * m] - here;
                horiz[i + j * m] = x[i + jn * m] - here;
            }
        }
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        let (m, n) = (self.rows, self.cols);
        let mn = m * n;
        let (vert, horiz) = y.split_at(mn);
        for j in 0..n {
            let jp = if j == 0 { n - 1 } else { j - 1 };
            for i in 0..m {
                let ip = if i == 0 { m - 1 } else { i - 1 };
                out[i + j * m] = vert[ip + j * m] - vert[i + j * m] + horiz[i + jp * m] - horiz[i + j * m];
            }
        }
    }

    fn norm_bound(&self) -> f64 {
        8f64.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_matches_hand_computation() {
        let d = DifferenceOperator::new(2, 2).unwrap();
        let out = d.apply(&[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert_eq!(out, vec![2.0, -2.0, 2.0, -2.0, 1.0, 1.0, -1.0, -1.0]);
    }

    #[test]
    fn constants_vanish() {
        let d = DifferenceOperator::new(3, 5).unwrap();
        let out = d.apply(&[0.7; 15]).unwrap();
        assert!(out.iter().all(|v| *v == 0.0));
        assert_eq!(out.len(), 30);
    }

    #[test]
    fn empty_grid_rejected() {
        assert!(DifferenceOperator::new(0, 3).is_err());
    }
}

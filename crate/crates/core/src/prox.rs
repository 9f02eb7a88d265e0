//! Closed-form proximal maps and projections used by the dual updates and
//! by the exact primal update.
//!
//! "Pair" vectors have length `2N` and hold `N` planar vectors
//! `(y[i], y[N + i])`, matching the vertical/horizontal layout of the
//! difference operator.

use crate::error::{DpdError, Result};
use crate::linops::NormalSolve;
use crate::vector;

/// Project every pair `(y[i], y[N+i])` onto the closed unit disk.
pub fn project_ball2_pairs_in_place(y: &mut [f64]) {
    assert!(y.len().is_multiple_of(2), "pair vector must have even length");
    let half = y.len() / 2;
    let (a, b) = y.split_at_mut(half);
    for (u, v) in a.iter_mut().zip(b.iter_mut()) {
        let r = (*u * *u + *v * *v).sqrt();
        if r > 1.0 {
            *u /= r;
            *v /= r;
        }
    }
}

pub fn project_ball2_pairs(y: &[f64]) -> Vec<f64> {
    let mut out = y.to_vec();
    project_ball2_pairs_in_place(&mut out);
    out
}

/// Component-wise clamp onto `[lo, hi]`.
pub fn project_box_in_place(u: &mut [f64], lo: f64, hi: f64) {
    debug_assert!(lo <= hi);
    for v in u {
        *v = v.clamp(lo, hi);
    }
}

pub fn project_box(u: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let mut out = u.to_vec();
    project_box_in_place(&mut out, lo, hi);
    out
}

/// Projection onto the Euclidean ball `‖y‖ ≤ radius`.
pub fn project_ball_in_place(y: &mut [f64], radius: f64) {
    let r = vector::norm(y);
    if r > radius {
        vector::scale(radius / r, y);
    }
}

/// Prox of `g(y) = δ{‖y_i‖ ≤ 1 ∀i}(y) + (μ_g/2)‖y‖²` with step `step`.
pub fn prox_smoothed_tv_dual_in_place(z: &mut [f64], step: f64, mu_g: f64) {
    let s = 1.0 / (step * mu_g + 1.0);
    if s != 1.0 {
        vector::scale(s, z);
    }
    project_ball2_pairs_in_place(z);
}

pub fn prox_smoothed_tv_dual(z: &[f64], step: f64, mu_g: f64) -> Vec<f64> {
    let mut out = z.to_vec();
    prox_smoothed_tv_dual_in_place(&mut out, step, mu_g);
    out
}

/// Prox of `g(u) = δ_{[−1,1]}(u) + ⟨c, u⟩ + (μ_g/2)‖u‖²` with step `step`.
pub fn prox_linear_plus_box_in_place(z: &mut [f64], step: f64, c: &[f64], mu_g: f64) {
    debug_assert_eq!(z.len(), c.len());
    let s = 1.0 / (step * mu_g + 1.0);
    for (zi, ci) in z.iter_mut().zip(c) {
        *zi = ((*zi - step * ci) * s).clamp(-1.0, 1.0);
    }
}

pub fn prox_linear_plus_box(z: &[f64], step: f64, c: &[f64], mu_g: f64) -> Vec<f64> {
    let mut out = z.to_vec();
    prox_linear_plus_box_in_place(&mut out, step, c, mu_g);
    out
}

/// Exact prox of `f(x) = (μ/2)‖Kx − b‖²`:
/// solves `(μ·step·KᵀK + I) x = μ·step·Kᵀb + z`.
pub fn prox_quadratic_primal<K: NormalSolve + ?Sized>(
    z: &[f64],
    step: f64,
    op: &K,
    b: &[f64],
    mu: f64,
) -> Result<Vec<f64>> {
    if step <= 0.0 {
        return Err(DpdError::Config(format!("prox step must be positive, got {step}")));
    }
    if mu == 0.0 {
        return Ok(z.to_vec());
    }
    let s = mu * step;
    let mut rhs = op.adjoint(b)?;
    for (r, zi) in rhs.iter_mut().zip(z) {
        *r = s * *r + zi;
    }
    let x = op.solve_shifted_normal(s, &rhs)?;

    let kx = op.apply(&x)?;
    let ktkx = op.adjoint(&kx)?;
    let resid: f64 = ktkx
        .iter()
        .zip(&x)
        .zip(&rhs)
        .map(|((a, xi), r)| (s * a + xi - r).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale = 1.0 + vector::norm(&rhs) + s * vector::norm(&ktkx);
    if resid > 1e-10 * scale {
        return Err(DpdError::Numerical(format!(
            "quadratic prox residual {resid:e} exceeds tolerance"
        )));
    }
    Ok(x)
}

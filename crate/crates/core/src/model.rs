//! Bilinear saddle-point problems `min_x max_y f(x) + ⟨Ax, y⟩ − g(y)` and the
//! oracle contracts the solvers consume.
//!
//! Function values live on the extended real line: `g` returns `+∞` outside
//! its domain and [`lagrangian`] propagates that as `−∞`.

use std::fmt::Debug;
use std::sync::Arc;

use crate::error::{check_len, DpdError, Result};
use crate::linops::{LinearOperator, NormalSolve};
use crate::prox;
use crate::vector;

/// Slack used when testing membership in closed constraint sets.
pub const FEASIBILITY_TOL: f64 = 1e-12;

/// The primal component `f`.
///
/// An oracle provides a gradient, an exact prox, or both. `lipschitz` and
/// `strong_convexity` are caller-supplied constants (`L_f`, `μ_f`).
pub trait PrimalOracle: Send + Sync + Debug {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;

    fn has_gradient(&self) -> bool {
        false
    }

    fn has_prox(&self) -> bool {
        false
    }

    fn gradient_into(&self, _x: &[f64], _out: &mut [f64]) -> Result<()> {
        Err(DpdError::Unsupported("primal oracle has no gradient".into()))
    }

    /// `argmin_x f(x) + ‖x − z‖² / (2·step)`
    fn prox(&self, _z: &[f64], _step: f64) -> Result<Vec<f64>> {
        Err(DpdError::Unsupported("primal oracle has no exact prox".into()))
    }

    fn lipschitz(&self) -> f64;
    fn strong_convexity(&self) -> f64;
}

/// The dual component `g`, accessed through its prox.
pub trait DualOracle: Send + Sync + Debug {
    fn dim(&self) -> usize;

    /// `g(y)`, `+∞` outside the domain.
    fn value(&self, y: &[f64]) -> f64;

    /// In place: `z ← argmin_y ‖y − z‖²/(2·step) + g(y)`.
    fn prox_in_place(&self, z: &mut [f64], step: f64);

    fn strong_convexity(&self) -> f64;

    /// Replace `μ_g`. Used by continuation schedules between iterations.
    fn set_strong_convexity(&mut self, mu_g: f64);

    /// Gradient of `g` at `y` when `y` lies in the interior of the domain,
    /// `None` where `g` is not differentiable.
    fn gradient(&self, _y: &[f64]) -> Option<Vec<f64>> {
        None
    }

    fn prox(&self, z: &[f64], step: f64) -> Vec<f64> {
        let mut out = z.to_vec();
        self.prox_in_place(&mut out, step);
        out
    }
}

/// `f ≡ 0`. Its gradient vanishes and its prox is the identity.
#[derive(Debug, Clone)]
pub struct ZeroFunction {
    dim: usize,
}

impl ZeroFunction {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl PrimalOracle for ZeroFunction {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, _x: &[f64]) -> f64 {
        0.0
    }
    fn has_gradient(&self) -> bool {
        true
    }
    fn has_prox(&self) -> bool {
        true
    }
    fn gradient_into(&self, _x: &[f64], out: &mut [f64]) -> Result<()> {
        out.fill(0.0);
        Ok(())
    }
    fn prox(&self, z: &[f64], _step: f64) -> Result<Vec<f64>> {
        Ok(z.to_vec())
    }
    fn lipschitz(&self) -> f64 {
        0.0
    }
    fn strong_convexity(&self) -> f64 {
        0.0
    }
}

/// `f(x) = (w/2)‖Kx − b‖² + (λ/2)‖x‖²`, exposing both gradient and exact prox.
#[derive(Debug, Clone)]
pub struct QuadraticFidelity<K: NormalSolve> {
    op: Arc<K>,
    b: Vec<f64>,
    weight: f64,
    ridge: f64,
    lipschitz: f64,
    mu: f64,
}

impl<K: NormalSolve> QuadraticFidelity<K> {
    /// Uses `op.norm_bound()` for `L_f = w‖K‖² + λ`.
    pub fn new(op: Arc<K>, b: Vec<f64>, weight: f64) -> Result<Self> {
        check_len("quadratic fidelity data", op.output_dim(), b.len())?;
        if !(weight >= 0.0) {
            return Err(DpdError::Config(format!("fidelity weight must be >= 0, got {weight}")));
        }
        let lipschitz = weight * op.norm_bound().powi(2);
        Ok(Self {
            op,
            b,
            weight,
            ridge: 0.0,
            lipschitz,
            mu: 0.0,
        })
    }

    /// Adds `(λ/2)‖x‖²`, shifting both constants by `λ`.
    pub fn with_ridge(mut self, ridge: f64) -> Self {
        self.lipschitz += ridge - self.ridge;
        self.mu += ridge - self.ridge;
        self.ridge = ridge;
        self
    }

    /// Override `L_f` and `μ_f` with caller-certified values.
    pub fn with_constants(mut self, lipschitz: f64, mu: f64) -> Self {
        self.lipschitz = lipschitz;
        self.mu = mu;
        self
    }

    pub fn operator(&self) -> &Arc<K> {
        &self.op
    }

    pub fn data(&self) -> &[f64] {
        &self.b
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn ridge(&self) -> f64 {
        self.ridge
    }
}

impl<K: NormalSolve + 'static> PrimalOracle for QuadraticFidelity<K> {
    fn dim(&self) -> usize {
        self.op.input_dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let mut kx = vec![0.0; self.op.output_dim()];
        self.op.apply_into(x, &mut kx);
        0.5 * self.weight * vector::dist_sq(&kx, &self.b) + 0.5 * self.ridge * vector::norm_sq(x)
    }

    fn has_gradient(&self) -> bool {
        true
    }

    fn has_prox(&self) -> bool {
        true
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let mut r = vec![0.0; self.op.output_dim()];
        self.op.apply_into(x, &mut r);
        for (ri, bi) in r.iter_mut().zip(&self.b) {
            *ri = self.weight * (*ri - bi);
        }
        self.op.adjoint_into(&r, out);
        if self.ridge != 0.0 {
            vector::axpy(self.ridge, x, out);
        }
        Ok(())
    }

    fn prox(&self, z: &[f64], step: f64) -> Result<Vec<f64>> {
        let shrink = 1.0 + step * self.ridge;
        if shrink == 1.0 {
            return prox::prox_quadratic_primal(z, step, self.op.as_ref(), &self.b, self.weight);
        }
        let zs: Vec<f64> = z.iter().map(|v| v / shrink).collect();
        prox::prox_quadratic_primal(&zs, step / shrink, self.op.as_ref(), &self.b, self.weight)
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn strong_convexity(&self) -> f64 {
        self.mu
    }
}

/// Smoothed-TV dual: `g(y) = δ{‖y_i‖₂ ≤ 1}(y) + (μ_g/2)‖y‖²` on pair vectors.
#[derive(Debug, Clone)]
pub struct SmoothedTvDual {
    dim: usize,
    mu_g: f64,
}

impl SmoothedTvDual {
    pub fn new(dim: usize, mu_g: f64) -> Self {
        assert!(dim.is_multiple_of(2), "pair vectors have even length");
        Self { dim, mu_g }
    }

    fn pair_norms(y: &[f64]) -> impl Iterator<Item = f64> + '_ {
        let half = y.len() / 2;
        (0..half).map(move |i| (y[i] * y[i] + y[half + i] * y[half + i]).sqrt())
    }
}

impl DualOracle for SmoothedTvDual {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, y: &[f64]) -> f64 {
        if Self::pair_norms(y).any(|r| r > 1.0 + FEASIBILITY_TOL) {
            f64::INFINITY
        } else {
            0.5 * self.mu_g * vector::norm_sq(y)
        }
    }

    fn prox_in_place(&self, z: &mut [f64], step: f64) {
        prox::prox_smoothed_tv_dual_in_place(z, step, self.mu_g);
    }

    fn strong_convexity(&self) -> f64 {
        self.mu_g
    }

    fn set_strong_convexity(&mut self, mu_g: f64) {
        self.mu_g = mu_g;
    }

    fn gradient(&self, y: &[f64]) -> Option<Vec<f64>> {
        if Self::pair_norms(y).all(|r| r < 1.0) {
            Some(y.iter().map(|v| self.mu_g * v).collect())
        } else {
            None
        }
    }
}

/// `g(u) = δ_{[−1,1]}(u) + ⟨c, u⟩ + (μ_g/2)‖u‖²`.
#[derive(Debug, Clone)]
pub struct BoxLinearDual {
    c: Vec<f64>,
    mu_g: f64,
}

impl BoxLinearDual {
    pub fn new(c: Vec<f64>, mu_g: f64) -> Self {
        Self { c, mu_g }
    }

    pub fn linear_term(&self) -> &[f64] {
        &self.c
    }
}

impl DualOracle for BoxLinearDual {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn value(&self, u: &[f64]) -> f64 {
        if u.iter().any(|v| v.abs() > 1.0 + FEASIBILITY_TOL) {
            f64::INFINITY
        } else {
            vector::dot(&self.c, u) + 0.5 * self.mu_g * vector::norm_sq(u)
        }
    }

    fn prox_in_place(&self, z: &mut [f64], step: f64) {
        prox::prox_linear_plus_box_in_place(z, step, &self.c, self.mu_g);
    }

    fn strong_convexity(&self) -> f64 {
        self.mu_g
    }

    fn set_strong_convexity(&mut self, mu_g: f64) {
        self.mu_g = mu_g;
    }

    fn gradient(&self, u: &[f64]) -> Option<Vec<f64>> {
        if u.iter().all(|v| v.abs() < 1.0) {
            Some(self.c.iter().zip(u).map(|(c, v)| c + self.mu_g * v).collect())
        } else {
            None
        }
    }
}

/// `g(y) = (μ_g/2)‖y‖² + δ{‖y‖ ≤ R}(y)`; `R = ∞` drops the indicator.
#[derive(Debug, Clone)]
pub struct BallQuadraticDual {
    dim: usize,
    mu_g: f64,
    radius: f64,
}

impl BallQuadraticDual {
    pub fn new(dim: usize, mu_g: f64, radius: f64) -> Self {
        Self { dim, mu_g, radius }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

impl DualOracle for BallQuadraticDual {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, y: &[f64]) -> f64 {
        let n2 = vector::norm_sq(y);
        if n2.sqrt() > self.radius * (1.0 + FEASIBILITY_TOL) {
            f64::INFINITY
        } else {
            0.5 * self.mu_g * n2
        }
    }

    fn prox_in_place(&self, z: &mut [f64], step: f64) {
        vector::scale(1.0 / (1.0 + step * self.mu_g), z);
        if self.radius.is_finite() {
            prox::project_ball_in_place(z, self.radius);
        }
    }

    fn strong_convexity(&self) -> f64 {
        self.mu_g
    }

    fn set_strong_convexity(&mut self, mu_g: f64) {
        self.mu_g = mu_g;
    }

    fn gradient(&self, y: &[f64]) -> Option<Vec<f64>> {
        (vector::norm(y) < self.radius).then(|| y.iter().map(|v| self.mu_g * v).collect())
    }
}

/// Separable dual `g(y₁, y₂, …) = Σ gᵢ(yᵢ)` over consecutive blocks.
#[derive(Debug)]
pub struct StackedDual {
    blocks: Vec<Box<dyn DualOracle>>,
}

impl StackedDual {
    pub fn new(blocks: Vec<Box<dyn DualOracle>>) -> Self {
        Self { blocks }
    }

    fn ranges(&self) -> impl Iterator<Item = (usize, usize, &dyn DualOracle)> {
        let mut offset = 0;
        self.blocks.iter().map(move |b| {
            let start = offset;
            offset += b.dim();
            (start, offset, b.as_ref())
        })
    }
}

impl DualOracle for StackedDual {
    fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.dim()).sum()
    }

    fn value(&self, y: &[f64]) -> f64 {
        self.ranges().map(|(s, e, b)| b.value(&y[s..e])).sum()
    }

    fn prox_in_place(&self, z: &mut [f64], step: f64) {
        let mut offset = 0;
        for b in &self.blocks {
            let end = offset + b.dim();
            b.prox_in_place(&mut z[offset..end], step);
            offset = end;
        }
    }

    /// The smallest modulus over the blocks.
    fn strong_convexity(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.strong_convexity())
            .fold(f64::INFINITY, f64::min)
    }

    fn set_strong_convexity(&mut self, mu_g: f64) {
        for b in &mut self.blocks {
            b.set_strong_convexity(mu_g);
        }
    }

    fn gradient(&self, y: &[f64]) -> Option<Vec<f64>> {
        let mut out = Vec::with_capacity(y.len());
        for (s, e, b) in self.ranges() {
            out.extend(b.gradient(&y[s..e])?);
        }
        Some(out)
    }
}

/// The constants consumed by parameter schedules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemConstants {
    pub lipschitz_f: f64,
    pub mu_f: f64,
    pub mu_g: f64,
    pub norm_a: f64,
}

/// `min_x max_y f(x) + ⟨Ax, y⟩ − g(y)`.
#[derive(Debug)]
pub struct SaddleProblem {
    pub f: Box<dyn PrimalOracle>,
    pub g: Box<dyn DualOracle>,
    pub a: Arc<dyn LinearOperator>,
    /// The `‖A‖` used by schedules and bounds; defaults to `a.norm_bound()`.
    pub norm_a: f64,
}

impl SaddleProblem {
    pub fn new(f: Box<dyn PrimalOracle>, g: Box<dyn DualOracle>, a: Arc<dyn LinearOperator>) -> Result<Self> {
        check_len("primal dimension", a.input_dim(), f.dim())?;
        check_len("dual dimension", a.output_dim(), g.dim())?;
        let norm_a = a.norm_bound();
        Ok(Self { f, g, a, norm_a })
    }

    pub fn with_norm_a(mut self, norm_a: f64) -> Self {
        self.norm_a = norm_a;
        self
    }

    pub fn primal_dim(&self) -> usize {
        self.a.input_dim()
    }

    pub fn dual_dim(&self) -> usize {
        self.a.output_dim()
    }

    pub fn constants(&self) -> ProblemConstants {
        ProblemConstants {
            lipschitz_f: self.f.lipschitz(),
            mu_f: self.f.strong_convexity(),
            mu_g: self.g.strong_convexity(),
            norm_a: self.norm_a,
        }
    }

    pub(crate) fn check_point(&self, x: &[f64], y: &[f64]) -> Result<()> {
        check_len("primal point", self.primal_dim(), x.len())?;
        check_len("dual point", self.dual_dim(), y.len())
    }
}

/// `L(x, y) = f(x) + ⟨Ax, y⟩ − g(y)`; `−∞` when `y ∉ dom g`.
pub fn lagrangian(problem: &SaddleProblem, x: &[f64], y: &[f64]) -> Result<f64> {
    problem.check_point(x, y)?;
    let gy = problem.g.value(y);
    if gy == f64::INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    let mut ax = vec![0.0; problem.dual_dim()];
    problem.a.apply_into(x, &mut ax);
    Ok(problem.f.value(x) + vector::dot(&ax, y) - gy)
}

/// `‖∇f(x) + Aᵀy‖ + ‖Ax − ∇g(y)‖` for smooth `f` and `g` differentiable at `y`.
pub fn kkt_residual(problem: &SaddleProblem, x: &[f64], y: &[f64]) -> Result<f64> {
    problem.check_point(x, y)?;
    if !problem.f.has_gradient() {
        return Err(DpdError::Unsupported(
            "KKT residual needs a gradient oracle for f".into(),
        ));
    }
    let grad_g = problem
        .g
        .gradient(y)
        .ok_or_else(|| DpdError::Unsupported("g is not differentiable at the given point".into()))?;

    let mut primal = vec![0.0; problem.primal_dim()];
    problem.f.gradient_into(x, &mut primal)?;
    let mut aty = vec![0.0; problem.primal_dim()];
    problem.a.adjoint_into(y, &mut aty);
    vector::axpy(1.0, &aty, &mut primal);

    let mut ax = vec![0.0; problem.dual_dim()];
    problem.a.apply_into(x, &mut ax);
    vector::axpy(-1.0, &grad_g, &mut ax);

    Ok(vector::norm(&primal) + vector::norm(&ax))
}

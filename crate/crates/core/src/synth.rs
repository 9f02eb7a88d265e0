//! Seeded synthetic saddle problems whose saddle point is known exactly, for
//! checking gaps against bounds.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::diagnostics::GapReference;
use crate::error::{DpdError, Result};
use crate::linops::{DenseMatrix, LinearOperator};
use crate::model::{kkt_residual, BallQuadraticDual, BoxLinearDual, QuadraticFidelity, SaddleProblem, ZeroFunction};
use crate::seeded_rng;
use crate::vector;

/// `f(x) = ½‖Cx − d‖² + (λ/2)‖x‖²`, `g(y) = (μ_g/2)‖y‖² + δ{‖y‖ ≤ R}` with
/// random `C`, `d`, `A`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticSpec {
    pub primal_dim: usize,
    pub dual_dim: usize,
    pub mu_g: f64,
    pub ridge: f64,
    pub seed: u64,
}

impl Default for QuadraticSpec {
    fn default() -> Self {
        Self {
            primal_dim: 20,
            dual_dim: 15,
            mu_g: 1.0,
            ridge: 0.0,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QuadraticInstance {
    pub spec: QuadraticSpec,
    pub c: Arc<DenseMatrix>,
    pub d: Vec<f64>,
    pub a: Arc<DenseMatrix>,
    /// Ball radius, chosen so the indicator is inactive at the saddle.
    pub radius: f64,
    pub x_star: Vec<f64>,
    pub y_star: Vec<f64>,
}

fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> Result<DenseMatrix> {
    let data = (0..rows * cols)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect();
    DenseMatrix::from_row_major(rows, cols, data)
}

impl QuadraticInstance {
    /// Draws the data and solves
    /// `(CᵀC + λI + AᵀA/μ_g) x* = Cᵀd`, `y* = A x*/μ_g`.
    pub fn generate(spec: QuadraticSpec) -> Result<Self> {
        let QuadraticSpec {
            primal_dim: n,
            dual_dim: m,
            mu_g,
            ridge,
            seed,
        } = spec;
        if n == 0 || m == 0 {
            return Err(DpdError::Config("instance dimensions must be positive".into()));
        }
        if !(mu_g > 0.0) || !(ridge >= 0.0) {
            return Err(DpdError::Config(format!(
                "need mu_g > 0 and ridge >= 0, got mu_g={mu_g}, ridge={ridge}"
            )));
        }
        let mut rng = seeded_rng(seed);
        let c = gaussian_matrix(&mut rng, n, n, 1.0 / (n as f64).sqrt())?;
        let d: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let a = gaussian_matrix(&mut rng, m, n, 1.0 / (n as f64).sqrt())?;

        let cm = c.to_nalgebra();
        let am = a.to_nalgebra();
        let mut lhs = cm.transpose() * &cm + am.transpose() * &am / mu_g;
        for i in 0..n {
            lhs[(i, i)] += ridge;
        }
        let rhs = cm.transpose() * DVector::from_column_slice(&d);
        let x = lhs
            .lu()
            .solve(&rhs)
            .ok_or_else(|| DpdError::Numerical("saddle system is singular".into()))?;
        let y: DVector<f64> = &am * &x / mu_g;

        let x_star: Vec<f64> = x.iter().copied().collect();
        let y_star: Vec<f64> = y.iter().copied().collect();
        let radius = 2.0 * vector::norm(&y_star) + 1.0;
        let inst = Self {
            spec,
            c: Arc::new(c),
            d,
            a: Arc::new(a),
            radius,
            x_star,
            y_star,
        };
        let resid = kkt_residual(&inst.problem()?, &inst.x_star, &inst.y_star)?;
        if resid > 1e-8 {
            return Err(DpdError::Numerical(format!(
                "certified saddle has KKT residual {resid:e}"
            )));
        }
        Ok(inst)
    }

    pub fn problem(&self) -> Result<SaddleProblem> {
        let f = QuadraticFidelity::new(self.c.clone(), self.d.clone(), 1.0)?.with_ridge(self.spec.ridge);
        let g = BallQuadraticDual::new(self.spec.dual_dim, self.spec.mu_g, self.radius);
        SaddleProblem::new(Box::new(f), Box::new(g), self.a.clone())
    }

    pub fn reference(&self) -> Result<GapReference> {
        GapReference::new(&self.problem()?, self.x_star.clone(), self.y_star.clone())
    }

    /// Exact `λ_max(CᵀC) + λ`, the smallest valid `L_f`.
    pub fn exact_lipschitz(&self) -> f64 {
        let s = self.c.to_nalgebra().singular_values().max();
        s * s + self.spec.ridge
    }
}

/// `min_x ‖Ax − b‖₁`, written as `f ≡ 0`, `g(y) = δ_{[−1,1]}(y) + ⟨b, y⟩`.
///
/// A dual solution `y*` with `active` entries at ±1 and the rest strictly
/// inside the box is planted first; `A` is projected so that `Aᵀy* = 0`, and
/// `b = Ax* − r` with `r` supported on the ±1 entries and signed like `y*`.
/// The gap at `(x*, y*)` is then `⟨r, y* − ȳ⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedL1Spec {
    pub primal_dim: usize,
    pub dual_dim: usize,
    pub active: usize,
    pub seed: u64,
}

impl Default for PlantedL1Spec {
    fn default() -> Self {
        Self {
            primal_dim: 10,
            dual_dim: 30,
            active: 10,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PlantedL1Instance {
    pub spec: PlantedL1Spec,
    pub a: Arc<DenseMatrix>,
    pub b: Vec<f64>,
    pub residual: Vec<f64>,
    pub x_star: Vec<f64>,
    pub y_star: Vec<f64>,
}

impl PlantedL1Instance {
    pub fn generate(spec: PlantedL1Spec) -> Result<Self> {
        let PlantedL1Spec {
            primal_dim: n,
            dual_dim: m,
            active,
            seed,
        } = spec;
        if n == 0 || m == 0 || active == 0 || active > m {
            return Err(DpdError::Config(format!(
                "need n, m > 0 and 0 < active <= m, got n={n}, m={m}, active={active}"
            )));
        }
        let mut rng = seeded_rng(seed);
        let mut idx: Vec<usize> = (0..m).collect();
        idx.shuffle(&mut rng);
        let mut y_star = vec![0.0; m];
        let mut residual = vec![0.0; m];
        for (rank, &i) in idx.iter().enumerate() {
            if rank < active {
                let s = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                y_star[i] = s;
                residual[i] = s * rng.random_range(0.5..1.5);
            } else {
                y_star[i] = rng.random_range(-0.8..0.8);
            }
        }

        let mm = gaussian_matrix(&mut rng, m, n, 1.0 / (n as f64).sqrt())?.to_nalgebra();
        let ys = DVector::from_column_slice(&y_star);
        let proj = DMatrix::<f64>::identity(m, m) - &ys * ys.transpose() / ys.norm_squared();
        let am: DMatrix<f64> = proj * mm;
        let mut data = Vec::with_capacity(m * n);
        for r in 0..m {
            data.extend(am.row(r).iter().copied());
        }
        let a = DenseMatrix::from_row_major(m, n, data)?;

        let x_star: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let ax = a.apply(&x_star)?;
        let b: Vec<f64> = ax.iter().zip(&residual).map(|(v, r)| v - r).collect();

        let aty = a.adjoint(&y_star)?;
        if vector::norm(&aty) > 1e-10 {
            return Err(DpdError::Numerical("planted dual is not in ker(Aᵀ)".into()));
        }
        Ok(Self {
            spec,
            a: Arc::new(a),
            b,
            residual,
            x_star,
            y_star,
        })
    }

    pub fn problem(&self) -> Result<SaddleProblem> {
        SaddleProblem::new(
            Box::new(ZeroFunction::new(self.spec.primal_dim)),
            Box::new(BoxLinearDual::new(self.b.clone(), 0.0)),
            self.a.clone(),
        )
    }

    pub fn reference(&self) -> Result<GapReference> {
        GapReference::new(&self.problem()?, self.x_star.clone(), self.y_star.clone())
    }
}

//! Linearized DPD: gradient steps on a smooth `f`, prox steps on `g`, and dual
//! extrapolation, with optional θ-blending of the primal point.
//!
//! One iteration `t`:
//!
//! ```text
//! x̂ₜ   = (1 − θₜ) x̄ₜ + θₜ xₜ
//! xₜ₊₁ = xₜ − ηₜ (∇f(x̂ₜ) + Aᵀŷₜ)
//! x̄ₜ₊₁ = (1 − θₜ) x̄ₜ + θₜ xₜ₊₁
//! yₜ₊₁ = prox_{τₜ g}(yₜ + τₜ A xₜ₊₁)
//! ŷₜ₊₁ = yₜ₊₁ + αₜ₊₁ (yₜ₊₁ − yₜ)
//! ȳₜ₊₁ = (1 − θₜ) ȳₜ + θₜ yₜ₊₁
//! ```
//!
//! starting from `x̄₁ = x₁`, `ŷ₁ = ȳ₁ = y₁`.

use crate::aggregate::WeightedAverage;
use crate::diagnostics::{BoundConstants, BoundRegime, StepParams};
use crate::error::{check_len, DpdError, Result};
use crate::model::{ProblemConstants, SaddleProblem};
use crate::vector;
use crate::{Snapshot, SolveOutcome};

pub use crate::aggregate::aggregate_closed_form;

/// Parameter schedule families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LdpdRegime {
    /// `μ_f = μ_g = 0`; the schedule depends on the horizon `N`.
    WeaklyConvex { horizon: usize },
    /// `μ_g > 0`, full `O(1/k²)` acceleration.
    StronglyConvexDual,
    /// `μ_f > 0`, single-step primal with growing dual steps.
    StronglyConvexPrimal,
    /// `θ = α = 1` with a fixed dual step `tau`.
    SingleStep { tau: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LdpdParams {
    pub theta: f64,
    pub alpha: f64,
    pub tau: f64,
    pub eta: f64,
}

impl From<LdpdParams> for StepParams {
    fn from(p: LdpdParams) -> Self {
        StepParams {
            theta: Some(p.theta),
            alpha: p.alpha,
            tau: p.tau,
            eta: p.eta,
        }
    }
}

impl LdpdRegime {
    pub fn name(&self) -> &'static str {
        match self {
            Self::WeaklyConvex { .. } => "weakly-convex",
            Self::StronglyConvexDual => "strongly-convex-dual",
            Self::StronglyConvexPrimal => "strongly-convex-primal",
            Self::SingleStep { .. } => "single-step",
        }
    }

    /// Whether the returned point is the recursive θ-blend `(x̄, ȳ)`.
    pub fn is_blended(&self) -> bool {
        matches!(self, Self::WeaklyConvex { .. } | Self::StronglyConvexDual)
    }

    pub fn validate(&self, c: &ProblemConstants) -> Result<()> {
        let fail = |msg: String| Err(DpdError::Config(format!("{}: {msg}", self.name())));
        if !(c.lipschitz_f >= 0.0 && c.norm_a >= 0.0) {
            return fail("L_f and ||A|| must be nonnegative".into());
        }
        match *self {
            Self::WeaklyConvex { horizon: 0 } => fail("horizon must be >= 1".into()),
            Self::StronglyConvexDual if !(c.mu_g > 0.0) => fail(format!("requires mu_g > 0, got {}", c.mu_g)),
            Self::StronglyConvexPrimal if !(c.mu_f > 0.0) => fail(format!("requires mu_f > 0, got {}", c.mu_f)),
            Self::StronglyConvexPrimal if c.lipschitz_f < c.mu_f => {
                fail(format!("requires L_f >= mu_f, got {} < {}", c.lipschitz_f, c.mu_f))
            }
            Self::StronglyConvexPrimal if !(c.norm_a > 0.0) => fail("requires ||A|| > 0".into()),
            Self::SingleStep { tau } if !(tau > 0.0 && tau.is_finite()) => fail(format!("requires tau > 0, got {tau}")),
            Self::SingleStep { tau } if !(c.lipschitz_f + tau * c.norm_a * c.norm_a > 0.0) => {
                fail("L_f + tau ||A||^2 must be positive".into())
            }
            _ => Ok(()),
        }
    }

    /// `t₀ = ⌈2(L_f − μ_f)/μ_f⌉` for the strongly convex primal schedule.
    pub fn warm_start_offset(c: &ProblemConstants) -> f64 {
        (2.0 * (c.lipschitz_f - c.mu_f) / c.mu_f).ceil().max(0.0)
    }

    /// The base dual step `τ` of the regime.
    pub fn base_tau(&self, c: &ProblemConstants) -> f64 {
        match *self {
            Self::WeaklyConvex { .. } => f64::NAN,
            Self::StronglyConvexDual => 3.0 / c.mu_g,
            Self::StronglyConvexPrimal => c.mu_f / (2.0 * c.norm_a * c.norm_a),
            Self::SingleStep { tau } => tau,
        }
    }

    /// Weight of `(x_{t+1}, y_{t+1})` in the reported aggregate.
    pub fn aggregation_weight(&self, t: usize, c: &ProblemConstants) -> f64 {
        match self {
            Self::WeaklyConvex { .. } | Self::StronglyConvexDual => t as f64,
            Self::StronglyConvexPrimal => t as f64 + Self::warm_start_offset(c) + 1.0,
            Self::SingleStep { .. } => 1.0,
        }
    }

    pub fn bound_regime(&self) -> BoundRegime {
        match self {
            Self::WeaklyConvex { .. } => BoundRegime::LdpdWeaklyConvex,
            Self::StronglyConvexDual => BoundRegime::LdpdStronglyConvexDual,
            Self::StronglyConvexPrimal => BoundRegime::LdpdStronglyConvexPrimal,
            Self::SingleStep { .. } => BoundRegime::LdpdSingleStep,
        }
    }

    pub fn bound_constants(&self, c: &ProblemConstants) -> BoundConstants {
        BoundConstants {
            lipschitz_f: c.lipschitz_f,
            mu_f: c.mu_f,
            mu_g: c.mu_g,
            norm_a: c.norm_a,
            tau: self.base_tau(c),
            t0: match self {
                Self::StronglyConvexPrimal => Self::warm_start_offset(c),
                _ => 0.0,
            },
            horizon: match *self {
                Self::WeaklyConvex { horizon } => horizon,
                _ => 0,
            },
        }
    }
}

/// Parameters `(θₜ, αₜ, τₜ, ηₜ)` of iteration `t ≥ 1`.
pub fn schedule(regime: LdpdRegime, t: usize, c: &ProblemConstants) -> Result<LdpdParams> {
    if t == 0 {
        return Err(DpdError::Config("iteration counter starts at 1".into()));
    }
    regime.validate(c)?;
    let tf = t as f64;
    let a2 = c.norm_a * c.norm_a;
    let l = c.lipschitz_f;
    let params = match regime {
        LdpdRegime::WeaklyConvex { horizon } => {
            let n = horizon as f64;
            LdpdParams {
                theta: 2.0 / (tf + 1.0),
                alpha: (tf - 1.0) / tf,
                tau: tf / n,
                eta: tf / (2.0 * l + n * a2),
            }
        }
        LdpdRegime::StronglyConvexDual => {
            let tau = 3.0 / c.mu_g;
            LdpdParams {
                theta: 2.0 / (tf + 1.0),
                alpha: (tf - 1.0) / tf,
                tau: tau / tf,
                eta: tf / (2.0 * l + tau * a2),
            }
        }
        LdpdRegime::StronglyConvexPrimal => {
            let t0 = LdpdRegime::warm_start_offset(c);
            let tau = c.mu_f / (2.0 * a2);
            let tau_t = (tf + 1.0) * tau;
            LdpdParams {
                theta: 1.0,
                alpha: (tf + t0) / (tf + t0 + 1.0),
                tau: tau_t,
                eta: 1.0 / (l + tau_t * a2),
            }
        }
        LdpdRegime::SingleStep { tau } => LdpdParams {
            theta: 1.0,
            alpha: 1.0,
            tau,
            eta: 1.0 / (l + tau * a2),
        },
    };
    Ok(params)
}

/// Iterates and running aggregates of an LDPD run.
#[derive(Debug, Clone)]
pub struct LdpdState {
    /// Current iteration index; the next step computes `x_{t+1}`.
    pub t: usize,
    pub x: Vec<f64>,
    pub xhat: Vec<f64>,
    pub xbar: Vec<f64>,
    pub y: Vec<f64>,
    pub y_prev: Vec<f64>,
    pub yhat: Vec<f64>,
    pub ybar: Vec<f64>,
    pub agg_x: WeightedAverage,
    pub agg_y: WeightedAverage,
    grad: Vec<f64>,
    aty: Vec<f64>,
    ax: Vec<f64>,
}

impl LdpdState {
    pub fn new(x1: Vec<f64>, y1: Vec<f64>) -> Self {
        let (n, m) = (x1.len(), y1.len());
        Self {
            t: 1,
            xhat: x1.clone(),
            xbar: x1.clone(),
            x: x1,
            y_prev: y1.clone(),
            yhat: y1.clone(),
            ybar: y1.clone(),
            y: y1,
            agg_x: WeightedAverage::new(n),
            agg_y: WeightedAverage::new(m),
            grad: vec![0.0; n],
            aty: vec![0.0; n],
            ax: vec![0.0; m],
        }
    }

    /// Performs iteration `self.t` with `params` for that iteration,
    /// extrapolating the dual with `alpha_next = α_{t+1}` and adding the new
    /// iterates to the weighted aggregates with `weight`.
    pub fn step(&mut self, problem: &SaddleProblem, params: &LdpdParams, alpha_next: f64, weight: f64) -> Result<()> {
        let t = self.t;
        let LdpdParams { theta, tau, eta, .. } = *params;

        for ((h, xb), x) in self.xhat.iter_mut().zip(&self.xbar).zip(&self.x) {
            *h = (1.0 - theta) * xb + theta * x;
        }

        problem.f.gradient_into(&self.xhat, &mut self.grad)?;
        problem.a.adjoint_into(&self.yhat, &mut self.aty);
        for ((x, g), a) in self.x.iter_mut().zip(&self.grad).zip(&self.aty) {
            *x -= eta * (g + a);
        }
        if !vector::all_finite(&self.x) {
            return Err(DpdError::Divergence {
                iteration: t,
                iterate: "x",
            });
        }
        for (xb, x) in self.xbar.iter_mut().zip(&self.x) {
            *xb = (1.0 - theta) * *xb + theta * x;
        }

        problem.a.apply_into(&self.x, &mut self.ax);
        std::mem::swap(&mut self.y_prev, &mut self.y);
        self.y.copy_from_slice(&self.y_prev);
        vector::axpy(tau, &self.ax, &mut self.y);
        problem.g.prox_in_place(&mut self.y, tau);
        if !vector::all_finite(&self.y) {
            return Err(DpdError::Divergence {
                iteration: t,
                iterate: "y",
            });
        }

        for ((h, y), yp) in self.yhat.iter_mut().zip(&self.y).zip(&self.y_prev) {
            *h = y + alpha_next * (y - yp);
        }
        for (yb, y) in self.ybar.iter_mut().zip(&self.y) {
            *yb = (1.0 - theta) * *yb + theta * y;
        }

        self.agg_x.push(weight, &self.x);
        self.agg_y.push(weight, &self.y);
        self.t += 1;
        Ok(())
    }
}

/// Runs `iters` LDPD iterations from `(x1, y1)`.
///
/// Returns `(x̄, ȳ)` for the blended regimes and the weighted averages with
/// weights `t + t₀ + 1` (strongly convex primal) or uniform weights (single
/// step) otherwise. `observer` sees every iteration.
pub fn run<O>(
    problem: &SaddleProblem,
    regime: LdpdRegime,
    x1: &[f64],
    y1: &[f64],
    iters: usize,
    mut observer: O,
) -> Result<SolveOutcome>
where
    O: FnMut(&Snapshot<'_>),
{
    problem.check_point(x1, y1)?;
    if iters == 0 {
        return Err(DpdError::Config("iters must be >= 1".into()));
    }
    if let LdpdRegime::WeaklyConvex { horizon } = regime {
        if horizon != iters {
            return Err(DpdError::Config(format!(
                "weakly-convex schedule was built for horizon {horizon} but {iters} iterations were requested"
            )));
        }
    }
    if !problem.f.has_gradient() {
        return Err(DpdError::Unsupported("LDPD needs a gradient oracle for f".into()));
    }
    let consts = problem.constants();
    regime.validate(&consts)?;

    let mut state = LdpdState::new(x1.to_vec(), y1.to_vec());
    let mut trace = Vec::with_capacity(iters);
    for t in 1..=iters {
        let params = schedule(regime, t, &consts)?;
        let alpha_next = schedule(regime, t + 1, &consts)?.alpha;
        state.step(problem, &params, alpha_next, regime.aggregation_weight(t, &consts))?;
        trace.push(StepParams::from(params));

        let (xa, ya);
        let (x_agg, y_agg): (&[f64], &[f64]) = if regime.is_blended() {
            (&state.xbar, &state.ybar)
        } else {
            xa = state.agg_x.mean().expect("pushed");
            ya = state.agg_y.mean().expect("pushed");
            (&xa, &ya)
        };
        observer(&Snapshot {
            t,
            params: params.into(),
            x: &state.x,
            y: &state.y,
            x_agg,
            y_agg,
        });
    }

    let (x_agg, y_agg) = if regime.is_blended() {
        (state.xbar.clone(), state.ybar.clone())
    } else {
        (state.agg_x.mean().expect("pushed"), state.agg_y.mean().expect("pushed"))
    };
    check_len("aggregate", x1.len(), x_agg.len())?;
    Ok(SolveOutcome {
        x_agg,
        y_agg,
        x_last: state.x,
        y_last: state.y,
        iterations: iters,
        params: trace,
    })
}

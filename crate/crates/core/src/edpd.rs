//! Exact DPD: an exact prox step on `f`, a prox step on `g`, and dual
//! extrapolation.
//!
//! ```text
//! xₜ₊₁ = prox_{ηₜ f}(xₜ − ηₜ Aᵀŷₜ)
//! yₜ₊₁ = prox_{τₜ g}(yₜ + τₜ A xₜ₊₁)
//! ŷₜ₊₁ = yₜ₊₁ + αₜ₊₁ (yₜ₊₁ − yₜ)
//! ```
//!
//! The first line is `argmin_x f(x) + ⟨Ax, ŷₜ⟩ + ‖x − xₜ‖²/(2ηₜ)` after
//! completing the square.

use crate::aggregate::WeightedAverage;
use crate::diagnostics::{BoundConstants, BoundRegime, StepParams};
use crate::error::{DpdError, Result};
use crate::model::{ProblemConstants, SaddleProblem};
use crate::vector;
use crate::{Snapshot, SolveOutcome};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdpdRegime {
    /// `μ_f > 0`; `τ = μ_f/(2‖A‖²)`.
    StronglyConvexPrimal,
    /// `μ_g > 0`; `τ = 2.5/μ_g`.
    StronglyConvexDual,
    /// No strong convexity: `α = 1`, fixed `tau`, `η = 1/(τ‖A‖²)`.
    WeaklyConvex { tau: f64 },
}

/// Step sizes of iteration `t` together with the extrapolation weight
/// `α_{t+1}` applied at the end of that iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdpdParams {
    pub alpha_next: f64,
    pub tau: f64,
    pub eta: f64,
}

impl From<EdpdParams> for StepParams {
    fn from(p: EdpdParams) -> Self {
        StepParams {
            theta: None,
            alpha: p.alpha_next,
            tau: p.tau,
            eta: p.eta,
        }
    }
}

impl EdpdRegime {
    pub fn name(&self) -> &'static str {
        match self {
            Self::StronglyConvexPrimal => "strongly-convex-primal",
            Self::StronglyConvexDual => "strongly-convex-dual",
            Self::WeaklyConvex { .. } => "weakly-convex",
        }
    }

    pub fn validate(&self, c: &ProblemConstants) -> Result<()> {
        let fail = |msg: String| Err(DpdError::Config(format!("{}: {msg}", self.name())));
        if !(c.norm_a > 0.0 && c.norm_a.is_finite()) {
            return fail(format!("requires 0 < ||A|| < inf, got {}", c.norm_a));
        }
        match *self {
            Self::StronglyConvexPrimal if !(c.mu_f > 0.0) => fail(format!("requires mu_f > 0, got {}", c.mu_f)),
            Self::StronglyConvexDual if !(c.mu_g > 0.0) => fail(format!("requires mu_g > 0, got {}", c.mu_g)),
            Self::WeaklyConvex { tau } if !(tau > 0.0 && tau.is_finite()) => {
                fail(format!("requires tau > 0, got {tau}"))
            }
            _ => Ok(()),
        }
    }

    pub fn base_tau(&self, c: &ProblemConstants) -> f64 {
        match *self {
            Self::StronglyConvexPrimal => c.mu_f / (2.0 * c.norm_a * c.norm_a),
            Self::StronglyConvexDual => 2.5 / c.mu_g,
            Self::WeaklyConvex { tau } => tau,
        }
    }

    pub fn aggregation_weight(&self, t: usize) -> f64 {
        match self {
            Self::StronglyConvexPrimal => t as f64 + 2.0,
            Self::StronglyConvexDual => t as f64 + 1.0,
            Self::WeaklyConvex { .. } => 1.0,
        }
    }

    pub fn bound_regime(&self) -> BoundRegime {
        match self {
            Self::StronglyConvexPrimal => BoundRegime::EdpdStronglyConvexPrimal,
            Self::StronglyConvexDual => BoundRegime::EdpdStronglyConvexDual,
            Self::WeaklyConvex { .. } => BoundRegime::EdpdWeaklyConvex,
        }
    }

    pub fn bound_constants(&self, c: &ProblemConstants) -> BoundConstants {
        BoundConstants {
            lipschitz_f: c.lipschitz_f,
            mu_f: c.mu_f,
            mu_g: c.mu_g,
            norm_a: c.norm_a,
            tau: self.base_tau(c),
            t0: 0.0,
            horizon: 0,
        }
    }
}

/// Parameters of iteration `t ≥ 1`.
pub fn schedule(regime: EdpdRegime, t: usize, c: &ProblemConstants) -> Result<EdpdParams> {
    if t == 0 {
        return Err(DpdError::Config("iteration counter starts at 1".into()));
    }
    regime.validate(c)?;
    let tf = t as f64;
    let a2 = c.norm_a * c.norm_a;
    let tau = regime.base_tau(c);
    let p = match regime {
        EdpdRegime::StronglyConvexPrimal => {
            let tau_t = (tf + 1.0) * tau;
            EdpdParams {
                alpha_next: (tf + 2.0) / (tf + 3.0),
                tau: tau_t,
                eta: 1.0 / (tau_t * a2),
            }
        }
        EdpdRegime::StronglyConvexDual => EdpdParams {
            alpha_next: (tf + 1.0) / (tf + 2.0),
            tau: tau / (tf + 1.0),
            eta: (tf + 1.0) / (tau * a2),
        },
        EdpdRegime::WeaklyConvex { tau } => EdpdParams {
            alpha_next: 1.0,
            tau,
            eta: 1.0 / (tau * a2),
        },
    };
    Ok(p)
}

#[derive(Debug, Clone)]
pub struct EdpdState {
    pub t: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub y_prev: Vec<f64>,
    pub yhat: Vec<f64>,
    pub agg_x: WeightedAverage,
    pub agg_y: WeightedAverage,
    aty: Vec<f64>,
    ax: Vec<f64>,
}

impl EdpdState {
    /// Starts with `y₀ = y₁`, so `ŷ₁ = y₁`.
    pub fn new(x1: Vec<f64>, y1: Vec<f64>) -> Self {
        let (n, m) = (x1.len(), y1.len());
        Self {
            t: 1,
            x: x1,
            y_prev: y1.clone(),
            yhat: y1.clone(),
            y: y1,
            agg_x: WeightedAverage::new(n),
            agg_y: WeightedAverage::new(m),
            aty: vec![0.0; n],
            ax: vec![0.0; m],
        }
    }

    pub fn step(&mut self, problem: &SaddleProblem, params: &EdpdParams, weight: f64) -> Result<()> {
        let t = self.t;
        let EdpdParams { alpha_next, tau, eta } = *params;

        problem.a.adjoint_into(&self.yhat, &mut self.aty);
        let mut z = self.x.clone();
        vector::axpy(-eta, &self.aty, &mut z);
        self.x = problem.f.prox(&z, eta)?;
        if !vector::all_finite(&self.x) {
            return Err(DpdError::Divergence {
                iteration: t,
                iterate: "x",
            });
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
        self.agg_x.push(weight, &self.x);
        self.agg_y.push(weight, &self.y);
        self.t += 1;
        Ok(())
    }
}

/// Runs `iters` EDPD iterations from `(x1, y1)` and returns the weighted
/// aggregates (weights `t+2`, `t+1` or uniform by regime).
///
/// When `mu_g_schedule` is given, the dual strong convexity is reset to
/// `mu_g_schedule(t)` before iteration `t` and the schedule is recomputed
/// from the new value. No bound covers that mode.
pub fn run<O>(
    problem: &mut SaddleProblem,
    regime: EdpdRegime,
    x1: &[f64],
    y1: &[f64],
    iters: usize,
    mu_g_schedule: Option<&dyn Fn(usize) -> f64>,
    mut observer: O,
) -> Result<SolveOutcome>
where
    O: FnMut(&Snapshot<'_>),
{
    problem.check_point(x1, y1)?;
    if iters == 0 {
        return Err(DpdError::Config("iters must be >= 1".into()));
    }
    if !problem.f.has_prox() {
        return Err(DpdError::Unsupported("EDPD needs a prox oracle for f".into()));
    }
    if let Some(sched) = mu_g_schedule {
        problem.g.set_strong_convexity(sched(1));
    }
    regime.validate(&problem.constants())?;

    let mut state = EdpdState::new(x1.to_vec(), y1.to_vec());
    let mut trace = Vec::with_capacity(iters);
    for t in 1..=iters {
        if let Some(sched) = mu_g_schedule {
            problem.g.set_strong_convexity(sched(t));
        }
        let params = schedule(regime, t, &problem.constants())?;
        state.step(problem, &params, regime.aggregation_weight(t))?;
        trace.push(StepParams::from(params));

        let x_agg = state.agg_x.mean().expect("pushed");
        let y_agg = state.agg_y.mean().expect("pushed");
        observer(&Snapshot {
            t,
            params: params.into(),
            x: &state.x,
            y: &state.y,
            x_agg: &x_agg,
            y_agg: &y_agg,
        });
    }

    Ok(SolveOutcome {
        x_agg: state.agg_x.mean().expect("pushed"),
        y_agg: state.agg_y.mean().expect("pushed"),
        x_last: state.x,
        y_last: state.y,
        iterations: iters,
        params: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linops::{DenseMatrix, IdentityOperator};
    use crate::model::{BallQuadraticDual, ZeroFunction};
    use std::sync::Arc;

    fn consts(mu_f: f64, mu_g: f64, a: f64) -> ProblemConstants {
        ProblemConstants {
            lipschitz_f: 0.0,
            mu_f,
            mu_g,
            norm_a: a,
        }
    }

    #[test]
    fn strongly_convex_dual_schedule() {
        let p = schedule(EdpdRegime::StronglyConvexDual, 1, &consts(0.0, 0.03, 1.0)).unwrap();
        let tau = 2.5 / 0.03;
        assert!((p.tau - tau / 2.0).abs() < 1e-12);
        assert!((p.eta - 2.0 / tau).abs() < 1e-15);
        assert!((p.alpha_next - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn strongly_convex_primal_schedule() {
        let c = consts(2.0, 0.0, 1.0);
        let p = schedule(EdpdRegime::StronglyConvexPrimal, 1, &c).unwrap();
        assert_eq!(EdpdRegime::StronglyConvexPrimal.base_tau(&c), 1.0);
        assert_eq!((p.tau, p.eta, p.alpha_next), (2.0, 0.5, 0.75));
    }

    #[test]
    fn weakly_convex_schedule_is_constant() {
        for t in [1, 2, 50] {
            let p = schedule(EdpdRegime::WeaklyConvex { tau: 1.0 }, t, &consts(0.0, 0.0, 2.0)).unwrap();
            assert_eq!((p.alpha_next, p.tau, p.eta), (1.0, 1.0, 0.25));
        }
    }

    #[test]
    fn preconditions() {
        let c = consts(0.0, 0.0, 1.0);
        assert!(schedule(EdpdRegime::StronglyConvexDual, 1, &c).is_err());
        assert!(schedule(EdpdRegime::StronglyConvexPrimal, 1, &c).is_err());
        assert!(schedule(EdpdRegime::WeaklyConvex { tau: -1.0 }, 1, &c).is_err());
        assert!(schedule(EdpdRegime::WeaklyConvex { tau: 1.0 }, 1, &consts(0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn zero_operator_keeps_primal_fixed() {
        let mut problem = SaddleProblem::new(
            Box::new(ZeroFunction::new(2)),
            Box::new(BallQuadraticDual::new(2, 1.0, f64::INFINITY)),
            Arc::new(DenseMatrix::zeros(2, 2)),
        )
        .unwrap()
        .with_norm_a(1.0);
        let out = run(
            &mut problem,
            EdpdRegime::WeaklyConvex { tau: 1.0 },
            &[1.5, -0.5],
            &[0.0, 0.0],
            40,
            None,
            |_| {},
        )
        .unwrap();
        assert_eq!(out.x_last, vec![1.5, -0.5]);
        assert_eq!(out.x_agg, vec![1.5, -0.5]);
    }

    #[test]
    fn zero_extrapolation_is_plain_alternation() {
        let problem = SaddleProblem::new(
            Box::new(ZeroFunction::new(1)),
            Box::new(BallQuadraticDual::new(1, 1.0, 10.0)),
            Arc::new(IdentityOperator::new(1)),
        )
        .unwrap();
        let mut s = EdpdState::new(vec![1.0], vec![0.5]);
        let p = EdpdParams {
            alpha_next: 0.0,
            tau: 1.0,
            eta: 0.5,
        };
        s.step(&problem, &p, 1.0).unwrap();
        assert_eq!(s.yhat, s.y);
        assert_eq!(s.x, vec![0.75]);
        assert_eq!(s.y, vec![(0.5 + 0.75) / 2.0]);
    }

    #[test]
    fn single_iteration_aggregate_is_second_iterate() {
        for regime in [EdpdRegime::StronglyConvexDual, EdpdRegime::WeaklyConvex { tau: 0.7 }] {
            let mut problem = SaddleProblem::new(
                Box::new(ZeroFunction::new(1)),
                Box::new(BallQuadraticDual::new(1, 1.0, 3.0)),
                Arc::new(IdentityOperator::new(1)),
            )
            .unwrap();
            let out = run(&mut problem, regime, &[1.0], &[0.2], 1, None, |_| {}).unwrap();
            assert_eq!(out.x_agg, out.x_last);
            assert_eq!(out.y_agg, out.y_last);
        }
    }

    #[test]
    fn continuation_resets_mu_g_each_iteration() {
        let mut problem = SaddleProblem::new(
            Box::new(ZeroFunction::new(1)),
            Box::new(BallQuadraticDual::new(1, 1.0, 3.0)),
            Arc::new(IdentityOperator::new(1)),
        )
        .unwrap();
        let sched = |t: usize| 0.4 * 0.5f64.powi(((t - 1) / 2) as i32);
        let mut taus = Vec::new();
        run(
            &mut problem,
            EdpdRegime::StronglyConvexDual,
            &[1.0],
            &[0.0],
            5,
            Some(&sched),
            |s| taus.push(s.params.tau),
        )
        .unwrap();
        for (i, tau) in taus.iter().enumerate() {
            let t = i + 1;
            let expect = 2.5 / sched(t) / (t as f64 + 1.0);
            assert!((tau - expect).abs() < 1e-12 * expect);
        }
        assert_eq!(problem.g.strong_convexity(), sched(5));
    }
}

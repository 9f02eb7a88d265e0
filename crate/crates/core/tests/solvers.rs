use dpd_core::aggregate::aggregate_closed_form;
use dpd_core::diagnostics::{
    dual_distance_rate_check, fit_loglog_slope, primal_dual_gap, theoretical_bound, BOUND_SLACK,
};
use dpd_core::edpd::{self, EdpdParams, EdpdRegime, EdpdState};
use dpd_core::ldpd::{self, LdpdParams, LdpdRegime, LdpdState};
use dpd_core::model::ProblemConstants;
use dpd_core::synth::{PlantedL1Instance, PlantedL1Spec, QuadraticInstance, QuadraticSpec};
use dpd_core::vector::{dist, norm};
use dpd_core::{seeded_rng, Snapshot};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::Rng;

fn quadratic(mu_g: f64, ridge: f64) -> QuadraticInstance {
    QuadraticInstance::generate(QuadraticSpec {
        primal_dim: 20,
        dual_dim: 15,
        mu_g,
        ridge,
        seed: 42,
    })
    .unwrap()
}

fn rel_close(a: &[f64], b: &[f64], tol: f64) -> bool {
    dist(a, b) <= tol * (1.0 + norm(b))
}

/// Row-major `M v`, summed left to right.
fn matvec(m: &[f64], rows: usize, cols: usize, v: &[f64]) -> Vec<f64> {
    (0..rows)
        .map(|r| {
            let mut s = 0.0;
            for c in 0..cols {
                s += m[r * cols + c] * v[c];
            }
            s
        })
        .collect()
}

/// Row-major `Mᵀ w`, accumulated row by row.
fn matvec_t(m: &[f64], rows: usize, cols: usize, w: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; cols];
    for r in 0..rows {
        for c in 0..cols {
            out[c] += w[r] * m[r * cols + c];
        }
    }
    out
}

struct RefLdpd {
    x: Vec<f64>,
    xbar: Vec<f64>,
    y: Vec<f64>,
    yhat: Vec<f64>,
    ybar: Vec<f64>,
}

/// One LDPD iteration on `½‖Cx − d‖² + (λ/2)‖x‖²`, `(μ_g/2)‖y‖² + δ{‖y‖ ≤ R}`,
/// written out with explicit loops.
#[allow(clippy::needless_range_loop)]
fn reference_ldpd_step(inst: &QuadraticInstance, s: &mut RefLdpd, p: &LdpdParams, alpha_next: f64) {
    let (n, m) = (inst.spec.primal_dim, inst.spec.dual_dim);
    let c = inst.c.row_major();
    let a = inst.a.row_major();
    let xhat: Vec<f64> = (0..n).map(|i| (1.0 - p.theta) * s.xbar[i] + p.theta * s.x[i]).collect();
    let cx = matvec(c, n, n, &xhat);
    let resid: Vec<f64> = (0..n).map(|i| 1.0 * (cx[i] - inst.d[i])).collect();
    let mut grad = matvec_t(c, n, n, &resid);
    if inst.spec.ridge != 0.0 {
        for i in 0..n {
            grad[i] += inst.spec.ridge * xhat[i];
        }
    }
    let aty = matvec_t(a, m, n, &s.yhat);
    for i in 0..n {
        s.x[i] -= p.eta * (grad[i] + aty[i]);
        s.xbar[i] = (1.0 - p.theta) * s.xbar[i] + p.theta * s.x[i];
    }
    let ax = matvec(a, m, n, &s.x);
    let shrink = 1.0 / (1.0 + p.tau * inst.spec.mu_g);
    let mut y_new: Vec<f64> = (0..m).map(|i| (s.y[i] + p.tau * ax[i]) * shrink).collect();
    let r = norm(&y_new);
    if r > inst.radius {
        for v in &mut y_new {
            *v *= inst.radius / r;
        }
    }
    for i in 0..m {
        s.yhat[i] = y_new[i] + alpha_next * (y_new[i] - s.y[i]);
        s.ybar[i] = (1.0 - p.theta) * s.ybar[i] + p.theta * y_new[i];
    }
    s.y = y_new;
}

#[test]
fn ldpd_steps_match_straight_line_reference() {
    let inst = quadratic(1.0, 0.3);
    let problem = inst.problem().unwrap();
    let consts = problem.constants();
    let mut rng = seeded_rng(9);
    let x1: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
    let y1: Vec<f64> = (0..15).map(|_| rng.random_range(-0.5..0.5)).collect();
    for regime in [
        LdpdRegime::StronglyConvexDual,
        LdpdRegime::WeaklyConvex { horizon: 5 },
        LdpdRegime::StronglyConvexPrimal,
    ] {
        let mut state = LdpdState::new(x1.clone(), y1.clone());
        let mut reference = RefLdpd {
            x: x1.clone(),
            xbar: x1.clone(),
            y: y1.clone(),
            yhat: y1.clone(),
            ybar: y1.clone(),
        };
        for t in 1..=5 {
            let p = ldpd::schedule(regime, t, &consts).unwrap();
            let alpha_next = ldpd::schedule(regime, t + 1, &consts).unwrap().alpha;
            state.step(&problem, &p, alpha_next, 1.0).unwrap();
            reference_ldpd_step(&inst, &mut reference, &p, alpha_next);
            assert_eq!(state.x, reference.x, "{regime:?} t={t}");
            assert_eq!(state.xbar, reference.xbar);
            assert_eq!(state.y, reference.y);
            assert_eq!(state.yhat, reference.yhat);
            assert_eq!(state.ybar, reference.ybar);
        }
    }
}

#[test]
fn edpd_steps_match_straight_line_reference() {
    let inst = PlantedL1Instance::generate(PlantedL1Spec::default()).unwrap();
    let problem = inst.problem().unwrap();
    let (n, m) = (inst.spec.primal_dim, inst.spec.dual_dim);
    let a = inst.a.row_major();
    let regime = EdpdRegime::WeaklyConvex { tau: 0.4 };
    let mut state = EdpdState::new(vec![0.1; n], vec![0.0; m]);
    let (mut x, mut y, mut yhat) = (vec![0.1; n], vec![0.0; m], vec![0.0; m]);
    for t in 1..=6 {
        let p = edpd::schedule(regime, t, &problem.constants()).unwrap();
        state.step(&problem, &p, 1.0).unwrap();

        let aty = matvec_t(a, m, n, &yhat);
        for i in 0..n {
            x[i] += -p.eta * aty[i];
        }
        let ax = matvec(a, m, n, &x);
        let y_new: Vec<f64> = (0..m)
            .map(|i| ((y[i] + p.tau * ax[i] - p.tau * inst.b[i]) * 1.0).clamp(-1.0, 1.0))
            .collect();
        for i in 0..m {
            yhat[i] = y_new[i] + p.alpha_next * (y_new[i] - y[i]);
        }
        y = y_new;
        assert_eq!(state.x, x, "t={t}");
        assert_eq!(state.y, y);
        assert_eq!(state.yhat, yhat);
    }
}

#[test]
fn edpd_quadratic_step_matches_dense_solve() {
    let inst = quadratic(0.5, 0.2);
    let problem = inst.problem().unwrap();
    let params = EdpdParams {
        alpha_next: 0.7,
        tau: 0.9,
        eta: 0.35,
    };
    let x1 = vec![0.2; 20];
    let y1 = vec![-0.1; 15];
    let mut state = EdpdState::new(x1.clone(), y1.clone());
    state.step(&problem, &params, 1.0).unwrap();

    // argmin ½‖Cx−d‖² + (λ/2)‖x‖² + ⟨Ax, ŷ⟩ + ‖x − x₁‖²/(2η)
    let c = inst.c.to_nalgebra();
    let a = inst.a.to_nalgebra();
    let mut lhs = c.transpose() * &c;
    for i in 0..20 {
        lhs[(i, i)] += inst.spec.ridge + 1.0 / params.eta;
    }
    let rhs = c.transpose() * DVector::from_column_slice(&inst.d) - a.transpose() * DVector::from_column_slice(&y1)
        + DVector::from_column_slice(&x1) / params.eta;
    let x2 = lhs.lu().solve(&rhs).unwrap();
    let x2: Vec<f64> = x2.iter().copied().collect();
    assert!(rel_close(&state.x, &x2, 1e-12));

    let ax = &a * DVector::from_column_slice(&x2);
    let y2: Vec<f64> = (0..15)
        .map(|i| (y1[i] + params.tau * ax[i]) / (1.0 + params.tau * inst.spec.mu_g))
        .collect();
    assert!(rel_close(&state.y, &y2, 1e-12));
}

/// Latest iterates of every step, then the final aggregates.
type Recorded = (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>, Vec<f64>);

fn record_iterates(f: impl FnOnce(&mut dyn FnMut(&Snapshot<'_>))) -> Recorded {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut last = (Vec::new(), Vec::new());
    f(&mut |s: &Snapshot<'_>| {
        xs.push(s.x.to_vec());
        ys.push(s.y.to_vec());
        last = (s.x_agg.to_vec(), s.y_agg.to_vec());
    });
    (xs, ys, last.0, last.1)
}

#[test]
fn blended_aggregates_equal_closed_form() {
    let inst = quadratic(1.0, 0.0);
    let problem = inst.problem().unwrap();
    let k = 200;
    let weights: Vec<f64> = (1..=k).map(|t| t as f64).collect();
    for regime in [LdpdRegime::WeaklyConvex { horizon: k }, LdpdRegime::StronglyConvexDual] {
        let (xs, ys, xa, ya) = record_iterates(|obs| {
            ldpd::run(&problem, regime, &[0.0; 20], &[0.0; 15], k, obs).unwrap();
        });
        assert!(
            rel_close(&xa, &aggregate_closed_form(&xs, &weights).unwrap(), 1e-10),
            "{regime:?}"
        );
        assert!(
            rel_close(&ya, &aggregate_closed_form(&ys, &weights).unwrap(), 1e-10),
            "{regime:?}"
        );
    }
}

#[test]
fn averaged_regimes_use_their_weights() {
    let inst = quadratic(1.0, 0.5);
    let consts = inst.problem().unwrap().constants();
    let k = 60;
    let t0 = LdpdRegime::warm_start_offset(&consts);
    let cases: Vec<(LdpdRegime, Vec<f64>)> = vec![
        (
            LdpdRegime::StronglyConvexPrimal,
            (1..=k).map(|t| t as f64 + t0 + 1.0).collect(),
        ),
        (LdpdRegime::SingleStep { tau: 0.4 }, vec![1.0; k]),
    ];
    for (regime, weights) in cases {
        let problem = inst.problem().unwrap();
        let (xs, ys, xa, ya) = record_iterates(|obs| {
            ldpd::run(&problem, regime, &[0.0; 20], &[0.0; 15], k, obs).unwrap();
        });
        assert!(rel_close(&xa, &aggregate_closed_form(&xs, &weights).unwrap(), 1e-10));
        assert!(rel_close(&ya, &aggregate_closed_form(&ys, &weights).unwrap(), 1e-10));
    }
    let cases: Vec<(EdpdRegime, Vec<f64>)> = vec![
        (
            EdpdRegime::StronglyConvexPrimal,
            (1..=k).map(|t| t as f64 + 2.0).collect(),
        ),
        (
            EdpdRegime::StronglyConvexDual,
            (1..=k).map(|t| t as f64 + 1.0).collect(),
        ),
        (EdpdRegime::WeaklyConvex { tau: 0.4 }, vec![1.0; k]),
    ];
    for (regime, weights) in cases {
        let mut problem = inst.problem().unwrap();
        let (xs, ys, xa, ya) = record_iterates(|obs| {
            edpd::run(&mut problem, regime, &[0.0; 20], &[0.0; 15], k, None, obs).unwrap();
        });
        assert!(rel_close(&xa, &aggregate_closed_form(&xs, &weights).unwrap(), 1e-10));
        assert!(rel_close(&ya, &aggregate_closed_form(&ys, &weights).unwrap(), 1e-10));
    }
}

/// `L(x, y)` for the quadratic instance, evaluated with nalgebra.
fn dense_lagrangian(inst: &QuadraticInstance, x: &[f64], y: &[f64]) -> f64 {
    let c = inst.c.to_nalgebra();
    let a = inst.a.to_nalgebra();
    let xv = DVector::from_column_slice(x);
    let yv = DVector::from_column_slice(y);
    let r = &c * &xv - DVector::from_column_slice(&inst.d);
    0.5 * r.norm_squared() + 0.5 * inst.spec.ridge * xv.norm_squared() + yv.dot(&(&a * &xv))
        - 0.5 * inst.spec.mu_g * yv.norm_squared()
}

#[test]
fn gap_matches_second_implementation() {
    let inst = quadratic(1.0, 0.0);
    let problem = inst.problem().unwrap();
    let reference = inst.reference().unwrap();
    let out = ldpd::run(
        &problem,
        LdpdRegime::StronglyConvexDual,
        &[0.0; 20],
        &[0.0; 15],
        100,
        |_| {},
    )
    .unwrap();
    let gap = primal_dual_gap(&problem, &out.x_agg, &out.y_agg, &reference).unwrap();
    let second = dense_lagrangian(&inst, &out.x_agg, &inst.y_star) - dense_lagrangian(&inst, &inst.x_star, &out.y_agg);
    assert!(gap > 0.0);
    assert!((gap - second).abs() <= 1e-12 * (1.0 + second.abs()));
    let at_saddle = primal_dual_gap(&problem, &inst.x_star, &inst.y_star, &reference).unwrap();
    assert!(at_saddle.abs() < 1e-8);
}

fn check_ldpd_bounds(inst: &QuadraticInstance, regime: LdpdRegime, iters: usize) {
    let problem = inst.problem().unwrap();
    let reference = inst.reference().unwrap();
    let (x1, y1) = (vec![0.0; 20], vec![0.0; 15]);
    let (dx2, dy2) = reference.initial_distances(&x1, &y1);
    let bc = regime.bound_constants(&problem.constants());
    let mut checked = 0;
    ldpd::run(&problem, regime, &x1, &y1, iters, |s| {
        let gap = primal_dual_gap(&problem, s.x_agg, s.y_agg, &reference).unwrap();
        assert!(gap >= -1e-10, "{regime:?} k={} gap={gap}", s.t);
        assert!(problem.g.value(s.y_agg).is_finite());
        if matches!(regime, LdpdRegime::WeaklyConvex { .. }) && s.t != iters {
            return;
        }
        let bound = theoretical_bound(regime.bound_regime(), s.t, &bc, dx2, dy2).unwrap();
        assert!(
            gap <= bound + BOUND_SLACK,
            "{regime:?} k={} gap={gap} bound={bound}",
            s.t
        );
        checked += 1;
    })
    .unwrap();
    assert!(checked > 0);
}

#[test]
fn ldpd_gaps_stay_below_bounds() {
    let plain = quadratic(1.0, 0.0);
    let ridged = quadratic(1.0, 0.5);
    check_ldpd_bounds(&plain, LdpdRegime::WeaklyConvex { horizon: 300 }, 300);
    check_ldpd_bounds(&plain, LdpdRegime::StronglyConvexDual, 300);
    check_ldpd_bounds(&plain, LdpdRegime::SingleStep { tau: 0.5 }, 300);
    check_ldpd_bounds(&ridged, LdpdRegime::StronglyConvexPrimal, 300);
}

#[test]
fn edpd_gaps_stay_below_bounds() {
    let inst = quadratic(1.0, 0.5);
    let reference = inst.reference().unwrap();
    let (x1, y1) = (vec![0.0; 20], vec![0.0; 15]);
    let (dx2, dy2) = reference.initial_distances(&x1, &y1);
    for regime in [
        EdpdRegime::StronglyConvexPrimal,
        EdpdRegime::StronglyConvexDual,
        EdpdRegime::WeaklyConvex { tau: 0.5 },
    ] {
        let mut problem = inst.problem().unwrap();
        let bc = regime.bound_constants(&problem.constants());
        let judge = inst.problem().unwrap();
        edpd::run(&mut problem, regime, &x1, &y1, 300, None, |s| {
            let gap = primal_dual_gap(&judge, s.x_agg, s.y_agg, &reference).unwrap();
            let bound = theoretical_bound(regime.bound_regime(), s.t, &bc, dx2, dy2).unwrap();
            assert!(
                gap >= -1e-10 && gap <= bound + BOUND_SLACK,
                "{regime:?} k={} {gap} {bound}",
                s.t
            );
        })
        .unwrap();
    }
}

#[test]
fn dual_distance_follows_gap_bound() {
    let inst = quadratic(1.0, 0.0);
    let problem = inst.problem().unwrap();
    let reference = inst.reference().unwrap();
    let (x1, y1) = (vec![0.0; 20], vec![0.0; 15]);
    let (dx2, dy2) = reference.initial_distances(&x1, &y1);
    let regime = LdpdRegime::StronglyConvexDual;
    let mut hist = Vec::new();
    ldpd::run(&problem, regime, &x1, &y1, 300, |s| {
        hist.push((s.t, dist(s.y_agg, &inst.y_star)))
    })
    .unwrap();
    let bc = regime.bound_constants(&problem.constants());
    assert!(dual_distance_rate_check(&hist, &bc, dx2, dy2).unwrap().passed);

    let mut from_saddle = Vec::new();
    ldpd::run(&problem, regime, &inst.x_star, &inst.y_star, 50, |s| {
        from_saddle.push((s.t, dist(s.y_agg, &inst.y_star)))
    })
    .unwrap();
    assert!(from_saddle.iter().all(|(_, d)| *d < 1e-8));
}

#[test]
fn planted_l1_edpd_gap_decays_like_one_over_k() {
    let inst = PlantedL1Instance::generate(PlantedL1Spec::default()).unwrap();
    let mut problem = inst.problem().unwrap();
    let judge = inst.problem().unwrap();
    let reference = inst.reference().unwrap();
    let tau = 1.0 / problem.norm_a;
    let mut gaps = Vec::new();
    edpd::run(
        &mut problem,
        EdpdRegime::WeaklyConvex { tau },
        &[0.0; 10],
        &[0.0; 30],
        300,
        None,
        |s| gaps.push((s.t, primal_dual_gap(&judge, s.x_agg, s.y_agg, &reference).unwrap())),
    )
    .unwrap();
    let fit = fit_loglog_slope(&gaps, 50).unwrap();
    assert!((fit.slope + 1.0).abs() < 0.1, "{fit:?}");
}

#[test]
fn runs_are_bit_reproducible() {
    let inst = quadratic(0.7, 0.0);
    let problem = inst.problem().unwrap();
    let a = ldpd::run(
        &problem,
        LdpdRegime::StronglyConvexDual,
        &[0.0; 20],
        &[0.0; 15],
        50,
        |_| {},
    )
    .unwrap();
    let b = ldpd::run(
        &problem,
        LdpdRegime::StronglyConvexDual,
        &[0.0; 20],
        &[0.0; 15],
        50,
        |_| {},
    )
    .unwrap();
    assert_eq!(a.x_agg, b.x_agg);
    assert_eq!(a.y_last, b.y_last);
}

fn consts_strategy() -> impl Strategy<Value = ProblemConstants> {
    (0.0f64..1e3, 1e-3f64..10.0, 1e-3f64..10.0, 1e-2f64..10.0).prop_map(|(l, mu_f, mu_g, a)| ProblemConstants {
        lipschitz_f: l + mu_f,
        mu_f,
        mu_g,
        norm_a: a,
    })
}

const LONG_HORIZON: usize = 10_000;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn blended_schedules_are_admissible(c in consts_strategy()) {
        let a2 = c.norm_a * c.norm_a;
        for regime in [LdpdRegime::WeaklyConvex { horizon: LONG_HORIZON }, LdpdRegime::StronglyConvexDual] {
            let mut prev = ldpd::schedule(regime, 1, &c).unwrap();
            for t in 1..LONG_HORIZON {
                let next = ldpd::schedule(regime, t + 1, &c).unwrap();
                let tf = t as f64;
                prop_assert!(prev.theta > 0.0 && prev.theta <= 1.0);
                prop_assert!((tf + 1.0) * next.tau >= tf * prev.tau * (1.0 - 1e-12));
                let need = 2.0 * c.lipschitz_f / (tf + 1.0) + a2 * prev.tau;
                prop_assert!(1.0 / prev.eta >= need * (1.0 - 1e-12), "{regime:?} t={t}");
                prev = next;
            }
        }
    }

    #[test]
    fn dual_strong_convexity_conditions(c in consts_strategy()) {
        let tau3 = 3.0 / c.mu_g;
        let tau25 = 2.5 / c.mu_g;
        for t in 1..LONG_HORIZON {
            let tf = t as f64;
            prop_assert!(tf * tf / tau3 + tf * c.mu_g >= (tf + 1.0).powi(2) / tau3 * (1.0 - 1e-12));
            prop_assert!((tf + 1.0).powi(2) / tau25 + (tf + 1.0) * c.mu_g >= (tf + 2.0).powi(2) / tau25 * (1.0 - 1e-12));
        }
        prop_assert_eq!(LdpdRegime::StronglyConvexDual.base_tau(&c), tau3);
        prop_assert_eq!(EdpdRegime::StronglyConvexDual.base_tau(&c), tau25);
    }

    #[test]
    fn primal_strong_convexity_conditions(c in consts_strategy()) {
        let a2 = c.norm_a * c.norm_a;
        let tau = LdpdRegime::StronglyConvexPrimal.base_tau(&c);
        let t0 = LdpdRegime::warm_start_offset(&c);
        prop_assert!(2.0 * tau * a2 - c.mu_f <= 1e-12 * c.mu_f);
        prop_assert!(t0 >= 2.0 * (c.lipschitz_f - c.mu_f) / c.mu_f);
        for t in 1..200 {
            let p = ldpd::schedule(LdpdRegime::StronglyConvexPrimal, t, &c).unwrap();
            prop_assert_eq!(p.theta, 1.0);
            prop_assert!((1.0 / p.eta - c.lipschitz_f - p.tau * a2).abs() <= 1e-9 / p.eta);
        }
        let etau = EdpdRegime::StronglyConvexPrimal.base_tau(&c);
        prop_assert!(c.mu_f / 2.0 >= etau * a2 * (1.0 - 1e-12));
    }
}

//! Experiment drivers shared by the `dpd` binary and the acceptance suite.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::str::FromStr;
use std::time::Instant;

use dpd_core::diagnostics::{fit_loglog_slope, primal_dual_gap, snr_db, theoretical_bound, HistoryRecord, BOUND_SLACK};
use dpd_core::edpd::{self, EdpdRegime};
use dpd_core::imaging::{
    add_gaussian_noise, add_salt_pepper, blur, build_gaussian_problem, build_saltpepper_problem, continuation_mu_g,
    GaussianDeblurSpec, ImageGrid, SaltPepperDeblurSpec,
};
use dpd_core::ldpd::{self, LdpdRegime};
use dpd_core::linops::{make_average_kernel, make_motion_kernel, Kernel2D};
use dpd_core::synth::{PlantedL1Instance, PlantedL1Spec, QuadraticInstance, QuadraticSpec};
use dpd_core::vector::dist;
use dpd_core::{SaddleProblem, Snapshot, SolveOutcome};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Ldpd,
    Edpd,
}

impl FromStr for Solver {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "ldpd" => Ok(Self::Ldpd),
            "edpd" => Ok(Self::Edpd),
            other => Err(CliError::Config(format!(
                "unknown solver '{other}' (expected ldpd or edpd)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolverRegime {
    Ldpd(LdpdRegime),
    Edpd(EdpdRegime),
}

impl SolverRegime {
    /// Resolves a regime tag. `tau` defaults to `1/‖A‖` where the regime
    /// takes a fixed dual step; the weakly convex LDPD horizon is `iters`.
    pub fn resolve(solver: Solver, tag: &str, iters: usize, tau: Option<f64>, norm_a: f64) -> CliResult<Self> {
        let tau = tau.unwrap_or(1.0 / norm_a);
        let r = match (solver, tag) {
            (Solver::Ldpd, "weakly-convex") => Self::Ldpd(LdpdRegime::WeaklyConvex { horizon: iters }),
            (Solver::Ldpd, "strongly-convex-dual") => Self::Ldpd(LdpdRegime::StronglyConvexDual),
            (Solver::Ldpd, "strongly-convex-primal") => Self::Ldpd(LdpdRegime::StronglyConvexPrimal),
            (Solver::Ldpd, "single-step") => Self::Ldpd(LdpdRegime::SingleStep { tau }),
            (Solver::Edpd, "weakly-convex") => Self::Edpd(EdpdRegime::WeaklyConvex { tau }),
            (Solver::Edpd, "strongly-convex-dual") => Self::Edpd(EdpdRegime::StronglyConvexDual),
            (Solver::Edpd, "strongly-convex-primal") => Self::Edpd(EdpdRegime::StronglyConvexPrimal),
            (s, t) => return Err(CliError::Config(format!("regime '{t}' is not available for {s:?}"))),
        };
        Ok(r)
    }

    pub fn label(&self) -> String {
        match self {
            Self::Ldpd(r) => format!("ldpd-{}", r.name()),
            Self::Edpd(r) => format!("edpd-{}", r.name()),
        }
    }
}

/// Runs either solver from `(x1, y1)`.
pub fn solve<O>(
    problem: &mut SaddleProblem,
    regime: SolverRegime,
    x1: &[f64],
    y1: &[f64],
    iters: usize,
    mu_g_schedule: Option<&dyn Fn(usize) -> f64>,
    observer: O,
) -> CliResult<SolveOutcome>
where
    O: FnMut(&Snapshot<'_>),
{
    let out = match regime {
        SolverRegime::Ldpd(r) => {
            if mu_g_schedule.is_some() {
                return Err(CliError::Config("mu_g continuation is only available with edpd".into()));
            }
            ldpd::run(problem, r, x1, y1, iters, observer)?
        }
        SolverRegime::Edpd(r) => edpd::run(problem, r, x1, y1, iters, mu_g_schedule, observer)?,
    };
    Ok(out)
}

/// `motion:LEN,ANGLE`, `average:SIZE` or `identity`.
pub fn parse_kernel(spec: &str) -> CliResult<Kernel2D> {
    let bad = || {
        CliError::Config(format!(
            "bad kernel '{spec}' (use motion:LEN,ANGLE, average:SIZE or identity)"
        ))
    };
    let (kind, args) = spec.split_once(':').unwrap_or((spec, ""));
    let kernel = match kind {
        "identity" if args.is_empty() => Kernel2D::identity(),
        "average" => make_average_kernel(args.parse().map_err(|_| bad())?)?,
        "motion" => {
            let (len, angle) = args.split_once(',').ok_or_else(bad)?;
            make_motion_kernel(
                len.trim().parse().map_err(|_| bad())?,
                angle.trim().parse().map_err(|_| bad())?,
            )?
        }
        _ => return Err(bad()),
    };
    Ok(kernel)
}

pub fn degrade_gaussian(truth: &ImageGrid, kernel: &Kernel2D, sigma: f64, seed: u64) -> CliResult<ImageGrid> {
    Ok(add_gaussian_noise(&blur(truth, kernel)?, sigma, seed)?)
}

pub fn degrade_salt_pepper(truth: &ImageGrid, kernel: &Kernel2D, fraction: f64, seed: u64) -> CliResult<ImageGrid> {
    Ok(add_salt_pepper(&blur(truth, kernel)?, fraction, seed)?)
}

#[derive(Debug, Clone)]
pub struct ImageRun {
    pub recovered: ImageGrid,
    pub history: Vec<HistoryRecord>,
    pub regime: String,
    pub norm_a: f64,
    pub lipschitz_f: f64,
    /// `μ_g` in force at each iteration.
    pub mu_g_trace: Vec<f64>,
    pub final_snr_db: Option<f64>,
}

fn image_observer<'a>(
    truth: Option<&'a ImageGrid>,
    timing: bool,
    sink: &'a mut Vec<HistoryRecord>,
) -> impl FnMut(&Snapshot<'_>) + 'a {
    let start = Instant::now();
    move |s: &Snapshot<'_>| {
        let snr = truth.map(|t| snr_db(s.x_agg, t.data()).unwrap_or(f64::NAN));
        sink.push(HistoryRecord {
            t: s.t,
            gap: None,
            bound: None,
            snr_db: snr,
            dist_dual: None,
            params: s.params,
            wall_ms: timing.then(|| start.elapsed().as_secs_f64() * 1e3),
        });
    }
}

fn finish_image_run(
    observed: &ImageGrid,
    truth: Option<&ImageGrid>,
    outcome: SolveOutcome,
    history: Vec<HistoryRecord>,
    regime: SolverRegime,
    problem: &SaddleProblem,
    mu_g_trace: Vec<f64>,
) -> CliResult<ImageRun> {
    let recovered = observed.with_data(outcome.x_agg)?;
    let final_snr_db = match truth {
        Some(t) => Some(snr_db(recovered.data(), t.data())?),
        None => None,
    };
    Ok(ImageRun {
        recovered,
        history,
        regime: regime.label(),
        norm_a: problem.norm_a,
        lipschitz_f: problem.f.lipschitz(),
        mu_g_trace,
        final_snr_db,
    })
}

#[derive(Debug, Clone)]
pub struct GaussConfig {
    pub truth: Option<ImageGrid>,
    pub observed: ImageGrid,
    pub kernel: Kernel2D,
    pub mu: f64,
    pub mu_g: f64,
    pub iters: usize,
    pub solver: Solver,
    pub regime: String,
    pub tau: Option<f64>,
    pub timing: bool,
}

/// Recovers an image blurred with Gaussian noise from `x₁ = 0`, `y₁ = 0`.
pub fn run_gauss(cfg: &GaussConfig) -> CliResult<ImageRun> {
    check_shapes(cfg.truth.as_ref(), &cfg.observed)?;
    let mut problem = build_gaussian_problem(&GaussianDeblurSpec {
        observed: cfg.observed.clone(),
        kernel: cfg.kernel.clone(),
        mu: cfg.mu,
        mu_g: cfg.mu_g,
    })?;
    let regime = SolverRegime::resolve(cfg.solver, &cfg.regime, cfg.iters, cfg.tau, problem.norm_a)?;
    let (x1, y1) = (vec![0.0; problem.primal_dim()], vec![0.0; problem.dual_dim()]);
    let mut history = Vec::with_capacity(cfg.iters);
    let obs = image_observer(cfg.truth.as_ref(), cfg.timing, &mut history);
    let outcome = solve(&mut problem, regime, &x1, &y1, cfg.iters, None, obs)?;
    finish_image_run(
        &cfg.observed,
        cfg.truth.as_ref(),
        outcome,
        history,
        regime,
        &problem,
        vec![cfg.mu_g; cfg.iters],
    )
}

#[derive(Debug, Clone)]
pub struct SaltPepperConfig {
    pub truth: Option<ImageGrid>,
    pub observed: ImageGrid,
    pub kernel: Kernel2D,
    pub alpha: f64,
    pub mu_g0: f64,
    pub halve_every: usize,
    pub iters: usize,
    /// `auto` picks strongly-convex-dual when `mu_g0 > 0`, else weakly-convex.
    pub regime: String,
    pub tau: Option<f64>,
    pub timing: bool,
}

/// Recovers an image blurred with salt-and-pepper noise using EDPD, with
/// `μ_g` halved every `halve_every` iterations when both are positive.
pub fn run_salt_pepper(cfg: &SaltPepperConfig) -> CliResult<ImageRun> {
    check_shapes(cfg.truth.as_ref(), &cfg.observed)?;
    let mut problem = build_saltpepper_problem(&SaltPepperDeblurSpec {
        observed: cfg.observed.clone(),
        kernel: cfg.kernel.clone(),
        alpha: cfg.alpha,
        mu_g0: cfg.mu_g0,
        halve_every: cfg.halve_every,
    })?;
    let tag = match cfg.regime.as_str() {
        "auto" if cfg.mu_g0 > 0.0 => "strongly-convex-dual",
        "auto" => "weakly-convex",
        other => other,
    };
    let regime = SolverRegime::resolve(Solver::Edpd, tag, cfg.iters, cfg.tau, problem.norm_a)?;
    let (mu_g0, every) = (cfg.mu_g0, cfg.halve_every);
    let schedule = move |t: usize| continuation_mu_g(t, mu_g0, every);
    let continuation = every > 0 && mu_g0 > 0.0;
    let mu_g_trace = (1..=cfg.iters)
        .map(|t| if continuation { schedule(t) } else { mu_g0 })
        .collect();
    let (x1, y1) = (vec![0.0; problem.primal_dim()], vec![0.0; problem.dual_dim()]);
    let mut history = Vec::with_capacity(cfg.iters);
    let obs = image_observer(cfg.truth.as_ref(), cfg.timing, &mut history);
    let sched: Option<&dyn Fn(usize) -> f64> = if continuation { Some(&schedule) } else { None };
    let outcome = solve(&mut problem, regime, &x1, &y1, cfg.iters, sched, obs)?;
    finish_image_run(
        &cfg.observed,
        cfg.truth.as_ref(),
        outcome,
        history,
        regime,
        &problem,
        mu_g_trace,
    )
}

fn check_shapes(truth: Option<&ImageGrid>, observed: &ImageGrid) -> CliResult<()> {
    if let Some(t) = truth {
        if (t.rows(), t.cols()) != (observed.rows(), observed.cols()) {
            return Err(CliError::Config(format!(
                "clean image is {}x{} but degraded image is {}x{}",
                t.rows(),
                t.cols(),
                observed.rows(),
                observed.cols()
            )));
        }
    }
    Ok(())
}

/// First iteration whose SNR reaches `final − margin_db`.
pub fn threshold_hit(history: &[HistoryRecord], margin_db: f64) -> Option<usize> {
    let last = history.last()?.snr_db?;
    history
        .iter()
        .find(|r| r.snr_db.is_some_and(|s| s >= last - margin_db))
        .map(|r| r.t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub primal_dim: usize,
    pub dual_dim: usize,
    pub mu_g: f64,
    /// Ridge `λ` added to `f` for the regimes that need `μ_f > 0`.
    pub ridge: f64,
    pub seed: u64,
    pub iters: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            primal_dim: 20,
            dual_dim: 15,
            mu_g: 1.0,
            ridge: 0.5,
            seed: 42,
            iters: 500,
        }
    }
}

/// Tag of the weakly convex EDPD run on the planted `ℓ₁` instance.
pub const PLANTED_TAG: &str = "planted-l1-edpd-weakly-convex";

#[derive(Debug, Clone)]
pub struct BenchRun {
    pub tag: String,
    pub history: Vec<HistoryRecord>,
    /// First `(k, gap, bound)` with `gap > bound + BOUND_SLACK`.
    pub violation: Option<(usize, f64, f64)>,
}

impl BenchRun {
    pub fn gap_series(&self) -> Vec<(usize, f64)> {
        self.history.iter().filter_map(|r| r.gap.map(|g| (r.t, g))).collect()
    }
}

fn tracked_run(
    tag: String,
    mut problem: SaddleProblem,
    judge: &SaddleProblem,
    regime: SolverRegime,
    reference: &dpd_core::GapReference,
    iters: usize,
) -> CliResult<BenchRun> {
    let (x1, y1) = (vec![0.0; problem.primal_dim()], vec![0.0; problem.dual_dim()]);
    let (dx2, dy2) = reference.initial_distances(&x1, &y1);
    let consts = problem.constants();
    let (bound_regime, bc) = match regime {
        SolverRegime::Ldpd(r) => (r.bound_regime(), r.bound_constants(&consts)),
        SolverRegime::Edpd(r) => (r.bound_regime(), r.bound_constants(&consts)),
    };
    let only_final = matches!(regime, SolverRegime::Ldpd(LdpdRegime::WeaklyConvex { .. }));
    let mut history = Vec::with_capacity(iters);
    let mut violation = None;
    let mut failure = None;
    solve(&mut problem, regime, &x1, &y1, iters, None, |s| {
        let gap = match primal_dual_gap(judge, s.x_agg, s.y_agg, reference) {
            Ok(g) => g,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        };
        let bound = if only_final && s.t != iters {
            None
        } else {
            match theoretical_bound(bound_regime, s.t, &bc, dx2, dy2) {
                Ok(b) => Some(b),
                Err(e) => {
                    failure.get_or_insert(e);
                    None
                }
            }
        };
        if let Some(b) = bound {
            if violation.is_none() && !(gap <= b + BOUND_SLACK) {
                violation = Some((s.t, gap, b));
            }
        }
        history.push(HistoryRecord {
            t: s.t,
            gap: Some(gap),
            bound,
            snr_db: None,
            dist_dual: Some(dist(s.y_agg, &reference.y_ref)),
            params: s.params,
            wall_ms: None,
        });
    })?;
    if let Some(e) = failure {
        return Err(e.into());
    }
    Ok(BenchRun {
        tag,
        history,
        violation,
    })
}

/// Runs every regime on seeded quadratic instances with a certified saddle
/// (`λ = 0` unless the regime needs `μ_f > 0`), plus weakly convex EDPD on
/// the planted `ℓ₁` instance.
pub fn synth_bench(cfg: &SynthConfig) -> CliResult<Vec<BenchRun>> {
    if cfg.iters == 0 {
        return Err(CliError::Config("iters must be >= 1".into()));
    }
    let plain = QuadraticInstance::generate(QuadraticSpec {
        primal_dim: cfg.primal_dim,
        dual_dim: cfg.dual_dim,
        mu_g: cfg.mu_g,
        ridge: 0.0,
        seed: cfg.seed,
    })?;
    let ridged = QuadraticInstance::generate(QuadraticSpec {
        ridge: cfg.ridge,
        ..plain.spec
    })?;
    let k = cfg.iters;
    let regimes = [
        (SolverRegime::Ldpd(LdpdRegime::WeaklyConvex { horizon: k }), false),
        (SolverRegime::Ldpd(LdpdRegime::StronglyConvexDual), false),
        (SolverRegime::Ldpd(LdpdRegime::StronglyConvexPrimal), true),
        (SolverRegime::Ldpd(LdpdRegime::SingleStep { tau: f64::NAN }), false),
        (SolverRegime::Edpd(EdpdRegime::StronglyConvexPrimal), true),
        (SolverRegime::Edpd(EdpdRegime::StronglyConvexDual), false),
        (SolverRegime::Edpd(EdpdRegime::WeaklyConvex { tau: f64::NAN }), false),
    ];
    let mut runs = Vec::new();
    for (regime, needs_ridge) in regimes {
        let inst = if needs_ridge { &ridged } else { &plain };
        let problem = inst.problem()?;
        let unit = 1.0 / problem.norm_a;
        let regime = match regime {
            SolverRegime::Ldpd(LdpdRegime::SingleStep { .. }) => {
                SolverRegime::Ldpd(LdpdRegime::SingleStep { tau: unit })
            }
            SolverRegime::Edpd(EdpdRegime::WeaklyConvex { .. }) => {
                SolverRegime::Edpd(EdpdRegime::WeaklyConvex { tau: unit })
            }
            r => r,
        };
        let judge = inst.problem()?;
        runs.push(tracked_run(
            regime.label(),
            problem,
            &judge,
            regime,
            &inst.reference()?,
            k,
        )?);
    }

    let planted = PlantedL1Instance::generate(PlantedL1Spec::default())?;
    let problem = planted.problem()?;
    let regime = SolverRegime::Edpd(EdpdRegime::WeaklyConvex {
        tau: 1.0 / problem.norm_a,
    });
    let judge = planted.problem()?;
    runs.push(tracked_run(
        PLANTED_TAG.into(),
        problem,
        &judge,
        regime,
        &planted.reference()?,
        k,
    )?);
    Ok(runs)
}

/// Smallest `k` used in slope fits.
pub const RATE_K_MIN: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub tag: String,
    pub slope: f64,
    pub points_used: usize,
    /// Accepted slope range, when the tag is checked.
    pub required: Option<(f64, f64)>,
    pub passed: bool,
}

/// Slope requirements: `O(1/k²)` for the strongly convex dual regimes and
/// `O(1/k)` for weakly convex EDPD.
pub fn rate_requirement(tag: &str) -> Option<(f64, f64)> {
    match tag {
        "ldpd-strongly-convex-dual" | "edpd-strongly-convex-dual" => Some((f64::NEG_INFINITY, -1.8)),
        PLANTED_TAG => Some((-1.3, -0.7)),
        _ => None,
    }
}

/// Named `(k, gap)` series.
pub type GapSeries = Vec<(String, Vec<(usize, f64)>)>;

pub fn rate_table(series: &[(String, Vec<(usize, f64)>)]) -> CliResult<Vec<RateRow>> {
    let mut rows = Vec::new();
    for (tag, points) in series {
        let fit = fit_loglog_slope(points, RATE_K_MIN).map_err(|e| CliError::RateCheck(format!("{tag}: {e}")))?;
        let required = rate_requirement(tag);
        let passed = required.is_none_or(|(lo, hi)| fit.slope >= lo && fit.slope <= hi);
        rows.push(RateRow {
            tag: tag.clone(),
            slope: fit.slope,
            points_used: fit.points_used,
            required,
            passed,
        });
    }
    for tag in ["ldpd-strongly-convex-dual", "edpd-strongly-convex-dual", PLANTED_TAG] {
        if !rows.iter().any(|r| r.tag == tag) {
            return Err(CliError::RateCheck(format!(
                "insufficient history: no series for {tag}"
            )));
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_specs_parse() {
        assert_eq!(parse_kernel("identity").unwrap(), Kernel2D::identity());
        assert_eq!(parse_kernel("average:5").unwrap().height(), 5);
        assert!((parse_kernel("motion:7,135").unwrap().sum() - 1.0).abs() < 1e-14);
        for bad in ["motion:7", "average:x", "gauss:3", "identity:2", ""] {
            assert!(matches!(parse_kernel(bad), Err(CliError::Config(_))), "{bad}");
        }
    }

    #[test]
    fn regimes_resolve_per_solver() {
        let r = SolverRegime::resolve(Solver::Ldpd, "weakly-convex", 30, None, 2.0).unwrap();
        assert_eq!(r, SolverRegime::Ldpd(LdpdRegime::WeaklyConvex { horizon: 30 }));
        let r = SolverRegime::resolve(Solver::Edpd, "weakly-convex", 30, None, 2.0).unwrap();
        assert_eq!(r, SolverRegime::Edpd(EdpdRegime::WeaklyConvex { tau: 0.5 }));
        assert!(SolverRegime::resolve(Solver::Edpd, "single-step", 30, None, 2.0).is_err());
        assert_eq!(r.label(), "edpd-weakly-convex");
    }

    #[test]
    fn synthetic_power_laws_give_their_slopes() {
        let quad: Vec<(usize, f64)> = (1..=500).map(|k| (k, 3.0 / (k * k) as f64)).collect();
        let lin: Vec<(usize, f64)> = (1..=500).map(|k| (k, 2.0 / k as f64)).collect();
        let rows = rate_table(&[
            ("ldpd-strongly-convex-dual".into(), quad.clone()),
            ("edpd-strongly-convex-dual".into(), quad),
            (PLANTED_TAG.into(), lin),
        ])
        .unwrap();
        assert!((rows[0].slope + 2.0).abs() < 1e-9);
        assert!((rows[2].slope + 1.0).abs() < 1e-9);
        assert!(rows.iter().all(|r| r.passed));
        assert!(matches!(rate_table(&rows_missing()), Err(CliError::RateCheck(_))));
    }

    fn rows_missing() -> GapSeries {
        vec![(
            "ldpd-strongly-convex-dual".into(),
            (1..=100).map(|k| (k, 1.0 / k as f64)).collect(),
        )]
    }

    #[test]
    fn threshold_hit_finds_first_crossing() {
        let rec = |t, s| HistoryRecord {
            t,
            gap: None,
            bound: None,
            snr_db: Some(s),
            dist_dual: None,
            params: dpd_core::StepParams {
                theta: None,
                alpha: 1.0,
                tau: 1.0,
                eta: 1.0,
            },
            wall_ms: None,
        };
        let h = vec![rec(1, 1.0), rec(2, 9.6), rec(3, 9.0), rec(4, 10.0)];
        assert_eq!(threshold_hit(&h, 0.5), Some(2));
        assert_eq!(threshold_hit(&[], 0.5), None);
    }
}

//! Gap evaluation, the non-asymptotic gap bounds of every schedule, rate
//! fitting, SNR and the CSV history format.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use crate::error::{check_len, DpdError, Result};
use crate::model::{lagrangian, SaddleProblem};
use crate::vector;

/// Absolute slack allowed when comparing a measured gap against a bound.
pub const BOUND_SLACK: f64 = 1e-9;

/// The fixed pair `(x, y)` at which the gap function is evaluated.
#[derive(Debug, Clone)]
pub struct GapReference {
    pub x_ref: Vec<f64>,
    pub y_ref: Vec<f64>,
}

impl GapReference {
    pub fn new(problem: &SaddleProblem, x_ref: Vec<f64>, y_ref: Vec<f64>) -> Result<Self> {
        problem.check_point(&x_ref, &y_ref)?;
        if !problem.g.value(&y_ref).is_finite() {
            return Err(DpdError::InvalidInput("reference dual point lies outside dom g".into()));
        }
        Ok(Self { x_ref, y_ref })
    }

    /// `(‖x_ref − x₁‖², ‖y_ref − y₁‖²)`.
    pub fn initial_distances(&self, x1: &[f64], y1: &[f64]) -> (f64, f64) {
        (vector::dist_sq(&self.x_ref, x1), vector::dist_sq(&self.y_ref, y1))
    }
}

/// `L(x̄, y_ref) − L(x_ref, ȳ)`. Returns `+∞` when `ȳ` is outside `dom g`.
pub fn primal_dual_gap(problem: &SaddleProblem, x_bar: &[f64], y_bar: &[f64], reference: &GapReference) -> Result<f64> {
    let upper = lagrangian(problem, x_bar, &reference.y_ref)?;
    let lower = lagrangian(problem, &reference.x_ref, y_bar)?;
    Ok(upper - lower)
}

/// Which gap bound to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundRegime {
    LdpdWeaklyConvex,
    LdpdStronglyConvexDual,
    LdpdStronglyConvexPrimal,
    LdpdSingleStep,
    EdpdStronglyConvexPrimal,
    EdpdStronglyConvexDual,
    EdpdWeaklyConvex,
}

impl BoundRegime {
    pub const ALL: [BoundRegime; 7] = [
        Self::LdpdWeaklyConvex,
        Self::LdpdStronglyConvexDual,
        Self::LdpdStronglyConvexPrimal,
        Self::LdpdSingleStep,
        Self::EdpdStronglyConvexPrimal,
        Self::EdpdStronglyConvexDual,
        Self::EdpdWeaklyConvex,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            Self::LdpdWeaklyConvex => "ldpd-weakly-convex",
            Self::LdpdStronglyConvexDual => "ldpd-strongly-convex-dual",
            Self::LdpdStronglyConvexPrimal => "ldpd-strongly-convex-primal",
            Self::LdpdSingleStep => "ldpd-single-step",
            Self::EdpdStronglyConvexPrimal => "edpd-strongly-convex-primal",
            Self::EdpdStronglyConvexDual => "edpd-strongly-convex-dual",
            Self::EdpdWeaklyConvex => "edpd-weakly-convex",
        }
    }
}

impl fmt::Display for BoundRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for BoundRegime {
    type Err = DpdError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|r| r.tag() == s)
            .ok_or_else(|| DpdError::Config(format!("unknown regime tag '{s}'")))
    }
}

/// Constants entering the bounds. `tau` is the regime's base dual step,
/// `t0` the warm-start offset of the strongly convex primal LDPD schedule
/// and `horizon` the `N` of the weakly convex LDPD schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants {
    pub lipschitz_f: f64,
    pub mu_f: f64,
    pub mu_g: f64,
    pub norm_a: f64,
    pub tau: f64,
    pub t0: f64,
    pub horizon: usize,
}

/// Upper bound on the gap of the regime's aggregate after `k` iterations,
/// for a reference at squared distances `dx2`, `dy2` from the start.
pub fn theoretical_bound(regime: BoundRegime, k: usize, c: &BoundConstants, dx2: f64, dy2: f64) -> Result<f64> {
    if k == 0 {
        return Err(DpdError::Config("bounds are stated for k >= 1".into()));
    }
    let kf = k as f64;
    let a2 = c.norm_a * c.norm_a;
    let l = c.lipschitz_f;
    let tau = c.tau;
    let needs_tau = !matches!(regime, BoundRegime::LdpdWeaklyConvex);
    if needs_tau && !(tau > 0.0 && tau.is_finite()) {
        return Err(DpdError::Config(format!("{regime}: tau must be positive, got {tau}")));
    }
    let value = match regime {
        BoundRegime::LdpdWeaklyConvex => {
            if k != c.horizon {
                return Err(DpdError::Config(format!(
                    "{regime}: bound holds only at k = N = {}, got k = {k}",
                    c.horizon
                )));
            }
            2.0 * l / (kf * (kf + 1.0)) * dx2 + (a2 * dx2 + dy2) / (kf + 1.0)
        }
        BoundRegime::LdpdStronglyConvexDual => {
            let d = kf * (kf + 1.0);
            (2.0 * l + tau * a2) * dx2 / d + dy2 / (d * tau)
        }
        BoundRegime::LdpdStronglyConvexPrimal => {
            let t0 = c.t0;
            (t0 + 2.0) / (kf * (kf + 3.0 + 2.0 * t0)) * (dx2 * (l - c.mu_f + 2.0 * tau * a2) + dy2 / (2.0 * tau))
        }
        BoundRegime::LdpdSingleStep => (l + tau * a2) * dx2 / (2.0 * kf) + dy2 / (2.0 * kf * tau),
        BoundRegime::EdpdStronglyConvexPrimal => (6.0 * tau * a2 * dx2 + 1.5 / tau * dy2) / (kf * (kf + 5.0)),
        BoundRegime::EdpdStronglyConvexDual => 2.0 / (kf * (kf + 3.0)) * (a2 * tau * dx2 / 2.0 + 2.0 * dy2 / tau),
        BoundRegime::EdpdWeaklyConvex => (dx2 * a2 * tau + dy2 / tau) / (2.0 * kf),
    };
    Ok(value)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateCheck {
    pub passed: bool,
    pub first_violation: Option<usize>,
}

/// Checks `(μ_g/2)‖ȳ_k − y*‖² ≤ bound(k)` for every `(k, ‖ȳ_k − y*‖)` in
/// `history`, using the strongly convex dual LDPD bound.
pub fn dual_distance_rate_check(history: &[(usize, f64)], c: &BoundConstants, dx2: f64, dy2: f64) -> Result<RateCheck> {
    for &(k, dist) in history {
        let bound = theoretical_bound(BoundRegime::LdpdStronglyConvexDual, k, c, dx2, dy2)?;
        if 0.5 * c.mu_g * dist * dist > bound + BOUND_SLACK {
            return Ok(RateCheck {
                passed: false,
                first_violation: Some(k),
            });
        }
    }
    Ok(RateCheck {
        passed: true,
        first_violation: None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub points_used: usize,
    /// `k` values skipped because their value was not positive and finite.
    pub rejected: Vec<usize>,
}

/// Least-squares slope of `log(value)` against `log(k)` over points with
/// `k ≥ k_min`.
pub fn fit_loglog_slope(points: &[(usize, f64)], k_min: usize) -> Result<SlopeFit> {
    let mut rejected = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &(k, v) in points.iter().filter(|(k, _)| *k >= k_min.max(1)) {
        if v > 0.0 && v.is_finite() {
            xs.push((k as f64).ln());
            ys.push(v.ln());
        } else {
            rejected.push(k);
        }
    }
    if xs.len() < 10 {
        return Err(DpdError::InvalidInput(format!(
            "slope fit needs at least 10 positive points with k >= {k_min}, found {} (rejected k: {rejected:?})",
            xs.len()
        )));
    }
    let mx = vector::mean(&xs);
    let my = vector::mean(&ys);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(DpdError::InvalidInput("slope fit needs distinct k values".into()));
    }
    let slope = sxy / sxx;
    Ok(SlopeFit {
        slope,
        intercept: my - slope * mx,
        points_used: xs.len(),
        rejected,
    })
}

/// `20·log₁₀(‖x* − mean(x*)‖ / ‖x* − x‖)`, `+∞` when `x == x*`.
pub fn snr_db(x: &[f64], x_star: &[f64]) -> Result<f64> {
    check_len("snr", x_star.len(), x.len())?;
    let m = vector::mean(x_star);
    let num = x_star.iter().map(|v| (v - m).powi(2)).sum::<f64>().sqrt();
    let den = vector::dist(x_star, x);
    if den == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(20.0 * (num / den).log10())
}

/// Step parameters of one iteration. `theta` is absent for EDPD; `alpha` is
/// the extrapolation weight applied at the end of the iteration for EDPD
/// and `αₜ` for LDPD.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepParams {
    pub theta: Option<f64>,
    pub alpha: f64,
    pub tau: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRecord {
    pub t: usize,
    pub gap: Option<f64>,
    pub bound: Option<f64>,
    pub snr_db: Option<f64>,
    pub dist_dual: Option<f64>,
    pub params: StepParams,
    pub wall_ms: Option<f64>,
}

pub const HISTORY_HEADER: [&str; 10] = [
    "t",
    "gap",
    "bound",
    "snr_db",
    "dist_dual",
    "theta",
    "alpha",
    "tau",
    "eta",
    "wall_ms",
];

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:e}")).unwrap_or_default()
}

fn parse_opt(field: &str, line: usize, name: &str) -> Result<Option<f64>> {
    if field.is_empty() {
        return Ok(None);
    }
    field
        .parse()
        .map(Some)
        .map_err(|_| DpdError::InvalidInput(format!("record {line}: bad {name} value '{field}'")))
}

fn parse_req(field: &str, line: usize, name: &str) -> Result<f64> {
    parse_opt(field, line, name)?.ok_or_else(|| DpdError::InvalidInput(format!("record {line}: missing {name}")))
}

fn csv_err(e: csv::Error) -> DpdError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => DpdError::Io(io),
        other => DpdError::InvalidInput(format!("csv: {other:?}")),
    }
}

/// Writes the header and one line per record. Floats use the shortest
/// representation that parses back to the same value.
pub fn write_history<W: Write>(out: W, records: &[HistoryRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HISTORY_HEADER).map_err(csv_err)?;
    let mut last = 0;
    for r in records {
        if r.t <= last {
            return Err(DpdError::InvalidInput(format!(
                "history t must increase strictly, got {} after {last}",
                r.t
            )));
        }
        last = r.t;
        w.write_record([
            r.t.to_string(),
            fmt_opt(r.gap),
            fmt_opt(r.bound),
            fmt_opt(r.snr_db),
            fmt_opt(r.dist_dual),
            fmt_opt(r.params.theta),
            fmt_opt(Some(r.params.alpha)),
            fmt_opt(Some(r.params.tau)),
            fmt_opt(Some(r.params.eta)),
            fmt_opt(r.wall_ms),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_history<R: Read>(input: R) -> Result<Vec<HistoryRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers().map_err(csv_err)?.clone();
    if header.iter().ne(HISTORY_HEADER) {
        return Err(DpdError::InvalidInput(format!(
            "unexpected history header: {}",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out: Vec<HistoryRecord> = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = i + 1;
        let f = |j: usize| rec.get(j).unwrap_or("");
        let t: usize = f(0)
            .parse()
            .map_err(|_| DpdError::InvalidInput(format!("record {line}: bad t '{}'", f(0))))?;
        if out.last().is_some_and(|p| p.t >= t) {
            return Err(DpdError::InvalidInput(format!("record {line}: t not increasing")));
        }
        out.push(HistoryRecord {
            t,
            gap: parse_opt(f(1), line, "gap")?,
            bound: parse_opt(f(2), line, "bound")?,
            snr_db: parse_opt(f(3), line, "snr_db")?,
            dist_dual: parse_opt(f(4), line, "dist_dual")?,
            params: StepParams {
                theta: parse_opt(f(5), line, "theta")?,
                alpha: parse_req(f(6), line, "alpha")?,
                tau: parse_req(f(7), line, "tau")?,
                eta: parse_req(f(8), line, "eta")?,
            },
            wall_ms: parse_opt(f(9), line, "wall_ms")?,
        });
    }
    Ok(out)
}

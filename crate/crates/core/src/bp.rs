//! Tail-integral classification of the `B_p` and strong `B_p^*` conditions.
//!
//! Both conditions ask whether `int_c^inf F(t) / t^p dt/t` is finite, with
//! `F = Phi` for `B_p` and `F = Phi_n(Phi)` for `B_p^*`. Convergence cannot be
//! decided by finite quadrature, so [`classify`] integrates decade by decade
//! up to `1e12` and fits the decay of the decade increments against the
//! hierarchy `t^-rho`, `(log t)^sigma`, `(log log t)^tau`. For the parametric
//! families an analytic verdict is attached and any disagreement is an error.
//!
//! In `B_p^*` mode the fit runs on the comparison integrand
//! `Phi(t) log(e+t)^(n-1) / t^p`. It converges exactly when the true one does
//! (`log Phi(t)` and `log t` are comparable for any Young function of
//! polynomial growth) but lacks the slowly decaying `log log` drift that
//! `log Phi(t)` carries at finite `t`, which would otherwise bias the fitted
//! log power by up to half a unit.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::young::{phi_n_eval, Kind, YoungFunction};

/// Cutoffs used by [`classify`]: `10^3, ..., 10^12`.
pub const CUTOFF_DECADES: (i32, i32) = (3, 12);

const MIN_POINTS_PER_DECADE: f64 = 64.0;
const QUAD_RTOL: f64 = 1e-6;
const MAX_DOUBLINGS: usize = 10;
/// Number of trailing decade increments the tail model is fitted on.
const FIT_WINDOW: usize = 4;

// Decision thresholds. Over T <= 1e12 the log log T factor only spans
// [2.9, 3.3], so u^-1.25 and u^-1 (log u)^-1 are nearly indistinguishable;
// the band between the sigma thresholds is resolved by tau or left open.
const EXPONENT_MARGIN: f64 = 0.05;
const SIGMA_CONVERGES: f64 = -1.45;
const SIGMA_DIVERGES: f64 = -0.95;
const TAU_CONVERGES: f64 = -1.25;
const TAU_DIVERGES: f64 = -0.15;
const EQ_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Bp,
    BpStar,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bp" => Ok(Mode::Bp),
            "bp_star" | "bp*" => Ok(Mode::BpStar),
            other => Err(Error::Config(format!("unknown mode {other:?}, expected bp or bp_star"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    Converges,
    Diverges,
    Inconclusive,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Fitted tail model of the decade increments `D(T) = I(10T) - I(T)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    /// `-d log D / d log T`; positive for power-law decay.
    pub rho: f64,
    /// Prefactor in `D ~ kappa T^-rho`.
    pub kappa: f64,
    /// `d log D / d log log T`: the log-power of the integrand.
    pub sigma: f64,
    /// `d log(D log T) / d log log log T`: the log-log power.
    pub tau: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailIntegralTrace {
    pub c: f64,
    pub p: f64,
    pub n: u32,
    pub mode: Mode,
    pub cutoffs: Vec<f64>,
    pub partials: Vec<f64>,
    pub fitted_tail: Option<TailFit>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub label: Label,
    pub evidence: TailIntegralTrace,
    pub analytic: Option<Label>,
}

/// `int_c^T Phi(t) / t^(p+1) dt`.
pub fn bp_partial(phi: &YoungFunction, p: f64, c: f64, t_max: f64) -> Result<f64> {
    partial(phi, p, c, t_max, |v| v)
}

/// `int_c^T Phi_n(Phi(t)) / t^(p+1) dt`.
pub fn bp_star_partial(phi: &YoungFunction, p: f64, n: u32, c: f64, t_max: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    partial(phi, p, c, t_max, |v| phi_n_eval(n, v))
}

fn partial(phi: &YoungFunction, p: f64, c: f64, t_max: f64, outer: impl Fn(f64) -> f64) -> Result<f64> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::Config(format!("p must be a finite number > 1, got {p}")));
    }
    if !(c > 0.0) || !(t_max > c) || !t_max.is_finite() {
        return Err(Error::Config(format!("need 0 < c < T < inf, got c = {c}, T = {t_max}")));
    }
    if let Some(cap) = phi.domain_cap() {
        if cap < t_max {
            return Err(Error::NonFinite { t: cap });
        }
    }
    // in u = log t the integrand is F(e^u) e^(-p u)
    log_trapezoid(|u| outer(phi.eval(u.exp())) * (-p * u).exp(), c.ln(), t_max.ln())
}

/// `int_c^T Phi(t) log(e+t)^m / t^(p+1) dt`.
fn comparison_partial(phi: &YoungFunction, p: f64, m: i32, c: f64, t_max: f64) -> Result<f64> {
    log_trapezoid(
        |u| {
            let t = u.exp();
            phi.eval(t) * (std::f64::consts::E + t).ln().powi(m) * (-p * u).exp()
        },
        c.ln(),
        t_max.ln(),
    )
}

/// Composite trapezoid in `u` on `[a, b]`, refined by doubling until two
/// successive estimates agree to `QUAD_RTOL`, then Richardson-extrapolated.
fn log_trapezoid(g: impl Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
    let decades = (b - a) / std::f64::consts::LN_10;
    let mut n = (decades * MIN_POINTS_PER_DECADE).ceil().max(2.0) as usize;
    let h0 = (b - a) / n as f64;
    let sample = |u: f64| -> Result<f64> {
        let v = g(u);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite { t: u.exp() })
        }
    };
    let mut sum = 0.5 * (sample(a)? + sample(b)?);
    for i in 1..n {
        sum += sample(a + h0 * i as f64)?;
    }
    let mut coarse = sum * h0;
    for _ in 0..MAX_DOUBLINGS {
        let h = (b - a) / (2 * n) as f64;
        for i in 0..n {
            sum += sample(a + h * (2 * i + 1) as f64)?;
        }
        n *= 2;
        let fine = sum * h;
        let extrapolated = (4.0 * fine - coarse) / 3.0;
        if (fine - coarse).abs() <= QUAD_RTOL * fine.abs() {
            return Ok(extrapolated.max(0.0));
        }
        coarse = fine;
    }
    Ok(coarse.max(0.0))
}

/// Classifies with lower limit `c = 1`.
pub fn classify(phi: &YoungFunction, p: f64, n: u32, mode: Mode) -> Result<Verdict> {
    classify_from(phi, p, n, mode, 1.0)
}

/// Classifies with an explicit lower limit `c < 1e3`.
///
/// The label depends only on the decade increments above `1e3`, so it does
/// not depend on `c`.
pub fn classify_from(phi: &YoungFunction, p: f64, n: u32, mode: Mode, c: f64) -> Result<Verdict> {
    let (first, last) = CUTOFF_DECADES;
    let cutoffs: Vec<f64> = (first..=last).map(|k| 10f64.powi(k)).collect();
    if !(c < cutoffs[0]) {
        return Err(Error::Config(format!("lower limit must be below {}, got {c}", cutoffs[0])));
    }
    let piece = |lo: f64, hi: f64| match mode {
        Mode::Bp => bp_partial(phi, p, lo, hi),
        Mode::BpStar => bp_star_partial(phi, p, n, lo, hi),
    };
    let log_power = match mode {
        Mode::Bp => 0,
        Mode::BpStar => n as i32 - 1,
    };
    let mut partials = Vec::with_capacity(cutoffs.len());
    let mut acc = piece(c, cutoffs[0])?;
    partials.push(acc);
    let mut increments = Vec::with_capacity(cutoffs.len() - 1);
    for w in cutoffs.windows(2) {
        let d = piece(w[0], w[1])?;
        acc += d;
        partials.push(acc);
        increments.push(if log_power == 0 { d } else { comparison_partial(phi, p, log_power, w[0], w[1])? });
    }

    let analytic = analytic_verdict(phi, p, n, mode);
    let (label, fitted_tail) = decide(&cutoffs, &increments);
    let verdict = Verdict {
        label,
        evidence: TailIntegralTrace { c, p, n, mode, cutoffs, partials, fitted_tail },
        analytic,
    };
    if let Some(a) = analytic {
        if label != Label::Inconclusive && label != a {
            return Err(Error::AnalyticDisagreement { numeric: label.to_string(), analytic: a.to_string() });
        }
    }
    Ok(verdict)
}

fn decide(cutoffs: &[f64], increments: &[f64]) -> (Label, Option<TailFit>) {
    let start = increments.len() - FIT_WINDOW;
    let tail = &increments[start..];
    if tail.iter().all(|&d| d == 0.0) {
        return (Label::Converges, None);
    }
    if tail.iter().any(|&d| d <= 0.0) {
        return (Label::Inconclusive, None);
    }
    // increment k spans [cutoffs[k], cutoffs[k+1]]; x is its midpoint in log t
    let x: Vec<f64> = (start..increments.len())
        .map(|k| 0.5 * (cutoffs[k].ln() + cutoffs[k + 1].ln()))
        .collect();
    let log_d: Vec<f64> = tail.iter().map(|d| d.ln()).collect();

    let (slope_t, intercept_t) = fit_line(&x, &log_d);
    let rho = -slope_t;
    let kappa = intercept_t.exp();
    let log_x: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let (sigma, _) = fit_line(&log_x, &log_d);
    let log_log_x: Vec<f64> = log_x.iter().map(|v| v.ln()).collect();
    let log_dx: Vec<f64> = log_d.iter().zip(&log_x).map(|(a, b)| a + b).collect();
    let (tau, _) = fit_line(&log_log_x, &log_dx);
    let fit = TailFit { rho, kappa, sigma, tau };

    let label = if rho < -EXPONENT_MARGIN {
        Label::Diverges
    } else if sigma < SIGMA_CONVERGES {
        Label::Converges
    } else if sigma > SIGMA_DIVERGES {
        Label::Diverges
    } else if tau < TAU_CONVERGES {
        Label::Converges
    } else if tau > TAU_DIVERGES {
        Label::Diverges
    } else {
        Label::Inconclusive
    };
    (label, Some(fit))
}

fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Verdict from the closed-form integral test, for the parametric families.
///
/// `t^alpha log^-beta` is `B_p` iff `alpha < p`, or `alpha = p` and `beta > 1`;
/// it is `B_p^*` iff `alpha < p`, or `alpha = p` and `beta > n`. For
/// `t^q log^-k loglog^-gamma` the same holds with the log power `k`, and at
/// the boundary power the log-log factor decides (`gamma > 1`). Boundary
/// parameters diverge.
pub fn analytic_verdict(phi: &YoungFunction, p: f64, n: u32, mode: Mode) -> Option<Label> {
    if phi.domain_cap().is_some() {
        return None;
    }
    let needed = match mode {
        Mode::Bp => 1.0,
        Mode::BpStar => n as f64,
    };
    let (power, log_power, loglog_power) = match phi.kind() {
        Kind::Power { r } => (*r, 0.0, 0.0),
        Kind::PowerLog { alpha, beta } => (*alpha, *beta, 0.0),
        Kind::PowerLogLog { p, gamma, n } => (*p, *n as f64, *gamma),
        Kind::Tabulated(_) | Kind::NumericComplement(_) => return None,
    };
    let converges = if (power - p).abs() > EQ_TOL {
        power < p
    } else if (log_power - needed).abs() > EQ_TOL {
        log_power > needed
    } else {
        loglog_power > 1.0 + EQ_TOL
    };
    Some(if converges { Label::Converges } else { Label::Diverges })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_of_identity() {
        let id = YoungFunction::power(1.0).unwrap();
        let v = bp_partial(&id, 2.0, 1.0, 1e6).unwrap();
        assert!((v - (1.0 - 1e-6)).abs() <= 1e-6);
    }

    #[test]
    fn partial_of_square_to_e() {
        let sq = YoungFunction::power(2.0).unwrap();
        let v = bp_partial(&sq, 2.0, 1.0, std::f64::consts::E).unwrap();
        assert!((v - 1.0).abs() <= 1e-9, "{v}");
    }

    #[test]
    fn partial_of_zero_table() {
        let z = YoungFunction::tabulated(&[(0.0, 0.0), (1e4, 0.0), (2e4, 1.0)]).unwrap();
        assert_eq!(bp_partial(&z, 2.0, 1.0, 1e3).unwrap(), 0.0);
    }

    #[test]
    fn star_with_n_one_is_plain() {
        let phi = YoungFunction::power_log(2.0, 1.5).unwrap();
        for t in [10.0, 1e4, 1e9] {
            assert_eq!(bp_partial(&phi, 2.0, 1.0, t).unwrap(), bp_star_partial(&phi, 2.0, 1, 1.0, t).unwrap());
        }
    }

    #[test]
    fn star_partial_of_identity_settles() {
        let id = YoungFunction::power(1.0).unwrap();
        let a = bp_star_partial(&id, 2.0, 2, 1.0, 1e6).unwrap();
        let b = bp_star_partial(&id, 2.0, 2, 1.0, 1e8).unwrap();
        assert!((b - a) / b < 0.01);
    }

    #[test]
    fn cap_below_cutoff_is_non_finite() {
        let phi = YoungFunction::power(2.0).unwrap().with_domain_cap(50.0).unwrap();
        assert!(matches!(bp_partial(&phi, 2.0, 1.0, 100.0), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn counterexample_splits_the_conditions() {
        let phi = YoungFunction::power_log(2.0, 1.5).unwrap();
        assert_eq!(classify(&phi, 2.0, 2, Mode::Bp).unwrap().label, Label::Converges);
        let star = classify(&phi, 2.0, 2, Mode::BpStar).unwrap();
        assert_eq!(star.label, Label::Diverges);
        let inc: Vec<f64> = star.evidence.partials.windows(2).map(|w| w[1] - w[0]).collect();
        // increments shrink far slower than geometrically
        assert!(inc[inc.len() - 1] > 0.5 * inc[inc.len() - 2]);
    }

    #[test]
    fn classify_examples() {
        let p15 = YoungFunction::power(1.5).unwrap();
        assert_eq!(classify(&p15, 2.0, 3, Mode::BpStar).unwrap().label, Label::Converges);
        let pl = YoungFunction::power_log(2.0, 2.5).unwrap();
        assert_eq!(classify(&pl, 2.0, 2, Mode::BpStar).unwrap().label, Label::Converges);
    }

    #[test]
    fn analytic_table() {
        let v = |phi: YoungFunction, n, mode| analytic_verdict(&phi, 2.0, n, mode).unwrap();
        assert_eq!(v(YoungFunction::power_log(2.0, 2.01).unwrap(), 2, Mode::BpStar), Label::Converges);
        assert_eq!(v(YoungFunction::power_log(2.0, 2.0).unwrap(), 2, Mode::BpStar), Label::Diverges);
        assert_eq!(v(YoungFunction::power_log_log(2.0, 1.5, 2).unwrap(), 2, Mode::BpStar), Label::Converges);
        assert_eq!(v(YoungFunction::power_log_log(2.0, 1.0, 2).unwrap(), 2, Mode::BpStar), Label::Diverges);
        assert_eq!(v(YoungFunction::power(2.0).unwrap(), 2, Mode::Bp), Label::Diverges);
        let tab = YoungFunction::tabulated(&[(0.0, 0.0), (1.0, 1.0)]).unwrap();
        assert_eq!(analytic_verdict(&tab, 2.0, 2, Mode::Bp), None);
    }

    #[test]
    fn boundary_case_diverges_numerically() {
        // beta = n: increments decay like 1/log T, flat on a log-log scale
        let phi = YoungFunction::power_log(2.0, 2.0).unwrap();
        let v = classify(&phi, 2.0, 2, Mode::BpStar).unwrap();
        assert_ne!(v.label, Label::Converges);
    }

    #[test]
    fn mode_parses() {
        assert_eq!("bp_star".parse::<Mode>().unwrap(), Mode::BpStar);
        assert!("bq".parse::<Mode>().is_err());
        assert_eq!(serde_json::to_string(&Mode::BpStar).unwrap(), "\"bp_star\"");
    }
}

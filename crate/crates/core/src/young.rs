//! Young functions and their calculus.
//!
//! A [`YoungFunction`] is a convex nondecreasing map `[0, inf) -> [0, inf]`
//! with `Phi(0) = 0`. Values are plain `f64`; `f64::INFINITY` is a legitimate
//! value (beyond an optional domain cap, or where a complementary function is
//! unbounded) and compares totally with every finite value.

use std::f64::consts::E;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default relative tolerance for [`inverse`].
pub const INVERSE_TOL: f64 = 1e-10;

const MAX_ITERATIONS: usize = 200;

/// Search bracket for the Legendre supremum, in `t`.
const LEGENDRE_LO: f64 = 1e-12;
const LEGENDRE_HI: f64 = 1e12;
/// Coarse scan step in `ln t` (eight points per decade).
const LEGENDRE_SCAN_STEP: f64 = std::f64::consts::LN_10 / 8.0;

/// Log-spaced sample points used by the constructor's convexity check.
const SHAPE_CHECK_DECADES: (i32, i32) = (-6, 9);
const SHAPE_CHECK_PER_DECADE: usize = 40;
const CONVEX_TAIL_FROM: f64 = 1e4;

/// The parametric families and the two non-parametric representations.
#[derive(Clone, Debug)]
pub enum Kind {
    /// `t^r`, `r >= 1`.
    Power { r: f64 },
    /// `t^alpha * log(e + t)^(-beta)`.
    PowerLog { alpha: f64, beta: f64 },
    /// `t^p * log(e + t)^(-n) * log(e + log(e + t))^(-gamma)`.
    ///
    /// The outer `log(e + .)` keeps the double logarithm positive at the
    /// origin; it is equivalent to `log log t` at infinity.
    PowerLogLog { p: f64, gamma: f64, n: u32 },
    /// Knots interpolated log-log linearly.
    Tabulated(Table),
    /// `sup_{t>0} { s t - base(t) }`, evaluated numerically.
    NumericComplement(Arc<YoungFunction>),
}

/// A Young function with an optional domain cap beyond which it is `+inf`.
#[derive(Clone, Debug)]
pub struct YoungFunction {
    kind: Kind,
    domain_cap: Option<f64>,
    // convex on the whole half-line (up to the sampling of the checks)
    convex: bool,
}

/// Knot table for [`Kind::Tabulated`].
#[derive(Clone, Debug)]
pub struct Table {
    t: Vec<f64>,
    v: Vec<f64>,
    // Per-segment log-log slope, or NaN when the segment touches zero and
    // falls back to linear interpolation.
    log_slope: Vec<f64>,
}

impl Table {
    fn new(knots: &[(f64, f64)]) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidYoung("a table needs at least two knots".into()));
        }
        let mut t = Vec::with_capacity(knots.len());
        let mut v = Vec::with_capacity(knots.len());
        for (i, &(ti, vi)) in knots.iter().enumerate() {
            if !ti.is_finite() || !vi.is_finite() || ti < 0.0 || vi < 0.0 {
                return Err(Error::InvalidYoung(format!("knot {i} is not a finite nonnegative pair")));
            }
            if i > 0 {
                if ti <= t[i - 1] {
                    return Err(Error::InvalidYoung(format!("knot abscissae must increase (knot {i})")));
                }
                if vi < v[i - 1] {
                    return Err(Error::InvalidYoung(format!("knot values must not decrease (knot {i})")));
                }
            }
            if ti == 0.0 && vi != 0.0 {
                return Err(Error::InvalidYoung("a knot at t = 0 must have value 0".into()));
            }
            t.push(ti);
            v.push(vi);
        }
        if v[v.len() - 1] <= v[v.len() - 2] {
            return Err(Error::InvalidYoung("the last segment must increase so that the function is unbounded".into()));
        }
        let log_slope = (0..t.len() - 1)
            .map(|i| {
                if t[i] > 0.0 && v[i] > 0.0 && v[i + 1] > 0.0 {
                    (v[i + 1] / v[i]).ln() / (t[i + 1] / t[i]).ln()
                } else {
                    f64::NAN
                }
            })
            .collect();
        Ok(Table { t, v, log_slope })
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.t.iter().copied().zip(self.v.iter().copied())
    }

    /// Every segment bends upwards and slopes never drop across a knot.
    fn is_convex(&self) -> bool {
        let segs = self.log_slope.len();
        for i in 0..segs {
            let s = self.log_slope[i];
            if !s.is_nan() && s < 1.0 {
                return false;
            }
            if i + 1 < segs {
                let left = self.segment_eval(i, self.t[i + 1]).1;
                let right = self.segment_eval(i + 1, self.t[i + 1]).1;
                if right < left * (1.0 - 1e-9) {
                    return false;
                }
            }
        }
        // below the first knot the function is zero or the first segment's
        // power law, whose slope must not exceed the slope just above
        self.v[0] == 0.0 || self.t[0] == 0.0 || self.log_slope[0] >= 1.0
    }

    fn segment_eval(&self, i: usize, x: f64) -> (f64, f64) {
        let s = self.log_slope[i];
        if s.is_nan() {
            let slope = (self.v[i + 1] - self.v[i]) / (self.t[i + 1] - self.t[i]);
            let val = (self.v[i] + slope * (x - self.t[i])).max(0.0);
            (val, slope)
        } else {
            let val = self.v[i] * (x / self.t[i]).powf(s);
            (val, val * s / x)
        }
    }

    fn eval_with_slope(&self, x: f64) -> (f64, f64) {
        let last = self.t.len() - 1;
        // index of the first knot strictly greater than x
        let k = self.t.partition_point(|&ti| ti <= x);
        if k == 0 {
            // below the first knot: extend the first segment down to zero
            if self.v[0] == 0.0 {
                return (0.0, 0.0);
            }
            return self.segment_eval(0, x);
        }
        if k > last {
            return self.segment_eval(last - 1, x);
        }
        self.segment_eval(k - 1, x)
    }
}

/// Serializable description of a Young function.
///
/// `NumericComplement` has no descriptor: it is rebuilt from its base with
/// [`complementary`].
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct YoungDescriptor {
    #[serde(flatten)]
    pub family: FamilyDescriptor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_cap: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilyDescriptor {
    Power {
        r: f64,
    },
    PowerLog {
        alpha: f64,
        beta: f64,
    },
    PowerLogLog {
        p: f64,
        gamma: f64,
        #[serde(default = "default_loglog_power")]
        n: u32,
    },
    Tabulated {
        knots: Vec<[f64; 2]>,
    },
}

fn default_loglog_power() -> u32 {
    2
}

impl YoungFunction {
    pub fn power(r: f64) -> Result<Self> {
        if !r.is_finite() || r < 1.0 {
            return Err(Error::InvalidYoung(format!("power exponent must be >= 1, got {r}")));
        }
        Ok(Self::unchecked(Kind::Power { r }))
    }

    /// `t^alpha log(e+t)^(-beta)`; rejected unless increasing, and convex
    /// for large `t`.
    pub fn power_log(alpha: f64, beta: f64) -> Result<Self> {
        if !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::InvalidYoung("power_log parameters must be finite".into()));
        }
        let mut phi = Self::unchecked(Kind::PowerLog { alpha, beta });
        phi.convex = phi.check_shape()?;
        Ok(phi)
    }

    pub fn power_log_log(p: f64, gamma: f64, n: u32) -> Result<Self> {
        if !p.is_finite() || !gamma.is_finite() {
            return Err(Error::InvalidYoung("power_log_log parameters must be finite".into()));
        }
        let mut phi = Self::unchecked(Kind::PowerLogLog { p, gamma, n });
        phi.convex = phi.check_shape()?;
        Ok(phi)
    }

    /// Knot table. Values must be nondecreasing with an increasing last
    /// segment; convexity is not enforced
    /// (log-log interpolation of a convex table is convex up to rounding).
    pub fn tabulated(knots: &[(f64, f64)]) -> Result<Self> {
        Ok(Self::unchecked(Kind::Tabulated(Table::new(knots)?)))
    }

    /// Tabulates `f` on `per_decade` log-spaced knots over `[lo, hi]`, with an
    /// extra knot at the origin.
    pub fn tabulate_fn(f: impl Fn(f64) -> f64, lo: f64, hi: f64, per_decade: usize) -> Result<Self> {
        if !(lo > 0.0 && hi > lo) || per_decade == 0 {
            return Err(Error::InvalidYoung("tabulation range must satisfy 0 < lo < hi".into()));
        }
        let decades = (hi / lo).log10();
        let count = (decades * per_decade as f64).ceil() as usize + 1;
        let mut knots = Vec::with_capacity(count + 1);
        knots.push((0.0, 0.0));
        for i in 0..count {
            let t = lo * 10f64.powf(decades * i as f64 / (count - 1) as f64);
            knots.push((t, f(t)));
        }
        Self::tabulated(&knots)
    }

    /// Builds from a descriptor, applying the same validation as the
    /// constructors.
    pub fn from_descriptor(d: &YoungDescriptor) -> Result<Self> {
        let phi = match &d.family {
            FamilyDescriptor::Power { r } => Self::power(*r)?,
            FamilyDescriptor::PowerLog { alpha, beta } => Self::power_log(*alpha, *beta)?,
            FamilyDescriptor::PowerLogLog { p, gamma, n } => Self::power_log_log(*p, *gamma, *n)?,
            FamilyDescriptor::Tabulated { knots } => {
                let pairs: Vec<(f64, f64)> = knots.iter().map(|k| (k[0], k[1])).collect();
                Self::tabulated(&pairs)?
            }
        };
        match d.domain_cap {
            Some(cap) => phi.with_domain_cap(cap),
            None => Ok(phi),
        }
    }

    /// Parses a JSON descriptor such as `{"kind":"power_log","alpha":2,"beta":1.5}`.
    pub fn from_json(s: &str) -> Result<Self> {
        let d: YoungDescriptor =
            serde_json::from_str(s).map_err(|e| Error::InvalidYoung(format!("bad descriptor: {e}")))?;
        Self::from_descriptor(&d)
    }

    pub fn descriptor(&self) -> Option<YoungDescriptor> {
        let family = match &self.kind {
            Kind::Power { r } => FamilyDescriptor::Power { r: *r },
            Kind::PowerLog { alpha, beta } => FamilyDescriptor::PowerLog { alpha: *alpha, beta: *beta },
            Kind::PowerLogLog { p, gamma, n } => FamilyDescriptor::PowerLogLog { p: *p, gamma: *gamma, n: *n },
            Kind::Tabulated(tab) => FamilyDescriptor::Tabulated {
                knots: tab.knots().map(|(t, v)| [t, v]).collect(),
            },
            Kind::NumericComplement(_) => return None,
        };
        Some(YoungDescriptor { family, domain_cap: self.domain_cap })
    }

    pub fn with_domain_cap(mut self, cap: f64) -> Result<Self> {
        if !(cap > 0.0) || cap.is_nan() {
            return Err(Error::InvalidYoung(format!("domain cap must be positive, got {cap}")));
        }
        self.domain_cap = if cap.is_infinite() { None } else { Some(cap) };
        Ok(self)
    }

    fn unchecked(kind: Kind) -> Self {
        let convex = match &kind {
            Kind::Power { .. } | Kind::NumericComplement(_) => true,
            Kind::Tabulated(tab) => tab.is_convex(),
            // decided by check_shape
            Kind::PowerLog { .. } | Kind::PowerLogLog { .. } => false,
        };
        YoungFunction { kind, domain_cap: None, convex }
    }

    /// True when the function is convex on all of `[0, inf)`, not only on
    /// the tail. Some maximal-function shortcuts rely on
    /// `Phi(theta t) <= theta Phi(t)`, which needs global convexity.
    pub fn is_convex(&self) -> bool {
        self.convex
    }

    pub fn kind(&self) -> &Kind {
        &self.kind
    }

    pub fn domain_cap(&self) -> Option<f64> {
        self.domain_cap
    }

    /// `Some(r)` when the function is exactly `t^r` with no cap.
    pub fn as_power(&self) -> Option<f64> {
        match (&self.kind, self.domain_cap) {
            (Kind::Power { r }, None) => Some(*r),
            _ => None,
        }
    }

    /// `Phi(t)`. Negative arguments are treated as zero.
    pub fn eval(&self, t: f64) -> f64 {
        self.eval_with_slope(t).0
    }

    /// `(Phi(t), Phi'(t))`, with the right derivative at kinks.
    ///
    /// For a numeric complement the slope is the maximiser `t*` of the
    /// Legendre objective (envelope theorem).
    pub fn eval_with_slope(&self, t: f64) -> (f64, f64) {
        if t.is_nan() {
            return (f64::NAN, f64::NAN);
        }
        if t <= 0.0 {
            return (0.0, self.slope_at_zero());
        }
        if let Some(cap) = self.domain_cap {
            if t > cap {
                return (f64::INFINITY, f64::INFINITY);
            }
        }
        if t.is_infinite() {
            return (f64::INFINITY, f64::INFINITY);
        }
        match &self.kind {
            Kind::Power { r } => {
                let r = *r;
                if r == 1.0 {
                    (t, 1.0)
                } else if r == 2.0 {
                    (t * t, 2.0 * t)
                } else {
                    let tr1 = t.powf(r - 1.0);
                    (tr1 * t, r * tr1)
                }
            }
            Kind::PowerLog { alpha, beta } => {
                let l = (E + t).ln();
                let val = t.powf(*alpha) * l.powf(-beta);
                let dlog = alpha / t - beta / ((E + t) * l);
                (val, val * dlog)
            }
            Kind::PowerLogLog { p, gamma, n } => {
                let l = (E + t).ln();
                let ll = (E + l).ln();
                let val = t.powf(*p) * l.powi(-(*n as i32)) * ll.powf(-gamma);
                let dlog = p / t - *n as f64 / ((E + t) * l) - gamma / ((E + l) * (E + t) * ll);
                (val, val * dlog)
            }
            Kind::Tabulated(tab) => tab.eval_with_slope(t),
            Kind::NumericComplement(base) => {
                let (val, argmax) = legendre(base, t);
                (val, argmax)
            }
        }
    }

    fn slope_at_zero(&self) -> f64 {
        match &self.kind {
            Kind::Power { r } => {
                if *r == 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Kind::PowerLog { alpha, .. } => {
                if *alpha == 1.0 {
                    1.0
                } else if *alpha > 1.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Kind::PowerLogLog { p, gamma, .. } => {
                if *p == 1.0 {
                    (E + 1.0).ln().powf(-gamma)
                } else if *p > 1.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            Kind::Tabulated(tab) => tab.eval_with_slope(0.0).1,
            Kind::NumericComplement(_) => 0.0,
        }
    }

    /// Sampled shape check: nondecreasing on `[1e-6, 1e9]` and convex on the
    /// tail `[1e4, 1e9]`.
    ///
    /// The parametric families are Young functions up to equivalence: for
    /// instance `t^2 log(e+t)^-3` bends slightly concave near `t = 3` but is
    /// convex for large `t`, and only the tail matters for the conditions
    /// studied here.
    fn check_shape(&self) -> Result<bool> {
        let (lo, hi) = SHAPE_CHECK_DECADES;
        let mut convex = true;
        let count = ((hi - lo) as usize) * SHAPE_CHECK_PER_DECADE + 1;
        let mut prev_t = 0.0;
        let mut prev_v = 0.0;
        let mut prev_slope = 0.0;
        for i in 0..count {
            let t = 10f64.powf(lo as f64 + i as f64 / SHAPE_CHECK_PER_DECADE as f64);
            let v = self.eval(t);
            if !v.is_finite() {
                return Err(Error::InvalidYoung(format!("{self} is not finite at t = {t:e}")));
            }
            if v < prev_v {
                return Err(Error::InvalidYoung(format!("{self} decreases near t = {t:e}")));
            }
            let slope = (v - prev_v) / (t - prev_t);
            if slope < prev_slope * (1.0 - 1e-9) {
                if prev_t >= CONVEX_TAIL_FROM {
                    return Err(Error::InvalidYoung(format!("{self} is not convex near t = {t:e}")));
                }
                convex = false;
            }
            prev_t = t;
            prev_v = v;
            prev_slope = slope;
        }
        Ok(convex)
    }
}

impl fmt::Display for YoungFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            Kind::Power { r } => write!(f, "t^{r}")?,
            Kind::PowerLog { alpha, beta } => write!(f, "t^{alpha} log(e+t)^-{beta}")?,
            Kind::PowerLogLog { p, gamma, n } => write!(f, "t^{p} log(e+t)^-{n} loglog^-{gamma}")?,
            Kind::Tabulated(tab) => write!(f, "tabulated[{} knots]", tab.t.len())?,
            Kind::NumericComplement(base) => write!(f, "complement({base})")?,
        }
        if let Some(cap) = self.domain_cap {
            write!(f, " capped at {cap}")?;
        }
        Ok(())
    }
}

/// `Phi(t)`.
pub fn eval(phi: &YoungFunction, t: f64) -> f64 {
    phi.eval(t)
}

/// Generalised inverse by bracketing bisection.
///
/// Returns `t` with `|Phi(t) - y| <= tol * max(1, y)`; the search keeps going
/// until the error is also below `tol * y` or the bracket collapses, so small
/// `y` still get relative accuracy. Functions with a jump (a cap, or the
/// indicator-like complement of `t`) return the jump location.
pub fn inverse(phi: &YoungFunction, y: f64, tol: f64) -> Result<f64> {
    if y.is_nan() || y <= 0.0 {
        return Ok(0.0);
    }
    if y.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let mut lo = 0.0;
    let mut hi: f64 = 1.0;
    if let Some(cap) = phi.domain_cap {
        let sup = phi.eval(cap);
        if sup < y {
            return Err(Error::NoBracket { y, sup });
        }
        hi = hi.min(cap);
    }
    let mut expansions = 0;
    while phi.eval(hi) < y {
        lo = hi;
        hi *= 2.0;
        expansions += 1;
        if expansions > 2100 || hi.is_infinite() {
            return Err(Error::NoBracket { y, sup: phi.eval(lo) });
        }
        if let Some(cap) = phi.domain_cap {
            hi = hi.min(cap);
        }
    }
    let target = tol * y.max(1.0);
    let strict = tol * y;
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..MAX_ITERATIONS {
        mid = 0.5 * (lo + hi);
        let v = phi.eval(mid);
        let err = (v - y).abs();
        if err <= target && err <= strict {
            return Ok(mid);
        }
        if v < y {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    Ok(mid)
}

/// The complementary function `s -> sup_{t>0} { s t - Phi(t) }`, evaluated
/// numerically by golden-section search.
pub fn complementary(phi: &YoungFunction) -> YoungFunction {
    YoungFunction::unchecked(Kind::NumericComplement(Arc::new(phi.clone())))
}

/// Closed-form conjugate of the normalised power pair `t^p / p`, i.e.
/// `s^{p'} / p'`. Test oracle for [`complementary`].
pub fn normalized_power_conjugate(p: f64, s: f64) -> f64 {
    let q = p / (p - 1.0);
    s.powf(q) / q
}

/// Legendre supremum and its maximiser.
///
/// A coarse scan over the log bracket `[1e-12, 1e12]` locates the best cell,
/// then golden-section search refines inside its two neighbours; the objective
/// `s e^u - Phi(e^u)` is unimodal there for every family we build. A maximiser
/// on the top of an uncapped bracket means the supremum is not attained: `s`
/// exceeds the asymptotic slope and the value is `+inf`.
fn legendre(base: &YoungFunction, s: f64) -> (f64, f64) {
    if s <= 0.0 {
        return (0.0, 0.0);
    }
    let capped = base.domain_cap.map_or(false, |c| c < LEGENDRE_HI);
    let hi_t = base.domain_cap.map_or(LEGENDRE_HI, |c| c.min(LEGENDRE_HI));
    let lo_t = LEGENDRE_LO.min(hi_t * 0.5);
    let objective = |u: f64| {
        let t = u.exp();
        s * t - base.eval(t)
    };
    let (u_lo, u_hi) = (lo_t.ln(), hi_t.ln());
    let cells = (((u_hi - u_lo) / LEGENDRE_SCAN_STEP).ceil() as usize).max(2);
    let node = |k: usize| u_lo + (u_hi - u_lo) * k as f64 / cells as f64;
    let mut best_k = 0;
    let mut best_f = f64::NEG_INFINITY;
    for k in 0..=cells {
        let f = objective(node(k));
        if f > best_f {
            best_f = f;
            best_k = k;
        }
    }
    if best_k == cells && !capped {
        return (f64::INFINITY, f64::INFINITY);
    }
    let (mut a, mut b) = (node(best_k.saturating_sub(1)), node((best_k + 1).min(cells)));
    let inv_gold = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_gold * (b - a);
    let mut d = a + inv_gold * (b - a);
    let mut fc = objective(c);
    let mut fd = objective(d);
    for _ in 0..MAX_ITERATIONS {
        if b - a < 1e-11 {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_gold * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_gold * (b - a);
            fd = objective(d);
        }
    }
    let (mut u_best, mut f_best) = if fc >= fd { (c, fc) } else { (d, fd) };
    if best_f > f_best {
        u_best = node(best_k);
        f_best = best_f;
    }
    if f_best <= 0.0 {
        (0.0, 0.0)
    } else {
        (f_best, u_best.exp())
    }
}

/// `Phi_n(t) = t log(e+t)^(n-1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhiN {
    pub n: u32,
}

impl PhiN {
    pub fn new(n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidYoung("Phi_n needs n >= 1".into()));
        }
        Ok(PhiN { n })
    }

    pub fn eval(&self, t: f64) -> f64 {
        phi_n_eval(self.n, t)
    }
}

/// `t log(e+t)^(n-1)`; exactly `t` for `n = 1`.
pub fn phi_n_eval(n: u32, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if n <= 1 || t.is_infinite() {
        return t;
    }
    t * (E + t).ln().powi(n as i32 - 1)
}

/// Log-spaced sample points for the structural probes.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SamplingSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl SamplingSpec {
    pub fn new(lo: f64, hi: f64, points: usize) -> Self {
        SamplingSpec { lo, hi, points }
    }

    pub fn samples(&self) -> Vec<f64> {
        if self.points <= 1 {
            return vec![self.lo];
        }
        let (a, b) = (self.lo.ln(), self.hi.ln());
        (0..self.points)
            .map(|i| (a + (b - a) * i as f64 / (self.points - 1) as f64).exp())
            .collect()
    }
}

/// Outcome of a sampled structural probe. A pass is evidence, not proof.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ProbeReport {
    pub property: String,
    pub max_ratio: f64,
    pub argmax: (f64, f64),
    pub pairs_evaluated: usize,
    pub tol: f64,
    pub pass: bool,
}

/// Largest `Phi(ts) / (Phi(t) Phi(s))` over all sampled pairs; passes when it
/// stays below `1 + tol`.
pub fn probe_submultiplicative(phi: &YoungFunction, samples: &SamplingSpec, tol: f64) -> ProbeReport {
    let pts = samples.samples();
    let vals: Vec<f64> = pts.iter().map(|&t| phi.eval(t)).collect();
    let mut max_ratio = 0.0f64;
    let mut argmax = (f64::NAN, f64::NAN);
    let mut count = 0;
    for (i, &t) in pts.iter().enumerate() {
        for (j, &s) in pts.iter().enumerate() {
            let den = vals[i] * vals[j];
            if den <= 0.0 || !den.is_finite() {
                continue;
            }
            count += 1;
            let ratio = phi.eval(t * s) / den;
            if ratio > max_ratio || ratio.is_nan() {
                max_ratio = ratio;
                argmax = (t, s);
            }
        }
    }
    ProbeReport {
        property: "submultiplicative".into(),
        max_ratio,
        argmax,
        pairs_evaluated: count,
        tol,
        pass: max_ratio <= 1.0 + tol,
    }
}

/// Largest `Phi(2t) / Phi(t)` over the samples. The doubling constant is
/// family-specific, so the report passes whenever the ratio is finite.
pub fn probe_doubling(phi: &YoungFunction, samples: &SamplingSpec) -> ProbeReport {
    let mut max_ratio = 0.0f64;
    let mut argmax = (f64::NAN, f64::NAN);
    let mut count = 0;
    for t in samples.samples() {
        let den = phi.eval(t);
        if den <= 0.0 || !den.is_finite() {
            continue;
        }
        count += 1;
        let ratio = phi.eval(2.0 * t) / den;
        if ratio > max_ratio || ratio.is_nan() {
            max_ratio = ratio;
            argmax = (t, 2.0 * t);
        }
    }
    ProbeReport {
        property: "doubling".into(),
        max_ratio,
        argmax,
        pairs_evaluated: count,
        tol: 0.0,
        pass: max_ratio.is_finite(),
    }
}

//! Experiment drivers built on the operators: ratio probes over generated
//! test functions, the two-weight necessity construction, the generalized
//! Hölder suite and the growth table of the `B_p`-but-not-`B_p*` example.
//!
//! Integrals are midpoint sums over cells. The cell volume is omitted from
//! every ratio since it cancels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bp::{classify, Label, Mode, Verdict};
use crate::error::{Error, Result};
use crate::grid::{Geometry, GridFunction, LuxemburgSolver, LUXEMBURG_TOL};
use crate::maximal::{multilinear_maximal, orlicz_maximal, strong_maximal, Basis};
use crate::weights::{
    bump_constant, condition_a_estimate, ingest_weight, multilinear_bump, ConditionReport, FamilySpec, SetSampler,
    WeightSystem,
};
use crate::young::{complementary, inverse, YoungFunction, INVERSE_TOL};

/// Relative slack allowed above the Hölder constant. The numeric complement
/// is a lower bound of the exact one, so norms taken with it can undershoot
/// by the search tolerance; the bound is attained exactly by co-located
/// spikes with `Phi(t) = t^2`.
pub const HOLDER_SLACK: f64 = 1e-9;

/// Relative floor applied to `g` in [`necessity_construction`].
pub const NECESSITY_FLOOR: f64 = 1e-12;

// ---------------------------------------------------------------------------
// test functions

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    /// Indicator of the box `[lo, hi]`.
    Indicator { lo: Vec<f64>, hi: Vec<f64> },
    /// Unions of 1 to `max_rects` boxes with log-uniform sides in
    /// `[max_side / 16, max_side]`.
    RandomUnion { count: usize, max_rects: usize, max_side: f64 },
    /// Sums of one to three Gaussian bumps with standard deviation `width`.
    SmoothBump { count: usize, width: f64 },
    /// A single cell of height one at a random point.
    Spike { count: usize },
}

/// Test functions on a list of domains `[-T, T]^dim` and resolutions (cells
/// per unit length). Random objects live in continuous coordinates inside
/// `[-placement, placement]^dim`, so the same object is sampled at every
/// domain and resolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSuite {
    pub dim: usize,
    pub half_widths: Vec<f64>,
    pub resolutions: Vec<usize>,
    pub generators: Vec<Generator>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_placement")]
    pub placement: f64,
}

fn default_placement() -> f64 {
    2.0
}

#[derive(Clone, Debug)]
enum Shape {
    Boxes(Vec<(Vec<f64>, Vec<f64>)>),
    Bumps(Vec<(Vec<f64>, f64, f64)>),
    Spike(Vec<f64>),
}

impl Shape {
    fn sample(&self, geom: &Geometry) -> Result<GridFunction> {
        let dim = geom.dim;
        match self {
            Shape::Boxes(boxes) => GridFunction::from_fn(geom.clone(), |x| {
                let inside = boxes.iter().any(|(lo, hi)| (0..dim).all(|a| x[a] >= lo[a] && x[a] <= hi[a]));
                if inside {
                    1.0
                } else {
                    0.0
                }
            }),
            Shape::Bumps(bumps) => GridFunction::from_fn(geom.clone(), |x| {
                bumps
                    .iter()
                    .map(|(c, w, a)| {
                        let d2: f64 = (0..dim).map(|k| (x[k] - c[k]).powi(2)).sum();
                        a * (-d2 / (2.0 * w * w)).exp()
                    })
                    .sum()
            }),
            Shape::Spike(p) => {
                let mut idx = [0usize; 3];
                for a in 0..dim {
                    let lo_edge = geom.origin[a] - 0.5 * geom.spacing[a];
                    let k = ((p[a] - lo_edge) / geom.spacing[a]).floor();
                    idx[a] = (k.max(0.0) as usize).min(geom.shape[a] - 1);
                }
                let mut v = vec![0.0; geom.len()];
                v[geom.index(idx)] = 1.0;
                GridFunction::new(geom.clone(), v)
            }
        }
    }
}

impl ProbeSuite {
    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(Error::Config(format!("dimension must be 1, 2 or 3, got {}", self.dim)));
        }
        if self.half_widths.is_empty() || self.resolutions.is_empty() || self.generators.is_empty() {
            return Err(Error::Config("suite needs domains, resolutions and generators".into()));
        }
        let tmin = self.half_widths.iter().copied().fold(f64::INFINITY, f64::min);
        if !(tmin > 0.0) || !(self.placement > 0.0 && self.placement <= tmin) {
            return Err(Error::Config(format!("placement {} must lie in (0, smallest half width {tmin}]", self.placement)));
        }
        if self.resolutions.contains(&0) {
            return Err(Error::Config("resolutions must be positive".into()));
        }
        for g in &self.generators {
            if let Generator::Indicator { lo, hi } = g {
                if lo.len() != self.dim || hi.len() != self.dim {
                    return Err(Error::Config("indicator corners must have length dim".into()));
                }
            }
        }
        Ok(())
    }

    /// Domains and resolutions in suite order.
    pub fn geometries(&self) -> Result<Vec<(f64, usize, Geometry)>> {
        self.validate()?;
        let mut out = Vec::new();
        for &t in &self.half_widths {
            for &r in &self.resolutions {
                out.push((t, r, Geometry::centered_cube(self.dim, t, r)?));
            }
        }
        Ok(out)
    }

    fn shapes(&self) -> Vec<(String, Shape)> {
        let dim = self.dim;
        let pl = self.placement;
        let mut out = Vec::new();
        for (gi, g) in self.generators.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            rng.set_stream(gi as u64);
            let point = |rng: &mut ChaCha8Rng| (0..dim).map(|_| rng.random_range(-pl..pl)).collect::<Vec<f64>>();
            match g {
                Generator::Indicator { lo, hi } => {
                    out.push((format!("g{gi}-indicator"), Shape::Boxes(vec![(lo.clone(), hi.clone())])));
                }
                Generator::RandomUnion { count, max_rects, max_side } => {
                    for k in 0..*count {
                        let m = rng.random_range(1..=(*max_rects).max(1));
                        let boxes = (0..m)
                            .map(|_| {
                                let c = point(&mut rng);
                                let mut lo = vec![0.0; dim];
                                let mut hi = vec![0.0; dim];
                                for a in 0..dim {
                                    let side = max_side * 16f64.powf(rng.random::<f64>() - 1.0);
                                    lo[a] = (c[a] - side / 2.0).max(-pl);
                                    hi[a] = (c[a] + side / 2.0).min(pl);
                                }
                                (lo, hi)
                            })
                            .collect();
                        out.push((format!("g{gi}-union{k}"), Shape::Boxes(boxes)));
                    }
                }
                Generator::SmoothBump { count, width } => {
                    for k in 0..*count {
                        let m = rng.random_range(1..=3);
                        let bumps = (0..m).map(|_| (point(&mut rng), *width, rng.random_range(0.5..2.0))).collect();
                        out.push((format!("g{gi}-bump{k}"), Shape::Bumps(bumps)));
                    }
                }
                Generator::Spike { count } => {
                    for k in 0..*count {
                        out.push((format!("g{gi}-spike{k}"), Shape::Spike(point(&mut rng))));
                    }
                }
            }
        }
        out
    }

    /// Every test function sampled on `geom`, with its case id.
    pub fn cases_on(&self, geom: &Geometry) -> Result<Vec<(String, GridFunction)>> {
        self.validate()?;
        self.shapes().into_iter().map(|(id, s)| Ok((id, s.sample(geom)?))).collect()
    }
}

/// Positive field specified analytically, or a sampled grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldSpec {
    Constant { value: f64 },
    /// `exp(amplitude * sum_k sin(frequency * x_k + k))`.
    Wave { amplitude: f64, frequency: f64 },
    /// `(1 + |x|^2)^(exponent / 2)`.
    Radial { exponent: f64 },
    /// Only valid on its own geometry.
    #[serde(skip)]
    Sampled(GridFunction),
}

impl FieldSpec {
    /// Samples the field on `geom` and validates it as a weight.
    pub fn sample(&self, geom: &Geometry) -> Result<GridFunction> {
        let f = match self {
            FieldSpec::Constant { value } => GridFunction::constant(geom.clone(), *value)?,
            FieldSpec::Wave { amplitude, frequency } => GridFunction::from_fn(geom.clone(), |x| {
                let s: f64 = (0..geom.dim).map(|k| (frequency * x[k] + k as f64).sin()).sum();
                (amplitude * s).exp()
            })?,
            FieldSpec::Radial { exponent } => GridFunction::from_fn(geom.clone(), |x| {
                let r2: f64 = (0..geom.dim).map(|k| x[k] * x[k]).sum();
                (1.0 + r2).powf(exponent / 2.0)
            })?,
            FieldSpec::Sampled(g) => {
                if g.geometry() != geom {
                    return Err(Error::GeometryMismatch);
                }
                g.clone()
            }
        };
        ingest_weight(&f)
    }
}

// ---------------------------------------------------------------------------
// reports

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "certificate", rename_all = "snake_case")]
pub enum Certificate {
    Verdict { subject: String, verdict: Verdict },
    Condition { subject: String, report: ConditionReport },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioEntry {
    pub case: String,
    pub half_width: f64,
    pub resolution: usize,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendPoint {
    pub half_width: f64,
    pub resolution: usize,
    pub sup: f64,
    pub cases: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub probe: String,
    /// Sorted by domain, resolution and case id.
    pub entries: Vec<RatioEntry>,
    pub sup: f64,
    pub median: f64,
    /// Supremum per domain and resolution, in suite order.
    pub trend: Vec<TrendPoint>,
    /// Cases with a vanishing denominator.
    pub skipped: usize,
    pub certificates: Vec<Certificate>,
    /// Set when a certificate says the operator is unbounded; the observable
    /// is then growth rather than stability.
    pub expect_unbounded: bool,
    pub seed: u64,
}

impl RatioReport {
    fn build(probe: &str, geoms: &[(f64, usize, Geometry)], rows: Vec<(String, f64, usize, Option<f64>)>, seed: u64) -> Self {
        let skipped = rows.iter().filter(|r| r.3.is_none()).count();
        let mut entries: Vec<RatioEntry> = rows
            .into_iter()
            .filter_map(|(case, half_width, resolution, ratio)| Some(RatioEntry { case, half_width, resolution, ratio: ratio? }))
            .collect();
        entries.sort_by(|a, b| {
            a.half_width.total_cmp(&b.half_width).then(a.resolution.cmp(&b.resolution)).then(a.case.cmp(&b.case))
        });
        let mut sorted: Vec<f64> = entries.iter().map(|e| e.ratio).collect();
        sorted.sort_by(f64::total_cmp);
        let median = match sorted.len() {
            0 => f64::NAN,
            n if n % 2 == 1 => sorted[n / 2],
            n => 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]),
        };
        let trend = geoms
            .iter()
            .map(|(t, r, _)| {
                let here: Vec<f64> =
                    entries.iter().filter(|e| e.half_width == *t && e.resolution == *r).map(|e| e.ratio).collect();
                TrendPoint { half_width: *t, resolution: *r, sup: here.iter().copied().fold(0.0, f64::max), cases: here.len() }
            })
            .collect();
        RatioReport {
            probe: probe.to_string(),
            sup: sorted.last().copied().unwrap_or(f64::NAN),
            median,
            entries,
            trend,
            skipped,
            certificates: Vec::new(),
            expect_unbounded: false,
            seed,
        }
    }

    fn certify(mut self, certs: Vec<Certificate>) -> Self {
        self.expect_unbounded =
            certs.iter().any(|c| matches!(c, Certificate::Verdict { verdict, .. } if verdict.label == Label::Diverges));
        self.certificates = certs;
        self
    }

    /// `max sup / min sup - 1` over the trend points.
    pub fn trend_variation(&self) -> f64 {
        let sups: Vec<f64> = self.trend.iter().map(|t| t.sup).collect();
        let hi = sups.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = sups.iter().copied().fold(f64::INFINITY, f64::min);
        hi / lo - 1.0
    }
}

fn power_sum(f: &[f64], w: Option<&[f64]>, p: f64) -> f64 {
    match w {
        Some(w) => f.iter().zip(w).map(|(v, w)| v.powf(p) * w).sum(),
        None => f.iter().map(|v| v.powf(p) * 1.0).sum(),
    }
}

/// `(sum T^p a / sum f^p b)^(1/p)`; `None` when the denominator vanishes.
fn weighted_ratio(tf: &[f64], a: Option<&[f64]>, f: &[f64], b: Option<&[f64]>, p: f64) -> Option<f64> {
    let den = power_sum(f, b, p);
    if !(den > 0.0) {
        return None;
    }
    Some((power_sum(tf, a, p) / den).powf(1.0 / p))
}

fn bp_star_certificate(subject: &str, phi: &YoungFunction, p: f64, dim: usize) -> Result<Certificate> {
    Ok(Certificate::Verdict { subject: subject.to_string(), verdict: classify(phi, p, dim as u32, Mode::BpStar)? })
}

/// Complement used for growth certificates. The verdict is unchanged by a
/// constant factor, so a power `t^r` is replaced by `t^{r'}` rather than the
/// numeric conjugate, which overflows past the Legendre bracket.
fn certificate_complement(phi: &YoungFunction) -> Result<YoungFunction> {
    match phi.as_power() {
        Some(r) if r > 1.0 => YoungFunction::power(r / (r - 1.0)),
        _ => Ok(complementary(phi)),
    }
}

fn run_cases<T: Send + Sync>(
    suite: &ProbeSuite,
    geoms: &[(f64, usize, Geometry)],
    per_geom: impl Fn(&Geometry) -> Result<T> + Sync,
    per_case: impl Fn(&T, &GridFunction) -> Result<Option<f64>> + Sync,
) -> Result<Vec<(String, f64, usize, Option<f64>)>> {
    let mut rows = Vec::new();
    for (t, r, geom) in geoms {
        let ctx = per_geom(geom)?;
        let cases = suite.cases_on(geom)?;
        let ratios: Vec<Option<f64>> = cases.par_iter().map(|(_, f)| per_case(&ctx, f)).collect::<Result<_>>()?;
        rows.extend(cases.into_iter().zip(ratios).map(|((id, _), ratio)| (id, *t, *r, ratio)));
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// probes

/// `||M_Phi f||_p / ||f||_p` over the suite.
pub fn lp_bound_probe(phi: &YoungFunction, p: f64, basis: Basis, suite: &ProbeSuite) -> Result<RatioReport> {
    let geoms = suite.geometries()?;
    let rows = run_cases(suite, &geoms, |_| Ok(()), |_, f| {
        let m = orlicz_maximal(f, phi, basis)?;
        Ok(weighted_ratio(m.field.values(), None, f.values(), None, p))
    })?;
    let certs = vec![bp_star_certificate("phi", phi, p, suite.dim)?];
    Ok(RatioReport::build("lp_bound", &geoms, rows, suite.seed).certify(certs))
}

/// `(int (M_Phi f)^p w / int f^p M_R w)^(1/p)` over the suite. With `w = 1`
/// the ratios coincide bit for bit with [`lp_bound_probe`] over rectangles.
pub fn fefferman_stein_probe(
    phi: &YoungFunction,
    p: f64,
    w: &FieldSpec,
    lambda: f64,
    sampler: Option<&SetSampler>,
    suite: &ProbeSuite,
) -> Result<RatioReport> {
    let geoms = suite.geometries()?;
    let rows = run_cases(
        suite,
        &geoms,
        |geom| {
            let wg = w.sample(geom)?;
            let mw = strong_maximal(&wg, Basis::rectangles())?.field;
            Ok((wg, mw))
        },
        |(wg, mw), f| {
            let m = orlicz_maximal(f, phi, Basis::rectangles())?;
            Ok(weighted_ratio(m.field.values(), Some(wg.values()), f.values(), Some(mw.values()), p))
        },
    )?;
    let mut certs = vec![bp_star_certificate("phi", phi, p, suite.dim)?];
    if let Some(s) = sampler {
        let w0 = w.sample(&geoms[0].2)?;
        certs.push(Certificate::Condition { subject: "w".into(), report: condition_a_estimate(&w0, lambda, s)? });
    }
    Ok(RatioReport::build("fefferman_stein", &geoms, rows, suite.seed).certify(certs))
}

/// `M_{Phi-bar}` over `basis`. Power functions use the closed-form
/// complement `(r - 1) r^(-r') s^(r')`; other functions use a tabulation of
/// the numeric complement on `[1e-8, 1e8]`, or the complement itself when it
/// is infinite somewhere on that range.
pub fn complement_maximal(phi: &YoungFunction, g: &GridFunction, basis: Basis) -> Result<GridFunction> {
    if let Some(r) = phi.as_power() {
        if r == 1.0 {
            return GridFunction::constant(g.geometry().clone(), g.max_value());
        }
        let rc = r / (r - 1.0);
        let scale = ((r - 1.0) * r.powf(-rc)).powf(1.0 / rc);
        let m = orlicz_maximal(g, &YoungFunction::power(rc)?, basis)?;
        return m.field.map(|v| v * scale);
    }
    let bar = complementary(phi);
    let finite = [1e8, 1e4, 1.0].iter().all(|&s| bar.eval(s).is_finite());
    let bar = if finite { YoungFunction::tabulate_fn(|s| bar.eval(s), 1e-8, 1e8, 64).unwrap_or(bar) } else { bar };
    Ok(orlicz_maximal(g, &bar, basis)?.field)
}

/// Both sides of the transfer inequality:
/// `sum (M_R f)^p / (M_{Phi-bar}(u^(1/p)))^p` and `sum f^p / u`.
pub fn transfer_sides(phi: &YoungFunction, p: f64, f: &GridFunction, u: &GridFunction) -> Result<(f64, f64)> {
    if f.geometry() != u.geometry() {
        return Err(Error::GeometryMismatch);
    }
    let u = ingest_weight(u)?;
    let mf = strong_maximal(f, Basis::rectangles())?.field;
    let mbar = complement_maximal(phi, &u.map(|v| v.powf(1.0 / p))?, Basis::rectangles())?;
    let lhs = mf.values().iter().zip(mbar.values()).map(|(m, b)| (m / b).powf(p)).sum();
    let rhs = f.values().iter().zip(u.values()).map(|(f, u)| f.powf(p) / u).sum();
    Ok((lhs, rhs))
}

/// LHS / RHS of the transfer inequality for every suite function paired
/// with a random wave weight `u = exp(amplitude * sum_k sin(x_k + theta_k))`.
pub fn weighted_transfer_probe(phi: &YoungFunction, p: f64, amplitude: f64, suite: &ProbeSuite) -> Result<RatioReport> {
    let geoms = suite.geometries()?;
    let mut rows = Vec::new();
    for (t, r, geom) in &geoms {
        let cases = suite.cases_on(geom)?;
        let ratios: Vec<Option<f64>> = cases
            .par_iter()
            .enumerate()
            .map(|(k, (_, f))| {
                let mut rng = ChaCha8Rng::seed_from_u64(suite.seed);
                rng.set_stream(1_000_000 + k as u64);
                let theta: Vec<f64> = (0..suite.dim).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
                let u = GridFunction::from_fn(geom.clone(), |x| {
                    (amplitude * (0..suite.dim).map(|a| (x[a] + theta[a]).sin()).sum::<f64>()).exp()
                })?;
                let (lhs, rhs) = transfer_sides(phi, p, f, &u)?;
                Ok((rhs > 0.0).then(|| lhs / rhs))
            })
            .collect::<Result<_>>()?;
        rows.extend(cases.into_iter().zip(ratios).map(|((id, _), ratio)| (id, *t, *r, ratio)));
    }
    let certs = vec![bp_star_certificate("phi", phi, p, suite.dim)?];
    Ok(RatioReport::build("weighted_transfer", &geoms, rows, suite.seed).certify(certs))
}

/// Left side of the transfer inequality for `f` the unit-cube indicator and
/// `u_N = chi + chi_complement / N`, for each `N`. The sequence is
/// nondecreasing in `N`.
pub fn transfer_construction(phi: &YoungFunction, p: f64, geom: &Geometry, ns: &[f64]) -> Result<Vec<(f64, f64)>> {
    let dim = geom.dim;
    let f = GridFunction::indicator(geom.clone(), &vec![0.0; dim], &vec![1.0; dim])?;
    ns.iter()
        .map(|&n| {
            let u = f.map(|c| if c > 0.0 { 1.0 } else { 1.0 / n })?;
            Ok((n, transfer_sides(phi, p, &f, &u)?.0))
        })
        .collect()
}

/// `sum (u M_R f)^p / sum (v f)^p` over the suite.
#[allow(clippy::too_many_arguments)]
pub fn two_weight_probe(
    u: &FieldSpec,
    v: &FieldSpec,
    phi: &YoungFunction,
    p: f64,
    sampler: Option<&SetSampler>,
    bump_family: &FamilySpec,
    suite: &ProbeSuite,
) -> Result<RatioReport> {
    let geoms = suite.geometries()?;
    let rows = run_cases(
        suite,
        &geoms,
        |geom| Ok((u.sample(geom)?, v.sample(geom)?)),
        |(ug, vg), f| {
            let m = strong_maximal(f, Basis::rectangles())?.field;
            let num: f64 = m.values().iter().zip(ug.values()).map(|(m, u)| (u * m).powf(p)).sum();
            let den: f64 = f.values().iter().zip(vg.values()).map(|(f, v)| (v * f).powf(p)).sum();
            Ok((den > 0.0).then(|| num / den))
        },
    )?;
    let (u0, v0) = (u.sample(&geoms[0].2)?, v.sample(&geoms[0].2)?);
    let mut certs = vec![
        bp_star_certificate("complement of phi", &certificate_complement(phi)?, p, suite.dim)?,
        Certificate::Condition { subject: "(u, v)".into(), report: bump_constant(&u0, &v0, phi, p, bump_family)? },
    ];
    if let Some(s) = sampler {
        let lambda = 0.5;
        let up = u0.map(|x| x.powf(p))?;
        certs.push(Certificate::Condition { subject: "u^p".into(), report: condition_a_estimate(&up, lambda, s)? });
    }
    Ok(RatioReport::build("two_weight", &geoms, rows, suite.seed).certify(certs))
}

/// `(u, v) = (1 / M_Phi(g^(1/p)), g^(-1/p))` over rectangles, after raising
/// `g` to at least `1e-12 max g`. The pair satisfies the bump condition
/// with constant one.
pub fn necessity_construction(g: &GridFunction, p: f64, phi: &YoungFunction) -> Result<(GridFunction, GridFunction)> {
    if !(p > 1.0) {
        return Err(Error::Config(format!("p must exceed 1, got {p}")));
    }
    let max = g.max_value();
    if !(max > 0.0) {
        return Err(Error::DegenerateSet);
    }
    let floor = NECESSITY_FLOOR * max;
    let gc = g.map(|x| x.max(floor))?;
    let root = gc.map(|x| x.powf(1.0 / p))?;
    let m = orlicz_maximal(&root, phi, Basis::rectangles())?.field;
    Ok((m.map(|x| 1.0 / x)?, gc.map(|x| x.powf(-1.0 / p))?))
}

/// `||M(f_1, ..., f_m)||_{L^p(nu^p)} / prod_j ||f_j||_{L^{p_j}(w_j^{p_j})}`
/// with the multilinear strong maximal operator. The suite must produce the
/// weight system's geometry; function `j` of case `i` is case `i + j`.
pub fn multilinear_probe(
    sys: &WeightSystem,
    psis: &[YoungFunction],
    bump_family: &FamilySpec,
    suite: &ProbeSuite,
) -> Result<RatioReport> {
    let geoms = suite.geometries()?;
    if geoms.len() != 1 || &geoms[0].2 != sys.nu.geometry() {
        return Err(Error::GeometryMismatch);
    }
    let (t, r, geom) = &geoms[0];
    let cases = suite.cases_on(geom)?;
    let m = sys.ws.len();
    let nup: Vec<f64> = sys.nu.values().iter().map(|v| v.powf(sys.p)).collect();
    let wps: Vec<Vec<f64>> = sys.ws.iter().zip(&sys.ps).map(|(w, pj)| w.values().iter().map(|v| v.powf(*pj)).collect()).collect();
    let ratios: Vec<Option<f64>> = (0..cases.len())
        .into_par_iter()
        .map(|i| {
            let fs: Vec<GridFunction> = (0..m).map(|j| cases[(i + j) % cases.len()].1.clone()).collect();
            let mm = multilinear_maximal(&fs, Basis::rectangles())?.field;
            let num = power_sum(mm.values(), Some(&nup), sys.p).powf(1.0 / sys.p);
            let mut den = 1.0;
            for ((f, wp), pj) in fs.iter().zip(&wps).zip(&sys.ps) {
                den *= power_sum(f.values(), Some(wp), *pj).powf(1.0 / pj);
            }
            Ok((den > 0.0).then(|| num / den))
        })
        .collect::<Result<_>>()?;
    let rows = cases.into_iter().zip(ratios).map(|((id, _), ratio)| (id, *t, *r, ratio)).collect();
    let mut certs = vec![Certificate::Condition {
        subject: "(nu, w)".into(),
        report: multilinear_bump(sys, psis, bump_family)?,
    }];
    for (j, (psi, pj)) in psis.iter().zip(&sys.ps).enumerate() {
        certs.push(bp_star_certificate(&format!("complement of psi_{}", j + 1), &complementary(psi), *pj, suite.dim)?);
    }
    Ok(RatioReport::build("multilinear", &geoms, rows, suite.seed).certify(certs))
}

// ---------------------------------------------------------------------------
// closed forms for the unit-cube indicator

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormCheck {
    pub points: usize,
    pub max_rel_error: f64,
    /// Cell centre of the worst point.
    pub worst_point: Vec<f64>,
}

/// Compares the rectangle maximal function of the unit-cube indicator with
/// `1 / Phi^-1(y_1 ... y_n)` at cell centres with every coordinate above
/// `min_coord`. `phi = None` uses the plain average.
pub fn indicator_closed_form_check(
    phi: Option<&YoungFunction>,
    dim: usize,
    half_width: f64,
    resolution: usize,
    min_coord: f64,
) -> Result<ClosedFormCheck> {
    let geom = Geometry::centered_cube(dim, half_width, resolution)?;
    let f = GridFunction::indicator(geom.clone(), &vec![0.0; dim], &vec![1.0; dim])?;
    let field = match phi {
        Some(phi) => orlicz_maximal(&f, phi, Basis::rectangles())?.field,
        None => strong_maximal(&f, Basis::rectangles())?.field,
    };
    let mut check = ClosedFormCheck { points: 0, max_rel_error: 0.0, worst_point: vec![] };
    for (i, &m) in field.values().iter().enumerate() {
        let c = geom.center(geom.unflatten(i));
        if (0..dim).any(|a| c[a] <= min_coord) {
            continue;
        }
        let y: f64 = (0..dim).map(|a| c[a]).product();
        let exact = match phi {
            Some(phi) => 1.0 / inverse(phi, y, INVERSE_TOL)?,
            None => 1.0 / y,
        };
        let err = (m - exact).abs() / exact;
        check.points += 1;
        if err > check.max_rel_error || check.worst_point.is_empty() {
            check.max_rel_error = err;
            check.worst_point = c[..dim].to_vec();
        }
    }
    Ok(check)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubeConstantReport {
    pub points: usize,
    /// Range of `b(y) = |y|^n / Phi(1 / M(y))` over the points, with the
    /// Euclidean norm.
    pub b_min: f64,
    pub b_max: f64,
    /// Largest `|M(y) Phi^-1(s^n) - 1|`, where `s` is the side of the
    /// smallest grid cube containing the unit cube and the cell of `y`.
    pub max_rel_deviation: f64,
}

/// Cube maximal function of the unit-cube indicator at cell centres whose
/// largest coordinate is at least `min_max_coord` and all coordinates are
/// positive. The geometric constant `b` is reported, not fixed.
pub fn cube_indicator_constant(
    phi: &YoungFunction,
    dim: usize,
    half_width: f64,
    resolution: usize,
    min_max_coord: f64,
) -> Result<CubeConstantReport> {
    let geom = Geometry::centered_cube(dim, half_width, resolution)?;
    let f = GridFunction::indicator(geom.clone(), &vec![0.0; dim], &vec![1.0; dim])?;
    let field = orlicz_maximal(&f, phi, Basis::cubes())?.field;
    let h = 1.0 / resolution as f64;
    let mut rep = CubeConstantReport { points: 0, b_min: f64::INFINITY, b_max: 0.0, max_rel_deviation: 0.0 };
    for (i, &m) in field.values().iter().enumerate() {
        let c = geom.center(geom.unflatten(i));
        let top = (0..dim).map(|a| c[a]).fold(f64::NEG_INFINITY, f64::max);
        if (0..dim).any(|a| c[a] <= 0.0) || top < min_max_coord {
            continue;
        }
        let s = top + 0.5 * h;
        let norm2: f64 = (0..dim).map(|a| c[a] * c[a]).sum::<f64>().sqrt();
        let b = norm2.powi(dim as i32) / phi.eval(1.0 / m);
        rep.b_min = rep.b_min.min(b);
        rep.b_max = rep.b_max.max(b);
        let dev = (m * inverse(phi, s.powi(dim as i32), INVERSE_TOL)? - 1.0).abs();
        rep.max_rel_deviation = rep.max_rel_deviation.max(dev);
        rep.points += 1;
    }
    Ok(rep)
}

// ---------------------------------------------------------------------------
// generalized Hölder

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TripleKind {
    Uniform,
    HeavyTailed,
    Sparse,
    ColocatedSpikes,
    GOne,
    EqualIndicators,
}

const TRIPLE_KINDS: [TripleKind; 6] = [
    TripleKind::Uniform,
    TripleKind::HeavyTailed,
    TripleKind::Sparse,
    TripleKind::ColocatedSpikes,
    TripleKind::GOne,
    TripleKind::EqualIndicators,
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderCase {
    pub index: usize,
    pub kind: TripleKind,
    pub cells: usize,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderReport {
    pub phi: String,
    pub triples: usize,
    pub violations: usize,
    /// Largest `mean(f g) / (2 ||f||_Phi ||g||_{Phi-bar})`.
    pub worst: HolderCase,
    pub slack: f64,
    pub pass: bool,
    pub seed: u64,
}

/// Values of `f` and `g` on a random rectangle of an 8 x 8 grid.
fn holder_triple(kind: TripleKind, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let (a, b) = (rng.random_range(1..=8usize), rng.random_range(1..=8usize));
    let n = a * b;
    let mut f = vec![0.0; n];
    let mut g = vec![0.0; n];
    match kind {
        TripleKind::Uniform => {
            f.iter_mut().for_each(|v| *v = rng.random::<f64>());
            g.iter_mut().for_each(|v| *v = rng.random::<f64>());
        }
        TripleKind::HeavyTailed => {
            f.iter_mut().for_each(|v| *v = (8.0 * rng.random::<f64>() - 4.0).exp());
            g.iter_mut().for_each(|v| *v = (8.0 * rng.random::<f64>() - 4.0).exp());
        }
        TripleKind::Sparse => {
            for _ in 0..rng.random_range(1..=3) {
                f[rng.random_range(0..n)] = rng.random_range(0.1..100.0);
                g[rng.random_range(0..n)] = rng.random_range(0.1..100.0);
            }
        }
        TripleKind::ColocatedSpikes => {
            let k = rng.random_range(0..n);
            f[k] = 10f64.powf(rng.random_range(-3.0..3.0));
            g[k] = 10f64.powf(rng.random_range(-3.0..3.0));
        }
        TripleKind::GOne => {
            f.iter_mut().for_each(|v| *v = rng.random::<f64>() * 10.0);
            g.iter_mut().for_each(|v| *v = 1.0);
        }
        TripleKind::EqualIndicators => {
            let m = rng.random_range(1..=n);
            for v in f.iter_mut().take(m) {
                *v = 1.0;
            }
            g.copy_from_slice(&f);
        }
    }
    (f, g)
}

/// Checks `mean_R(f g) <= 2 ||f||_{Phi,R} ||g||_{Phi-bar,R}` on `triples`
/// random triples, cycling through the [`TripleKind`]s.
pub fn holder_orlicz_suite(phi: &YoungFunction, triples: usize, seed: u64) -> Result<HolderReport> {
    if triples == 0 {
        return Err(Error::Config("need at least one triple".into()));
    }
    let bar = complementary(phi);
    let cases: Vec<HolderCase> = (0..triples)
        .into_par_iter()
        .map_init(
            || (LuxemburgSolver::new(phi, LUXEMBURG_TOL), LuxemburgSolver::new(&bar, LUXEMBURG_TOL)),
            |(sf, sg), i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                let kind = TRIPLE_KINDS[i % TRIPLE_KINDS.len()];
                let (f, g) = holder_triple(kind, &mut rng);
                let lhs = f.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>() / f.len() as f64;
                let rhs = 2.0 * sf.solve(&f) * sg.solve(&g);
                let ratio = if lhs == 0.0 { 0.0 } else { lhs / rhs };
                HolderCase { index: i, kind, cells: f.len(), ratio }
            },
        )
        .collect();
    let violations = cases.iter().filter(|c| !(c.ratio <= 1.0 + HOLDER_SLACK)).count();
    let worst = cases
        .iter()
        .max_by(|a, b| a.ratio.total_cmp(&b.ratio).then(b.index.cmp(&a.index)))
        .cloned()
        .expect("at least one triple");
    Ok(HolderReport {
        phi: phi.to_string(),
        triples,
        violations,
        worst,
        slack: HOLDER_SLACK,
        pass: violations == 0,
        seed,
    })
}

// ---------------------------------------------------------------------------
// counterexample growth

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleConfig {
    #[serde(default = "two")]
    pub p: f64,
    #[serde(default = "half")]
    pub delta: f64,
    /// Lower corner of the square `[lower, T]^2`.
    #[serde(default = "four")]
    pub lower: f64,
    /// Doubling sequence of cutoffs `T`.
    #[serde(default = "default_cutoffs")]
    pub cutoffs: Vec<f64>,
    /// Simpson subintervals per half of the quadrature range.
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    /// Largest successive increment ratio accepted as geometric decay.
    #[serde(default = "default_geometric")]
    pub geometric_ratio: f64,
}

fn two() -> f64 {
    2.0
}
fn half() -> f64 {
    0.5
}
fn four() -> f64 {
    4.0
}
fn default_cutoffs() -> Vec<f64> {
    vec![16.0, 32.0, 64.0, 128.0, 256.0]
}
fn default_nodes() -> usize {
    2000
}
fn default_geometric() -> f64 {
    0.75
}

impl Default for CounterexampleConfig {
    fn default() -> Self {
        CounterexampleConfig {
            p: two(),
            delta: half(),
            lower: four(),
            cutoffs: default_cutoffs(),
            nodes: default_nodes(),
            geometric_ratio: default_geometric(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthTable {
    pub phi: String,
    pub cutoffs: Vec<f64>,
    /// `I(T)` for each cutoff.
    pub partials: Vec<f64>,
    /// `I(2T) - I(T)` for each cutoff but the last.
    pub increments: Vec<f64>,
    /// Successive increment ratios.
    pub ratios: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleReport {
    pub config: CounterexampleConfig,
    pub counterexample: GrowthTable,
    pub control: GrowthTable,
    pub increments_nondecreasing: bool,
    pub control_geometric: bool,
    pub bp: Verdict,
    pub bp_star: Verdict,
}

/// `t^p / log(1 + t)^(1 + delta)` tabulated on `[1e-6, 1e12]`, 512 knots
/// per decade.
pub fn counterexample_phi(p: f64, delta: f64) -> Result<YoungFunction> {
    YoungFunction::tabulate_fn(|t| t.powf(p) / t.ln_1p().powf(1.0 + delta), 1e-6, 1e12, 512)
}

/// `int_{[a,T]^2} F(y_1 y_2) dy` for `F(y) = Phi^-1(y)^(-p)`. In logarithmic
/// coordinates the integrand depends on `U = u_1 + u_2` only, which leaves a
/// one-dimensional integral with the triangular weight
/// `min(U - 2 ln a, 2 ln T - U)`; composite Simpson on each side of the kink.
pub fn closed_form_partial(phi: &YoungFunction, p: f64, a: f64, t: f64, nodes: usize) -> Result<f64> {
    if !(t > a && a > 0.0) {
        return Err(Error::Config(format!("need 0 < lower < T, got {a} and {t}")));
    }
    let (la, lb) = (a.ln(), t.ln());
    let g = |u: f64| -> Result<f64> {
        let y = u.exp();
        Ok(y * inverse(phi, y, INVERSE_TOL)?.powf(-p))
    };
    let n = nodes.max(2) + nodes % 2;
    let mut total = 0.0;
    for (lo, hi, rising) in [(2.0 * la, la + lb, true), (la + lb, 2.0 * lb, false)] {
        let h = (hi - lo) / n as f64;
        let mut s = 0.0;
        for k in 0..=n {
            let u = lo + k as f64 * h;
            let weight = if rising { u - 2.0 * la } else { 2.0 * lb - u };
            let c = if k == 0 || k == n {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            s += c * weight * g(u)?;
        }
        total += s * h / 3.0;
    }
    Ok(total)
}

fn growth_table(phi: &YoungFunction, name: &str, cfg: &CounterexampleConfig) -> Result<GrowthTable> {
    let partials: Vec<f64> =
        cfg.cutoffs.iter().map(|&t| closed_form_partial(phi, cfg.p, cfg.lower, t, cfg.nodes)).collect::<Result<_>>()?;
    let increments: Vec<f64> = partials.windows(2).map(|w| w[1] - w[0]).collect();
    let ratios = increments.windows(2).map(|w| w[1] / w[0]).collect();
    Ok(GrowthTable { phi: name.to_string(), cutoffs: cfg.cutoffs.clone(), partials, increments, ratios })
}

/// Growth of `int_{[4,T]^2} (M_Phi chi_{[0,1]^2})^p` through the closed-form
/// field `1 / Phi^-1(y_1 y_2)`, for the counterexample function and for the
/// control `Phi(t) = t`.
pub fn counterexample_growth(cfg: &CounterexampleConfig) -> Result<CounterexampleReport> {
    if cfg.cutoffs.len() < 3 || cfg.cutoffs.windows(2).any(|w| (w[1] - 2.0 * w[0]).abs() > 1e-12 * w[1]) {
        return Err(Error::Config("cutoffs must be a doubling sequence of length at least 3".into()));
    }
    if cfg.cutoffs[0] <= cfg.lower {
        return Err(Error::Config("cutoffs must exceed the lower corner".into()));
    }
    if !(cfg.delta > 0.0 && cfg.delta < 1.0 && cfg.p > 1.0) {
        return Err(Error::Config("need p > 1 and delta in (0, 1)".into()));
    }
    let phi = counterexample_phi(cfg.p, cfg.delta)?;
    let name = format!("t^{} / log(1+t)^{}", cfg.p, 1.0 + cfg.delta);
    let counterexample = growth_table(&phi, &name, cfg)?;
    let control = growth_table(&YoungFunction::power(1.0)?, "t", cfg)?;
    Ok(CounterexampleReport {
        increments_nondecreasing: counterexample.increments.windows(2).all(|w| w[1] >= w[0]),
        control_geometric: control.ratios.iter().all(|&r| r > 0.0 && r <= cfg.geometric_ratio),
        bp: classify(&phi, cfg.p, 2, Mode::Bp)?,
        bp_star: classify(&phi, cfg.p, 2, Mode::BpStar)?,
        config: cfg.clone(),
        counterexample,
        control,
    })
}

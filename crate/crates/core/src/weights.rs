//! Weight-condition constants estimated as maxima over finite rectangle
//! families.
//!
//! Every reported constant is a lower bound for the supremum over all basis
//! members; the family that produced it is recorded in the report. Reports
//! carry their witness, and the per-member evaluators are public so that a
//! witness can be re-evaluated independently.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covering::random_rect;
use crate::error::{Error, Result};
use crate::grid::{Geometry, GridFunction, LuxemburgSolver, Rect, SummedAreaTable, LUXEMBURG_TOL};
use crate::maximal::{lengths, strong_maximal_with, Basis, BasisKind, MaximalOptions};
use crate::young::YoungFunction;

/// Weights below this are raised to it at ingestion.
pub const WEIGHT_FLOOR: f64 = 1e-300;

/// Largest family enumerated exhaustively.
pub const MAX_EXHAUSTIVE: u64 = 50_000_000;

/// Validates a weight: zero cells are rejected, tiny positive cells are
/// raised to [`WEIGHT_FLOOR`].
pub fn ingest_weight(w: &GridFunction) -> Result<GridFunction> {
    if let Some(i) = w.values().iter().position(|&v| v == 0.0) {
        return Err(Error::InvalidWeight(format!("weight vanishes at cell {i}")));
    }
    w.map(|v| v.max(WEIGHT_FLOOR))
}

fn pow_field(w: &GridFunction, e: f64) -> Result<Vec<f64>> {
    w.values()
        .iter()
        .map(|&v| {
            let x = v.powf(e);
            if x.is_finite() {
                Ok(x)
            } else {
                Err(Error::NonFinite { t: v })
            }
        })
        .collect()
}

fn sat_of(w: &GridFunction, e: f64) -> Result<SummedAreaTable> {
    let vals = if e == 1.0 { w.values().to_vec() } else { pow_field(w, e)? };
    Ok(SummedAreaTable::from_values(w.dim(), w.geometry().shape3(), &vals))
}

fn conjugate(p: f64) -> f64 {
    p / (p - 1.0)
}

fn check_p(p: f64) -> Result<()> {
    if p > 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("exponent must lie in (1, inf), got {p}")))
    }
}

// ---------------------------------------------------------------------------
// families

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "sampling", rename_all = "snake_case")]
pub enum Sampling {
    /// Every basis member on the grid.
    Exhaustive,
    /// Random members: per axis a dyadic size class, then a length in the
    /// class, then a position, all uniform.
    Stratified { samples: usize, seed: u64 },
    Explicit { rects: Vec<Rect> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub basis: Basis,
    #[serde(flatten)]
    pub sampling: Sampling,
}

const CHUNK: usize = 1024;

impl FamilySpec {
    pub fn exhaustive(basis: Basis) -> Self {
        FamilySpec { basis, sampling: Sampling::Exhaustive }
    }

    pub fn stratified(basis: Basis, samples: usize, seed: u64) -> Self {
        FamilySpec { basis, sampling: Sampling::Stratified { samples, seed } }
    }

    pub fn explicit(basis: Basis, rects: Vec<Rect>) -> Self {
        FamilySpec { basis, sampling: Sampling::Explicit { rects } }
    }

    /// Number of members on `geom`.
    pub fn count(&self, geom: &Geometry) -> u64 {
        match &self.sampling {
            Sampling::Exhaustive => {
                let shape = &geom.shape;
                let per = |n: usize| lengths(&self.basis, n).iter().map(|&l| (n - l + 1) as u64).collect::<Vec<_>>();
                match self.basis.kind {
                    BasisKind::Cubes => {
                        let n = *shape.iter().min().unwrap_or(&0);
                        lengths(&self.basis, n)
                            .iter()
                            .map(|&l| shape.iter().map(|&m| (m - l + 1) as u64).product::<u64>())
                            .sum()
                    }
                    _ => shape.iter().map(|&n| per(n).iter().sum::<u64>()).product(),
                }
            }
            Sampling::Stratified { samples, .. } => *samples as u64,
            Sampling::Explicit { rects } => rects.len() as u64,
        }
    }

    /// Members in a fixed order, split into groups that are evaluated
    /// independently.
    fn groups(&self, geom: &Geometry) -> Result<Groups<'_>> {
        match &self.sampling {
            Sampling::Exhaustive => {
                let n = self.count(geom);
                if n == 0 {
                    return Err(Error::Config("no basis member fits the grid".into()));
                }
                if n > MAX_EXHAUSTIVE {
                    return Err(Error::Config(format!(
                        "exhaustive family has {n} members (limit {MAX_EXHAUSTIVE}); use stratified sampling"
                    )));
                }
                Ok(Groups::Exhaustive(geom.shape[0]))
            }
            Sampling::Stratified { samples, seed } => Ok(Groups::Listed(self.sample(geom, *samples, *seed)?.into())),
            Sampling::Explicit { rects } => {
                for r in rects {
                    r.check_within(geom)?;
                }
                Ok(Groups::Listed(rects.as_slice().into()))
            }
        }
    }

    /// All exhaustive members whose first-axis range starts at `a0`.
    fn exhaustive_group(&self, geom: &Geometry, a0: usize, out: &mut Vec<Rect>) {
        out.clear();
        let dim = geom.dim;
        let shape = &geom.shape;
        match self.basis.kind {
            BasisKind::Cubes => {
                let n = *shape.iter().min().unwrap_or(&0);
                for l in lengths(&self.basis, n) {
                    if a0 + l > shape[0] {
                        continue;
                    }
                    let mut r = Rect { dim, lo: [a0, 0, 0], hi: [a0 + l, 1, 1] };
                    let mut ranges = |r: &mut dyn FnMut((usize, usize)), axis: usize| {
                        for a in 0..=shape[axis] - l {
                            r((a, a + l));
                        }
                    };
                    positions(dim, 1, &mut r, &mut ranges, out);
                }
            }
            _ => {
                for l in lengths(&self.basis, shape[0]) {
                    if a0 + l > shape[0] {
                        continue;
                    }
                    let mut r = Rect { dim, lo: [a0, 0, 0], hi: [a0 + l, 1, 1] };
                    let mut ranges = |r: &mut dyn FnMut((usize, usize)), axis: usize| {
                        for l in lengths(&self.basis, shape[axis]) {
                            for a in 0..=shape[axis] - l {
                                r((a, a + l));
                            }
                        }
                    };
                    positions(dim, 1, &mut r, &mut ranges, out);
                }
            }
        }
    }

    fn sample(&self, geom: &Geometry, samples: usize, seed: u64) -> Result<Vec<Rect>> {
        let dim = geom.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let classes = |n: usize| -> Vec<Vec<usize>> {
            let mut by_class: Vec<Vec<usize>> = Vec::new();
            for l in lengths(&self.basis, n) {
                let c = (usize::BITS - 1 - l.leading_zeros()) as usize;
                if by_class.len() <= c {
                    by_class.resize(c + 1, Vec::new());
                }
                by_class[c].push(l);
            }
            by_class.into_iter().filter(|c| !c.is_empty()).collect()
        };
        let cube_n = *geom.shape.iter().min().unwrap_or(&0);
        let axis_classes: Vec<Vec<Vec<usize>>> = match self.basis.kind {
            BasisKind::Cubes => vec![classes(cube_n)],
            _ => geom.shape.iter().map(|&n| classes(n)).collect(),
        };
        if axis_classes.iter().any(|c| c.is_empty()) {
            return Err(Error::Config("no basis member fits the grid".into()));
        }
        let pick = |cl: &Vec<Vec<usize>>, rng: &mut ChaCha8Rng| {
            let c = &cl[rng.random_range(0..cl.len())];
            c[rng.random_range(0..c.len())]
        };
        let mut out = Vec::with_capacity(samples);
        for _ in 0..samples {
            let mut r = Rect { dim, lo: [0; 3], hi: [1; 3] };
            let cube_l = if self.basis.kind == BasisKind::Cubes { pick(&axis_classes[0], &mut rng) } else { 0 };
            for a in 0..dim {
                let l = if self.basis.kind == BasisKind::Cubes { cube_l } else { pick(&axis_classes[a], &mut rng) };
                let lo = rng.random_range(0..=geom.shape[a] - l);
                r.lo[a] = lo;
                r.hi[a] = lo + l;
            }
            out.push(r);
        }
        Ok(out)
    }
}

/// Fills axes `axis..dim` of `r` with every range produced by `ranges` and
/// pushes the completed rectangles.
fn positions(
    dim: usize,
    axis: usize,
    r: &mut Rect,
    ranges: &mut dyn FnMut(&mut dyn FnMut((usize, usize)), usize),
    out: &mut Vec<Rect>,
) {
    if axis == dim {
        out.push(*r);
        return;
    }
    let mut list = Vec::new();
    ranges(&mut |x| list.push(x), axis);
    for (lo, hi) in list {
        r.lo[axis] = lo;
        r.hi[axis] = hi;
        positions(dim, axis + 1, r, ranges, out);
    }
}

enum Groups<'a> {
    Exhaustive(usize),
    Listed(std::borrow::Cow<'a, [Rect]>),
}

/// Per-member evaluation of a condition.
pub trait MemberEval: Sync {
    type Scratch: Send;
    fn scratch(&self) -> Self::Scratch;
    fn eval_with(&self, s: &mut Self::Scratch, r: &Rect) -> f64;
    fn geometry(&self) -> &Geometry;

    fn eval(&self, r: &Rect) -> f64 {
        self.eval_with(&mut self.scratch(), r)
    }
}

#[derive(Clone, Copy, Debug)]
struct Best {
    value: f64,
    rect: Option<Rect>,
    order: (usize, usize),
    count: u64,
}

impl Best {
    fn empty() -> Self {
        Best { value: f64::NEG_INFINITY, rect: None, order: (usize::MAX, usize::MAX), count: 0 }
    }

    fn offer(&mut self, value: f64, rect: &Rect, order: (usize, usize)) {
        self.count += 1;
        if value > self.value || (value == self.value && order < self.order) {
            self.value = value;
            self.rect = Some(*rect);
            self.order = order;
        }
    }

    fn merge(mut self, o: Best) -> Best {
        let count = self.count + o.count;
        if o.value > self.value || (o.value == self.value && o.order < self.order) {
            self = o;
        }
        self.count = count;
        self
    }
}

fn scan<E: MemberEval>(family: &FamilySpec, ev: &E) -> Result<Best> {
    let geom = ev.geometry();
    let best = match family.groups(geom)? {
        Groups::Exhaustive(n0) => (0..n0)
            .into_par_iter()
            .map_init(
                || (ev.scratch(), Vec::new()),
                |(s, buf), a0| {
                    family.exhaustive_group(geom, a0, buf);
                    let mut b = Best::empty();
                    for (i, r) in buf.iter().enumerate() {
                        b.offer(ev.eval_with(s, r), r, (a0, i));
                    }
                    b
                },
            )
            .reduce(Best::empty, Best::merge),
        Groups::Listed(rects) => rects
            .par_chunks(CHUNK)
            .enumerate()
            .map_init(ev_scratch(ev), |s, (g, chunk)| {
                let mut b = Best::empty();
                for (i, r) in chunk.iter().enumerate() {
                    b.offer(ev.eval_with(s, r), r, (g, i));
                }
                b
            })
            .reduce(Best::empty, Best::merge),
    };
    if best.rect.is_none() {
        return Err(Error::Config("empty rectangle family".into()));
    }
    Ok(best)
}

fn ev_scratch<E: MemberEval>(ev: &E) -> impl Fn() -> E::Scratch + '_ {
    move || ev.scratch()
}

// ---------------------------------------------------------------------------
// reports

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub kind: String,
    /// Maximum over the evaluated members; a lower bound for the supremum
    /// over the whole basis.
    pub sup_constant: f64,
    pub lower_bound: bool,
    pub argmax_rect: Option<Rect>,
    /// Witness set for condition (A).
    pub argmax_set: Option<Vec<Rect>>,
    pub samples_evaluated: u64,
    pub family: serde_json::Value,
    pub note: String,
}

fn report(kind: &str, best: Best, family: &FamilySpec, note: &str) -> ConditionReport {
    ConditionReport {
        kind: kind.to_string(),
        sup_constant: best.value,
        lower_bound: true,
        argmax_rect: best.rect,
        argmax_set: None,
        samples_evaluated: best.count,
        family: serde_json::to_value(family).unwrap_or(serde_json::Value::Null),
        note: note.to_string(),
    }
}

// ---------------------------------------------------------------------------
// Luxemburg norms of a fixed field over rectangles

/// `||f||_{Phi,R}` for a fixed `f` and varying `R`; power functions go
/// through a summed-area table of `f^r`.
pub struct RectNorm<'a> {
    f: GridFunction,
    phi: &'a YoungFunction,
    power: Option<(f64, SummedAreaTable)>,
}

impl<'a> RectNorm<'a> {
    pub fn new(f: GridFunction, phi: &'a YoungFunction) -> Result<Self> {
        let power = match phi.as_power() {
            Some(r) => Some((r, sat_of(&f, r)?)),
            None => None,
        };
        Ok(RectNorm { f, phi, power })
    }

    pub fn scratch(&self) -> (LuxemburgSolver<'a>, Vec<f64>) {
        (LuxemburgSolver::new(self.phi, LUXEMBURG_TOL), Vec::new())
    }

    pub fn eval_with(&self, s: &mut (LuxemburgSolver<'a>, Vec<f64>), r: &Rect) -> f64 {
        if let Some((p, sat)) = &self.power {
            let m = sat.mean(r).max(0.0);
            return if *p == 1.0 { m } else { m.powf(1.0 / p) };
        }
        let (solver, buf) = s;
        buf.clear();
        let (mut sum, mut max) = (0.0, 0.0f64);
        let geom = self.f.geometry();
        let vals = self.f.values();
        for i in r.lo[0]..r.hi[0] {
            for j in r.lo[1]..r.hi[1] {
                let row = geom.index([i, j, r.lo[2]]);
                for &v in &vals[row..row + r.side(2)] {
                    sum += v;
                    max = max.max(v);
                    buf.push(v);
                }
            }
        }
        solver.solve_with_stats(buf, sum, max)
    }
}

// ---------------------------------------------------------------------------
// two-weight bump

/// `(mean_R u^p)^(1/p) * ||v^-1||_{Phi,R}`.
pub struct BumpEval<'a> {
    geom: Geometry,
    up: SummedAreaTable,
    p: f64,
    vinv: RectNorm<'a>,
}

impl<'a> BumpEval<'a> {
    pub fn new(u: &GridFunction, v: &GridFunction, phi: &'a YoungFunction, p: f64) -> Result<Self> {
        check_p(p)?;
        if u.geometry() != v.geometry() {
            return Err(Error::GeometryMismatch);
        }
        let u = ingest_weight(u)?;
        let v = ingest_weight(v)?;
        let vinv = GridFunction::new(v.geometry().clone(), pow_field(&v, -1.0)?)?;
        Ok(BumpEval { geom: u.geometry().clone(), up: sat_of(&u, p)?, p, vinv: RectNorm::new(vinv, phi)? })
    }
}

impl<'a> MemberEval for BumpEval<'a> {
    type Scratch = (LuxemburgSolver<'a>, Vec<f64>);
    fn scratch(&self) -> Self::Scratch {
        self.vinv.scratch()
    }
    fn eval_with(&self, s: &mut Self::Scratch, r: &Rect) -> f64 {
        self.up.mean(r).max(0.0).powf(1.0 / self.p) * self.vinv.eval_with(s, r)
    }
    fn geometry(&self) -> &Geometry {
        &self.geom
    }
}

pub fn bump_constant(
    u: &GridFunction,
    v: &GridFunction,
    phi: &YoungFunction,
    p: f64,
    family: &FamilySpec,
) -> Result<ConditionReport> {
    let ev = BumpEval::new(u, v, phi, p)?;
    Ok(report("bump", scan(family, &ev)?, family, "max of (mean u^p)^(1/p) ||1/v||_(Phi,R) over the family"))
}

// ---------------------------------------------------------------------------
// weight systems

/// `(nu, w_1, ..., w_m)` with exponents `1/p = sum 1/p_j`.
#[derive(Clone, Debug)]
pub struct WeightSystem {
    pub nu: GridFunction,
    pub ws: Vec<GridFunction>,
    pub p: f64,
    pub ps: Vec<f64>,
}

impl WeightSystem {
    /// `p` is derived from the `p_j`.
    pub fn new(nu: &GridFunction, ws: &[GridFunction], ps: &[f64]) -> Result<Self> {
        if ws.is_empty() || ws.len() != ps.len() {
            return Err(Error::Config(format!("{} weights for {} exponents", ws.len(), ps.len())));
        }
        for &pj in ps {
            check_p(pj)?;
        }
        if ws.iter().any(|w| w.geometry() != nu.geometry()) {
            return Err(Error::GeometryMismatch);
        }
        let p = 1.0 / ps.iter().map(|pj| 1.0 / pj).sum::<f64>();
        Ok(WeightSystem {
            nu: ingest_weight(nu)?,
            ws: ws.iter().map(ingest_weight).collect::<Result<_>>()?,
            p,
            ps: ps.to_vec(),
        })
    }

    /// Residual of the exponent identity.
    pub fn holder_residual(&self) -> f64 {
        (1.0 / self.p - self.ps.iter().map(|pj| 1.0 / pj).sum::<f64>()).abs()
    }
}

/// `(mean_R nu) * prod_j (mean_R w_j^((1 - p_j') r))^(p / (p_j' r))`.
pub struct PowerBumpEval {
    geom: Geometry,
    nu: SummedAreaTable,
    factors: Vec<(SummedAreaTable, f64)>,
}

impl PowerBumpEval {
    pub fn new(sys: &WeightSystem, r: f64) -> Result<Self> {
        if !(r > 1.0 && r.is_finite()) {
            return Err(Error::Config(format!("bump exponent must exceed 1, got {r}")));
        }
        let factors = sys
            .ws
            .iter()
            .zip(&sys.ps)
            .map(|(w, &pj)| {
                let pc = conjugate(pj);
                Ok((sat_of(w, (1.0 - pc) * r)?, sys.p / (pc * r)))
            })
            .collect::<Result<_>>()?;
        Ok(PowerBumpEval { geom: sys.nu.geometry().clone(), nu: sat_of(&sys.nu, 1.0)?, factors })
    }
}

impl MemberEval for PowerBumpEval {
    type Scratch = ();
    fn scratch(&self) {}
    fn eval_with(&self, _: &mut (), r: &Rect) -> f64 {
        let mut acc = self.nu.mean(r);
        for (sat, e) in &self.factors {
            acc *= sat.mean(r).max(0.0).powf(*e);
        }
        acc
    }
    fn geometry(&self) -> &Geometry {
        &self.geom
    }
}

pub fn power_bump_constant(sys: &WeightSystem, r: f64, family: &FamilySpec) -> Result<ConditionReport> {
    let ev = PowerBumpEval::new(sys, r)?;
    let note = format!("power bump with r = {r}, p = {}", sys.p);
    Ok(report("power_bump", scan(family, &ev)?, family, &note))
}

/// `(mean_R nu^p)^(1/p) * prod_j ||w_j^-1||_{Psi_j,R}`.
pub struct MultilinearBumpEval<'a> {
    geom: Geometry,
    nup: SummedAreaTable,
    p: f64,
    norms: Vec<RectNorm<'a>>,
}

impl<'a> MultilinearBumpEval<'a> {
    pub fn new(sys: &WeightSystem, psis: &'a [YoungFunction]) -> Result<Self> {
        if psis.len() != sys.ws.len() {
            return Err(Error::Config(format!("{} weights but {} Young functions", sys.ws.len(), psis.len())));
        }
        let norms = sys
            .ws
            .iter()
            .zip(psis)
            .map(|(w, psi)| RectNorm::new(GridFunction::new(w.geometry().clone(), pow_field(w, -1.0)?)?, psi))
            .collect::<Result<_>>()?;
        Ok(MultilinearBumpEval { geom: sys.nu.geometry().clone(), nup: sat_of(&sys.nu, sys.p)?, p: sys.p, norms })
    }
}

impl<'a> MemberEval for MultilinearBumpEval<'a> {
    type Scratch = Vec<(LuxemburgSolver<'a>, Vec<f64>)>;
    fn scratch(&self) -> Self::Scratch {
        self.norms.iter().map(|n| n.scratch()).collect()
    }
    fn eval_with(&self, s: &mut Self::Scratch, r: &Rect) -> f64 {
        let mut acc = self.nup.mean(r).max(0.0).powf(1.0 / self.p);
        for (n, sn) in self.norms.iter().zip(s.iter_mut()) {
            acc *= n.eval_with(sn, r);
        }
        acc
    }
    fn geometry(&self) -> &Geometry {
        &self.geom
    }
}

/// Uniform-constant form of the multilinear Orlicz bump condition.
pub fn multilinear_bump(sys: &WeightSystem, psis: &[YoungFunction], family: &FamilySpec) -> Result<ConditionReport> {
    let ev = MultilinearBumpEval::new(sys, psis)?;
    let note = "max of (mean nu^p)^(1/p) prod_j ||1/w_j||_(Psi_j,R); read as a uniform bound";
    Ok(report("multilinear_bump", scan(family, &ev)?, family, note))
}

// ---------------------------------------------------------------------------
// A_p

/// `(mean_R w) * (mean_R w^(1 - p'))^(p / p')`.
pub struct ApEval {
    geom: Geometry,
    w: SummedAreaTable,
    dual: SummedAreaTable,
    e: f64,
}

impl ApEval {
    pub fn new(w: &GridFunction, p: f64) -> Result<Self> {
        check_p(p)?;
        let w = ingest_weight(w)?;
        let pc = conjugate(p);
        Ok(ApEval { geom: w.geometry().clone(), w: sat_of(&w, 1.0)?, dual: sat_of(&w, 1.0 - pc)?, e: p / pc })
    }
}

impl MemberEval for ApEval {
    type Scratch = ();
    fn scratch(&self) {}
    fn eval_with(&self, _: &mut (), r: &Rect) -> f64 {
        let d = self.dual.mean(r).max(0.0);
        self.w.mean(r) * if self.e == 1.0 { d } else { d.powf(self.e) }
    }
    fn geometry(&self) -> &Geometry {
        &self.geom
    }
}

pub fn ap_constant(w: &GridFunction, p: f64, family: &FamilySpec) -> Result<ConditionReport> {
    let ev = ApEval::new(w, p)?;
    let note = format!("A_p constant over the {:?} basis with p = {p}", family.basis.kind);
    Ok(report("ap", scan(family, &ev)?, family, &note))
}

// ---------------------------------------------------------------------------
// Sawyer testing condition

/// `int_Q (u M(chi_Q sigma))^p / sigma(Q)` with `sigma = v^(-p')` and `M`
/// the cube maximal operator on the whole grid.
pub struct SawyerEval {
    geom: Geometry,
    up: Vec<f64>,
    sigma: Vec<f64>,
    sigma_sat: SummedAreaTable,
    p: f64,
}

impl SawyerEval {
    pub fn new(u: &GridFunction, v: &GridFunction, p: f64) -> Result<Self> {
        check_p(p)?;
        if u.geometry() != v.geometry() {
            return Err(Error::GeometryMismatch);
        }
        let u = ingest_weight(u)?;
        let v = ingest_weight(v)?;
        let sigma = pow_field(&v, -conjugate(p))?;
        let sigma_sat = SummedAreaTable::from_values(v.dim(), v.geometry().shape3(), &sigma);
        Ok(SawyerEval { geom: u.geometry().clone(), up: pow_field(&u, p)?, sigma, sigma_sat, p })
    }
}

impl MemberEval for SawyerEval {
    type Scratch = ();
    fn scratch(&self) {}
    fn eval_with(&self, _: &mut (), q: &Rect) -> f64 {
        let mut g = vec![0.0; self.sigma.len()];
        q.for_each_cell(|c| {
            let i = self.geom.index(c);
            g[i] = self.sigma[i];
        });
        let opts = MaximalOptions { budget_cap: u64::MAX, parallel: false, ..Default::default() };
        let gf = GridFunction::new(self.geom.clone(), g).expect("finite by construction");
        let m = strong_maximal_with(&gf, Basis::cubes(), &opts).expect("cube basis fits a nonempty grid");
        let mv = m.field.values();
        let mut num = 0.0;
        q.for_each_cell(|c| {
            let i = self.geom.index(c);
            num += self.up[i] * mv[i].powf(self.p);
        });
        num / self.sigma_sat.sum(q)
    }
    fn geometry(&self) -> &Geometry {
        &self.geom
    }
}

pub fn sawyer_constant(u: &GridFunction, v: &GridFunction, p: f64, family: &FamilySpec) -> Result<ConditionReport> {
    if family.basis.kind != BasisKind::Cubes {
        return Err(Error::Config("the Sawyer condition is tested over cubes".into()));
    }
    let ev = SawyerEval::new(u, v, p)?;
    Ok(report("sawyer", scan(family, &ev)?, family, "Sawyer testing ratio with the cube maximal operator"))
}

// ---------------------------------------------------------------------------
// condition (A)

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetSampler {
    #[serde(default = "default_sets")]
    pub sets: usize,
    #[serde(default = "default_max_rects")]
    pub max_rects: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_sets() -> usize {
    256
}

fn default_max_rects() -> usize {
    8
}

impl Default for SetSampler {
    fn default() -> Self {
        SetSampler { sets: default_sets(), max_rects: default_max_rects(), seed: 0 }
    }
}

impl SetSampler {
    /// Unions of 1 to `max_rects` rectangles; each side length is drawn
    /// log-uniformly in `[1, n/2]` independently per axis.
    pub fn sample(&self, geom: &Geometry) -> Vec<Vec<Rect>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.sets)
            .map(|_| {
                let k = rng.random_range(1..=self.max_rects.max(1));
                (0..k).map(|_| random_rect(&geom.shape, &mut rng)).collect()
            })
            .collect()
    }
}

/// `w({M_R chi_E > lambda}) / w(E)` for one set `E`.
pub fn condition_a_ratio(w: &GridFunction, lambda: f64, set: &[Rect]) -> Result<f64> {
    let geom = w.geometry();
    let mut chi = vec![0.0; geom.len()];
    for r in set {
        r.check_within(geom)?;
        r.for_each_cell(|c| chi[geom.index(c)] = 1.0);
    }
    let we: f64 = chi.iter().zip(w.values()).map(|(c, w)| c * w).sum();
    if we <= 0.0 {
        return Err(Error::DegenerateSet);
    }
    let e = GridFunction::new(geom.clone(), chi)?;
    let opts = MaximalOptions { budget_cap: u64::MAX, parallel: false, ..Default::default() };
    let m = strong_maximal_with(&e, Basis::rectangles(), &opts)?;
    let level: f64 = m.field.values().iter().zip(w.values()).filter(|(m, _)| **m > lambda).map(|(_, w)| w).sum();
    Ok(level / we)
}

/// Empirical `c(lambda)`: the largest ratio over the sampled sets.
pub fn condition_a_estimate(w: &GridFunction, lambda: f64, sampler: &SetSampler) -> Result<ConditionReport> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::Config(format!("lambda must lie in (0, 1), got {lambda}")));
    }
    let w = ingest_weight(w)?;
    let sets = sampler.sample(w.geometry());
    if sets.is_empty() {
        return Err(Error::Config("the set sampler produced no sets".into()));
    }
    let ratios: Vec<f64> = sets.par_iter().map(|s| condition_a_ratio(&w, lambda, s)).collect::<Result<_>>()?;
    let (mut best, mut arg) = (f64::NEG_INFINITY, 0);
    for (i, &r) in ratios.iter().enumerate() {
        if r > best {
            best = r;
            arg = i;
        }
    }
    Ok(ConditionReport {
        kind: "condition_a".into(),
        sup_constant: best,
        lower_bound: true,
        argmax_rect: None,
        argmax_set: Some(sets[arg].clone()),
        samples_evaluated: sets.len() as u64,
        family: serde_json::json!({ "lambda": lambda, "sampler": sampler }),
        note: "empirical c(lambda) over random unions of rectangles; sampled sets cannot certify the condition".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(shape: &[usize]) -> Geometry {
        let d = shape.len();
        Geometry::new(shape, &vec![0.0; d], &vec![1.0; d]).unwrap()
    }

    fn field(shape: &[usize], f: impl Fn(usize) -> f64) -> GridFunction {
        let g = geom(shape);
        let n = g.len();
        GridFunction::new(g, (0..n).map(f).collect()).unwrap()
    }

    fn bumpy(shape: &[usize], seed: u64) -> GridFunction {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = geom(shape);
        let n = g.len();
        GridFunction::new(g, (0..n).map(|_| 0.2 + rng.random::<f64>()).collect()).unwrap()
    }

    #[test]
    fn exhaustive_count_matches_enumeration() {
        let g = geom(&[5, 4]);
        for basis in [Basis::rectangles(), Basis::cubes(), Basis::dyadic(), Basis::rectangles().with_sides(2, Some(3))] {
            let fam = FamilySpec::exhaustive(basis);
            let mut buf = Vec::new();
            let mut all = Vec::new();
            for a0 in 0..5 {
                fam.exhaustive_group(&g, a0, &mut buf);
                all.extend_from_slice(&buf);
            }
            assert_eq!(all.len() as u64, fam.count(&g), "{basis:?}");
            for r in &all {
                let sides: Vec<usize> = (0..2).map(|a| r.side(a)).collect();
                assert!(basis.admits(&sides));
            }
            let set: std::collections::HashSet<_> = all.iter().collect();
            assert_eq!(set.len(), all.len());
        }
    }

    #[test]
    fn unit_weights() {
        let one = field(&[6, 5], |_| 1.0);
        let fam = FamilySpec::exhaustive(Basis::rectangles());
        let phi = YoungFunction::power(2.0).unwrap();
        let b = bump_constant(&one, &one, &phi, 2.0, &fam).unwrap();
        assert!((b.sup_constant - 1.0).abs() < 1e-12);
        let sys = WeightSystem::new(&one, &[one.clone(), one.clone()], &[3.0, 6.0]).unwrap();
        assert!((sys.p - 2.0).abs() < 1e-12 && sys.holder_residual() < 1e-12);
        let pb = power_bump_constant(&sys, 1.5, &fam).unwrap();
        assert!((pb.sup_constant - 1.0).abs() < 1e-12);
        let c = field(&[6, 5], |_| 3.7);
        let ap = ap_constant(&c, 3.0, &fam).unwrap();
        assert!((ap.sup_constant - 1.0).abs() < 1e-12);
    }

    #[test]
    fn general_phi_matches_power_path() {
        let u = bumpy(&[5, 5], 1);
        let v = bumpy(&[5, 5], 2);
        let fam = FamilySpec::exhaustive(Basis::rectangles());
        let fast = bump_constant(&u, &v, &YoungFunction::power(3.0).unwrap(), 2.0, &fam).unwrap();
        let slow = YoungFunction::tabulate_fn(|t| t.powi(3), 1e-6, 1e6, 80).unwrap();
        let slow = bump_constant(&u, &v, &slow, 2.0, &fam).unwrap();
        assert!((fast.sup_constant - slow.sup_constant).abs() < 1e-6 * fast.sup_constant);
    }

    #[test]
    fn witness_reproduces() {
        let u = bumpy(&[6, 6], 3);
        let v = bumpy(&[6, 6], 4);
        let phi = YoungFunction::power_log(3.0, 1.0).unwrap();
        let fam = FamilySpec::stratified(Basis::rectangles(), 300, 9);
        let rep = bump_constant(&u, &v, &phi, 2.0, &fam).unwrap();
        let ev = BumpEval::new(&u, &v, &phi, 2.0).unwrap();
        assert_eq!(ev.eval(&rep.argmax_rect.unwrap()), rep.sup_constant);
        assert_eq!(rep.samples_evaluated, 300);
    }

    #[test]
    fn stratified_below_exhaustive() {
        let w = bumpy(&[7, 6], 5);
        let ex = ap_constant(&w, 2.0, &FamilySpec::exhaustive(Basis::rectangles())).unwrap();
        let st = ap_constant(&w, 2.0, &FamilySpec::stratified(Basis::rectangles(), 200, 1)).unwrap();
        assert!(st.sup_constant <= ex.sup_constant);
        let with = FamilySpec::explicit(Basis::rectangles(), vec![ex.argmax_rect.unwrap()]);
        assert_eq!(ap_constant(&w, 2.0, &with).unwrap().sup_constant, ex.sup_constant);
    }

    #[test]
    fn ap_symmetry_at_two() {
        let w = bumpy(&[6, 5], 6);
        let winv = w.map(|x| 1.0 / x).unwrap();
        let fam = FamilySpec::exhaustive(Basis::rectangles());
        let a = ap_constant(&w, 2.0, &fam).unwrap().sup_constant;
        let b = ap_constant(&winv, 2.0, &fam).unwrap().sup_constant;
        assert!((a - b).abs() < 1e-12 * a);
        assert!(a >= 1.0 - 1e-9);
    }

    #[test]
    fn ap_grows_with_power() {
        let g = Geometry::covering(&[0.0, 0.0], &[1.0, 1.0], 12).unwrap();
        let fam = FamilySpec::exhaustive(Basis::rectangles());
        let mut last = 0.0;
        for a in [0.1, 0.2, 0.4] {
            let w = GridFunction::from_fn(g.clone(), |x| x[0].abs().powf(a)).unwrap();
            let c = ap_constant(&w, 2.0, &fam).unwrap().sup_constant;
            assert!(c.is_finite() && c > last, "{a}: {c}");
            last = c;
        }
    }

    #[test]
    fn power_bump_m1_matches_direct_pair() {
        let nu = bumpy(&[5, 4], 7);
        let w = bumpy(&[5, 4], 8);
        let (p, r) = (2.5, 1.5);
        let sys = WeightSystem::new(&nu, std::slice::from_ref(&w), &[p]).unwrap();
        let ev = PowerBumpEval::new(&sys, r).unwrap();
        let pc = p / (p - 1.0);
        let fam = FamilySpec::exhaustive(Basis::rectangles());
        let mut direct = 0.0f64;
        let mut buf = Vec::new();
        for a0 in 0..5 {
            fam.exhaustive_group(nu.geometry(), a0, &mut buf);
            for rect in &buf {
                let n = rect.cells() as f64;
                let mnu: f64 = nu.rect_values(rect).iter().sum::<f64>() / n;
                let mw: f64 = w.rect_values(rect).iter().map(|x| x.powf((1.0 - pc) * r)).sum::<f64>() / n;
                let d = mnu * mw.powf(p / (pc * r));
                assert!((ev.eval(rect) - d).abs() <= 1e-12 * d);
                direct = direct.max(d);
            }
        }
        let rep = power_bump_constant(&sys, r, &fam).unwrap();
        assert!((rep.sup_constant - direct).abs() <= 1e-12 * direct);
    }

    #[test]
    fn power_bump_monotone_in_r() {
        let nu = bumpy(&[6, 6], 10);
        let ws = [bumpy(&[6, 6], 11), bumpy(&[6, 6], 12)];
        let sys = WeightSystem::new(&nu, &ws, &[3.0, 4.0]).unwrap();
        let fam = FamilySpec::exhaustive(Basis::rectangles());
        let c: Vec<f64> = [1.1, 1.5, 2.0].iter().map(|&r| power_bump_constant(&sys, r, &fam).unwrap().sup_constant).collect();
        assert!(c[0] <= c[1] * (1.0 + 1e-12) && c[1] <= c[2] * (1.0 + 1e-12), "{c:?}");
    }

    #[test]
    fn scale_invariance() {
        let u = bumpy(&[5, 5], 13);
        let v = bumpy(&[5, 5], 14);
        let phi = YoungFunction::power(3.0).unwrap();
        let fam = FamilySpec::exhaustive(Basis::rectangles());
        let a = bump_constant(&u, &v, &phi, 2.0, &fam).unwrap().sup_constant;
        let b = bump_constant(&u.map(|x| 4.0 * x).unwrap(), &v.map(|x| 4.0 * x).unwrap(), &phi, 2.0, &fam)
            .unwrap()
            .sup_constant;
        assert!((a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn zero_weight_rejected() {
        let w = field(&[3], |i| i as f64);
        assert!(matches!(ap_constant(&w, 2.0, &FamilySpec::exhaustive(Basis::rectangles())), Err(Error::InvalidWeight(_))));
        let tiny = field(&[3], |_| 1e-310);
        assert_eq!(ingest_weight(&tiny).unwrap().values()[0], WEIGHT_FLOOR);
    }

    #[test]
    fn sawyer_unit_and_homogeneous() {
        let one = field(&[8, 8], |_| 1.0);
        let fam = FamilySpec::exhaustive(Basis::cubes());
        let s = sawyer_constant(&one, &one, 2.0, &fam).unwrap();
        assert!((s.sup_constant - 1.0).abs() < 1e-12);
        let u = bumpy(&[8, 8], 15);
        let v = bumpy(&[8, 8], 16);
        let a = sawyer_constant(&u, &v, 2.0, &fam).unwrap().sup_constant;
        let b = sawyer_constant(&u.map(|x| 3.0 * x).unwrap(), &v, 2.0, &fam).unwrap().sup_constant;
        assert!((b - 9.0 * a).abs() < 1e-10 * b);
        assert!(sawyer_constant(&u, &v, 2.0, &FamilySpec::exhaustive(Basis::rectangles())).is_err());
    }

    #[test]
    fn condition_a_single_interval() {
        let w = field(&[64], |_| 1.0);
        let e = [Rect::new(&[28], &[36]).unwrap()];
        for lambda in [0.2, 0.5, 0.8] {
            let r = condition_a_ratio(&w, lambda, &e).unwrap();
            assert!(r >= 1.0 && r <= 2.0 / lambda, "{lambda}: {r}");
        }
        let near_one = condition_a_ratio(&w, 0.999, &e).unwrap();
        assert!(near_one >= 1.0);
    }

    #[test]
    fn condition_a_sampler_deterministic() {
        let w = bumpy(&[12, 12], 17);
        let s = SetSampler { sets: 16, max_rects: 4, seed: 3 };
        let a = condition_a_estimate(&w, 0.5, &s).unwrap();
        let b = condition_a_estimate(&w, 0.5, &s).unwrap();
        assert_eq!(a, b);
        let set = a.argmax_set.clone().unwrap();
        assert_eq!(condition_a_ratio(&ingest_weight(&w).unwrap(), 0.5, &set).unwrap(), a.sup_constant);
        assert!(a.sup_constant >= 1.0);
    }

    #[test]
    fn family_json() {
        let f: FamilySpec = serde_json::from_str(r#"{"basis":{"kind":"rectangles"},"sampling":"stratified","samples":10,"seed":2}"#).unwrap();
        assert_eq!(f, FamilySpec::stratified(Basis::rectangles(), 10, 2));
        let e: FamilySpec = serde_json::from_str(r#"{"basis":{"kind":"cubes"},"sampling":"explicit","rects":[[[0,2],[1,3]]]}"#).unwrap();
        assert!(matches!(e.sampling, Sampling::Explicit { ref rects } if rects.len() == 1));
    }
}

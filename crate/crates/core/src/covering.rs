//! Scattered subfamily selection, the weight-growth inequality, and the
//! exponential overlap bound for rectangle families.
//!
//! Measures are integer cell counts; weighted measures are sums of the weight
//! over cells. Cell volume is omitted since every reported quantity is a
//! ratio of two measures.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Geometry, GridFunction, Rect};
use crate::weights::ingest_weight;

/// An ordered family of rectangles on a grid of the given shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFamily", into = "RawFamily")]
pub struct RectFamily {
    shape: Vec<usize>,
    rects: Vec<Rect>,
}

#[derive(Serialize, Deserialize)]
struct RawFamily {
    shape: Vec<usize>,
    rects: Vec<Rect>,
}

impl TryFrom<RawFamily> for RectFamily {
    type Error = Error;
    fn try_from(raw: RawFamily) -> Result<Self> {
        RectFamily::new(&raw.shape, raw.rects)
    }
}

impl From<RectFamily> for RawFamily {
    fn from(f: RectFamily) -> Self {
        RawFamily { shape: f.shape, rects: f.rects }
    }
}

impl RectFamily {
    pub fn new(shape: &[usize], rects: Vec<Rect>) -> Result<Self> {
        let geom = Geometry::new(shape, &vec![0.0; shape.len()], &vec![1.0; shape.len()])?;
        for r in &rects {
            r.check_within(&geom)?;
        }
        Ok(RectFamily { shape: shape.to_vec(), rects })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("rectangle family: {e}")))
    }

    /// `m` rectangles with side lengths drawn log-uniformly in `[1, n/2]`
    /// per axis and uniform positions.
    pub fn random(shape: &[usize], m: usize, rng: &mut impl Rng) -> Result<Self> {
        let rects = (0..m).map(|_| random_rect(shape, rng)).collect();
        Self::new(shape, rects)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rects(&self) -> &[Rect] {
        &self.rects
    }

    pub fn len(&self) -> usize {
        self.rects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rects.is_empty()
    }

    fn shape3(&self) -> [usize; 3] {
        let mut s = [1; 3];
        s[..self.shape.len()].copy_from_slice(&self.shape);
        s
    }

    fn cells(&self) -> usize {
        self.shape.iter().product()
    }

    fn index(&self, c: [usize; 3]) -> usize {
        let s = self.shape3();
        (c[0] * s[1] + c[1]) * s[2] + c[2]
    }
}

/// Random rectangle with log-uniform side lengths in `[1, n/2]`.
pub fn random_rect(shape: &[usize], rng: &mut impl Rng) -> Rect {
    let mut r = Rect { dim: shape.len(), lo: [0; 3], hi: [1; 3] };
    for (a, &n) in shape.iter().enumerate() {
        let top = (n as f64 / 2.0).max(1.0);
        let l = (top.powf(rng.random::<f64>()).round() as usize).clamp(1, n);
        let lo = rng.random_range(0..=n - l);
        r.lo[a] = lo;
        r.hi[a] = lo + l;
    }
    r
}

/// Occupancy bitmap of a union of rectangles.
struct Occupancy<'a> {
    fam: &'a RectFamily,
    occ: Vec<bool>,
}

impl<'a> Occupancy<'a> {
    fn new(fam: &'a RectFamily) -> Self {
        Occupancy { fam, occ: vec![false; fam.cells()] }
    }

    fn overlap(&self, r: &Rect) -> u64 {
        let mut n = 0;
        r.for_each_cell(|c| n += self.occ[self.fam.index(c)] as u64);
        n
    }

    /// Marks `r`, returning the weight of the newly covered cells.
    fn add(&mut self, r: &Rect, w: Option<&[f64]>) -> f64 {
        let mut gained = 0.0;
        r.for_each_cell(|c| {
            let i = self.fam.index(c);
            if !self.occ[i] {
                self.occ[i] = true;
                gained += w.map_or(1.0, |w| w[i]);
            }
        });
        gained
    }
}

/// Exact cell count of a union of rectangles by coordinate compression,
/// independent of any occupancy grid.
pub fn union_cells(rects: &[Rect]) -> u64 {
    if rects.is_empty() {
        return 0;
    }
    let mut cuts: [Vec<usize>; 3] = Default::default();
    for r in rects {
        for a in 0..3 {
            cuts[a].push(r.lo[a]);
            cuts[a].push(r.hi[a]);
        }
    }
    for c in &mut cuts {
        c.sort_unstable();
        c.dedup();
    }
    let mut total = 0u64;
    for i in 0..cuts[0].len() - 1 {
        for j in 0..cuts[1].len() - 1 {
            for k in 0..cuts[2].len() - 1 {
                let probe = [cuts[0][i], cuts[1][j], cuts[2][k]];
                if rects.iter().any(|r| r.contains(probe)) {
                    total += ((cuts[0][i + 1] - cuts[0][i]) * (cuts[1][j + 1] - cuts[1][j]) * (cuts[2][k + 1] - cuts[2][k]))
                        as u64;
                }
            }
        }
    }
    total
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("alpha must lie in (0, 1), got {alpha}")))
    }
}

// ---------------------------------------------------------------------------
// scattered selection

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterSelection {
    /// Kept indices, increasing.
    pub kept: Vec<usize>,
    pub alpha: f64,
    /// For every input index, the overlap with the union of the members kept
    /// before it, in cells.
    pub overlaps: Vec<u64>,
}

impl ScatterSelection {
    pub fn is_kept(&self, i: usize) -> bool {
        self.kept.binary_search(&i).is_ok()
    }
}

/// Greedy pass in family order: a member is kept iff its overlap with the
/// union of the kept members before it is at most `alpha` times its size.
pub fn select_scattered(fam: &RectFamily, alpha: f64) -> Result<ScatterSelection> {
    check_alpha(alpha)?;
    let mut occ = Occupancy::new(fam);
    let mut kept = Vec::new();
    let mut overlaps = Vec::with_capacity(fam.len());
    for (i, r) in fam.rects.iter().enumerate() {
        let o = occ.overlap(r);
        overlaps.push(o);
        if o as f64 <= alpha * r.cells() as f64 {
            kept.push(i);
            occ.add(r, None);
        }
    }
    Ok(ScatterSelection { kept, alpha, overlaps })
}

/// Overlap of `fam[i]` with the union of `fam[s]`, `s` in `before`,
/// computed from pairwise intersections.
pub fn direct_overlap(fam: &RectFamily, i: usize, before: &[usize]) -> u64 {
    let parts: Vec<Rect> = before.iter().filter_map(|&s| fam.rects[i].intersect(&fam.rects[s])).collect();
    union_cells(&parts)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterCheck {
    pub ok: bool,
    /// Largest `overlap / size - alpha` over kept members after the first.
    pub max_violation: f64,
    pub worst_index: Option<usize>,
    /// Recomputed overlap of every kept member with its kept predecessors.
    pub overlaps: Vec<u64>,
}

/// Recomputes every prefix overlap of the selection from scratch.
pub fn verify_scattered(fam: &RectFamily, sel: &ScatterSelection, alpha: f64) -> Result<ScatterCheck> {
    check_alpha(alpha)?;
    if sel.kept.windows(2).any(|w| w[0] >= w[1]) || sel.kept.last().is_some_and(|&k| k >= fam.len()) {
        return Err(Error::Config("selection indices must be increasing and inside the family".into()));
    }
    let mut check = ScatterCheck { ok: true, max_violation: -alpha, worst_index: None, overlaps: vec![] };
    for (pos, &i) in sel.kept.iter().enumerate() {
        let o = direct_overlap(fam, i, &sel.kept[..pos]);
        check.overlaps.push(o);
        if pos == 0 {
            continue;
        }
        let size = fam.rects[i].cells() as f64;
        if o as f64 > alpha * size {
            check.ok = false;
        }
        let v = o as f64 / size - alpha;
        if v > check.max_violation {
            check.max_violation = v;
            check.worst_index = Some(i);
        }
    }
    Ok(check)
}

// ---------------------------------------------------------------------------
// weight growth

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    /// One-based indices with `1 <= i < j <= M + 1`.
    pub i: usize,
    pub j: usize,
    /// `w(union_{s<j} A_s)`.
    pub lhs: f64,
    /// `w(union_{s<i} A_s) + w(union_{i<=s<j, s kept} A_s)`.
    pub bracket: f64,
    /// Smallest constant making the inequality hold.
    pub implied_c: f64,
}

fn weight_values(fam: &RectFamily, w: &GridFunction) -> Result<Vec<f64>> {
    if w.geometry().shape != fam.shape {
        return Err(Error::GeometryMismatch);
    }
    Ok(ingest_weight(w)?.into_values())
}

fn implied(lhs: f64, bracket: f64) -> f64 {
    if lhs == 0.0 {
        0.0
    } else {
        lhs / bracket
    }
}

/// Both sides of the weight-growth inequality for one index pair. The
/// inequality is reported, not asserted.
pub fn weight_growth_check(
    fam: &RectFamily,
    sel: &ScatterSelection,
    w: &GridFunction,
    i: usize,
    j: usize,
) -> Result<GrowthReport> {
    let m = fam.len();
    if !(1 <= i && i < j && j <= m + 1) {
        return Err(Error::Config(format!("need 1 <= i < j <= {}, got ({i}, {j})", m + 1)));
    }
    let wv = weight_values(fam, w)?;
    let measure = |idx: &mut dyn Iterator<Item = usize>| {
        let mut occ = Occupancy::new(fam);
        idx.map(|s| occ.add(&fam.rects[s], Some(&wv))).sum::<f64>()
    };
    let lhs = measure(&mut (0..j - 1));
    let head = measure(&mut (0..i - 1));
    let tail = measure(&mut (i - 1..j - 1).filter(|&s| sel.is_kept(s)));
    let bracket = head + tail;
    Ok(GrowthReport { i, j, lhs, bracket, implied_c: implied(lhs, bracket) })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthSweep {
    pub pairs: u64,
    pub worst: GrowthReport,
}

/// The weight-growth inequality over every pair `1 <= i < j <= M + 1`.
pub fn weight_growth_sweep(fam: &RectFamily, sel: &ScatterSelection, w: &GridFunction) -> Result<GrowthSweep> {
    let m = fam.len();
    if m == 0 {
        return Err(Error::Config("empty family".into()));
    }
    let wv = weight_values(fam, w)?;
    // prefix[k] = w(union_{s<k+1} A_s) in one-based terms, k = 0..=m
    let mut prefix = vec![0.0; m + 1];
    let mut occ = Occupancy::new(fam);
    for s in 0..m {
        prefix[s + 1] = prefix[s] + occ.add(&fam.rects[s], Some(&wv));
    }
    let mut worst: Option<GrowthReport> = None;
    let mut pairs = 0;
    for i in 1..=m {
        let mut tail_occ = Occupancy::new(fam);
        let mut tail = 0.0;
        for j in i + 1..=m + 1 {
            let s = j - 2;
            if sel.is_kept(s) {
                tail += tail_occ.add(&fam.rects[s], Some(&wv));
            }
            let lhs = prefix[j - 1];
            let bracket = prefix[i - 1] + tail;
            let rep = GrowthReport { i, j, lhs, bracket, implied_c: implied(lhs, bracket) };
            pairs += 1;
            if worst.as_ref().is_none_or(|w| rep.implied_c > w.implied_c) {
                worst = Some(rep);
            }
        }
    }
    Ok(GrowthSweep { pairs, worst: worst.expect("at least one pair") })
}

// ---------------------------------------------------------------------------
// exponential overlap

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub delta: f64,
    pub n: usize,
    pub union_cells: u64,
    pub max_overlap: u32,
    /// `sum over the union of exp((delta N)^(1/(n-1)))`.
    pub integral: f64,
    /// `integral / (2 |union|)`; the bound holds iff this is at most one.
    pub ratio: f64,
    pub pass: bool,
}

fn overlap_counts(fam: &RectFamily, subset: &[usize]) -> Result<Vec<u32>> {
    let mut count = vec![0u32; fam.cells()];
    for &s in subset {
        let r = fam.rects.get(s).ok_or_else(|| Error::Config(format!("index {s} outside the family")))?;
        r.for_each_cell(|c| count[fam.index(c)] += 1);
    }
    Ok(count)
}

fn overlap_integral(count: &[u32], delta: f64, n: usize) -> f64 {
    let e = 1.0 / (n - 1) as f64;
    count.iter().filter(|&&c| c > 0).map(|&c| (delta * c as f64).powf(e).exp()).sum()
}

/// Checks `int_U exp((delta N)^(1/(n-1))) <= 2 |U|` where `N` counts the
/// members of `subset` covering a cell and `U` is their union.
pub fn cf_overlap_check(fam: &RectFamily, subset: &[usize], delta: f64, n: usize) -> Result<OverlapReport> {
    if n < 2 {
        return Err(Error::Dimension(format!("the overlap exponent 1/(n-1) needs n >= 2, got {n}")));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Config(format!("delta must be positive, got {delta}")));
    }
    let count = overlap_counts(fam, subset)?;
    let union_cells = count.iter().filter(|&&c| c > 0).count() as u64;
    if union_cells == 0 {
        return Err(Error::DegenerateSet);
    }
    let integral = overlap_integral(&count, delta, n);
    let ratio = integral / (2.0 * union_cells as f64);
    Ok(OverlapReport {
        delta,
        n,
        union_cells,
        max_overlap: count.iter().copied().max().unwrap_or(0),
        integral,
        ratio,
        pass: ratio <= 1.0,
    })
}

/// Largest `delta` for which [`cf_overlap_check`] passes, by bisection to
/// 1e-12 relative. Always at most `(ln 2)^(n-1)`.
pub fn largest_passing_delta(fam: &RectFamily, subset: &[usize], n: usize) -> Result<f64> {
    let hi0 = std::f64::consts::LN_2.powi(n as i32 - 1);
    let (mut lo, mut hi) = (0.0, hi0);
    if cf_overlap_check(fam, subset, hi, n)?.pass {
        return Ok(hi);
    }
    while hi - lo > 1e-12 * hi0 {
        let mid = 0.5 * (lo + hi);
        if cf_overlap_check(fam, subset, mid, n)?.pass {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreedySubfamily {
    /// Chosen indices in selection order (decreasing size).
    pub chosen: Vec<usize>,
    /// `|union of all| / |union of chosen|`.
    pub coverage_loss: f64,
}

/// Default subfamily heuristic: members in order of decreasing size, kept
/// when at most half of the member is already covered.
pub fn greedy_by_measure(fam: &RectFamily) -> GreedySubfamily {
    let mut order: Vec<usize> = (0..fam.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(fam.rects[i].cells()));
    let mut occ = Occupancy::new(fam);
    let mut chosen = Vec::new();
    for i in order {
        let r = &fam.rects[i];
        if 2 * occ.overlap(r) <= r.cells() as u64 {
            chosen.push(i);
            occ.add(r, None);
        }
    }
    let all = union_cells(&fam.rects) as f64;
    let kept = union_cells(&chosen.iter().map(|&i| fam.rects[i]).collect::<Vec<_>>()) as f64;
    GreedySubfamily { chosen, coverage_loss: if kept > 0.0 { all / kept } else { 0.0 } }
}

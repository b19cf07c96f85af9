//! Uniform grids, grid-aligned rectangles, summed-area tables and Luxemburg
//! norms.
//!
//! Integrals are midpoint-rule cell sums: a grid sample stands for the cell
//! centred on it, so the average of `f` over a rectangle is the plain mean of
//! the covered samples. Grids of dimension 1 and 2 are stored as 3-D arrays
//! padded with trailing axes of length one.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::young::{inverse, YoungFunction, INVERSE_TOL};

/// Largest number of cells accepted from a grid file.
pub const MAX_CELLS: usize = 1 << 24;

/// Default relative tolerance of [`luxemburg_norm`].
pub const LUXEMBURG_TOL: f64 = 1e-10;

const MAX_ITERATIONS: usize = 200;

/// Shape and placement of a uniform grid. `origin` is the centre of the first
/// cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub dim: usize,
    pub shape: Vec<usize>,
    pub origin: Vec<f64>,
    pub spacing: Vec<f64>,
}

impl Geometry {
    pub fn new(shape: &[usize], origin: &[f64], spacing: &[f64]) -> Result<Self> {
        let g = Geometry { dim: shape.len(), shape: shape.to_vec(), origin: origin.to_vec(), spacing: spacing.to_vec() };
        g.validate()?;
        Ok(g)
    }

    /// Cells of side `1 / cells_per_unit` tiling the box `[lo, hi]`.
    pub fn covering(lo: &[f64], hi: &[f64], cells_per_unit: usize) -> Result<Self> {
        if lo.len() != hi.len() || cells_per_unit == 0 {
            return Err(Error::InvalidGrid("box corners must have equal length".into()));
        }
        let h = 1.0 / cells_per_unit as f64;
        let shape: Vec<usize> = lo
            .iter()
            .zip(hi)
            .map(|(a, b)| ((b - a) * cells_per_unit as f64).round().max(0.0) as usize)
            .collect();
        let origin: Vec<f64> = lo.iter().map(|a| a + 0.5 * h).collect();
        Self::new(&shape, &origin, &vec![h; lo.len()])
    }

    /// The cube `[-half_width, half_width]^dim`.
    pub fn centered_cube(dim: usize, half_width: f64, cells_per_unit: usize) -> Result<Self> {
        Self::covering(&vec![-half_width; dim], &vec![half_width; dim], cells_per_unit)
    }

    fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(Error::InvalidGrid(format!("dimension must be 1, 2 or 3, got {}", self.dim)));
        }
        if self.shape.len() != self.dim || self.origin.len() != self.dim || self.spacing.len() != self.dim {
            return Err(Error::InvalidGrid("shape, origin and spacing must all have length dim".into()));
        }
        let mut cells: usize = 1;
        for &s in &self.shape {
            if s == 0 {
                return Err(Error::InvalidGrid("every axis needs at least one cell".into()));
            }
            cells = cells
                .checked_mul(s)
                .filter(|&c| c <= MAX_CELLS)
                .ok_or_else(|| Error::InvalidGrid(format!("more than {MAX_CELLS} cells")))?;
        }
        if self.origin.iter().any(|o| !o.is_finite()) {
            return Err(Error::InvalidGrid("origin must be finite".into()));
        }
        if self.spacing.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
            return Err(Error::InvalidGrid("spacing must be positive and finite".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Shape padded to three axes.
    pub fn shape3(&self) -> [usize; 3] {
        let mut s = [1; 3];
        s[..self.dim].copy_from_slice(&self.shape);
        s
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    pub fn index(&self, idx: [usize; 3]) -> usize {
        let s = self.shape3();
        (idx[0] * s[1] + idx[1]) * s[2] + idx[2]
    }

    pub fn unflatten(&self, mut flat: usize) -> [usize; 3] {
        let s = self.shape3();
        let k = flat % s[2];
        flat /= s[2];
        [flat / s[1], flat % s[1], k]
    }

    /// Centre of the cell with index `idx` (unused axes ignored).
    pub fn center(&self, idx: [usize; 3]) -> [f64; 3] {
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = self.origin[a] + self.spacing[a] * idx[a] as f64;
        }
        x
    }

    /// The rectangle covering the whole grid.
    pub fn full_rect(&self) -> Rect {
        Rect { dim: self.dim, lo: [0; 3], hi: self.shape3() }
    }

    /// Half-open index range of the cells whose centres lie in `[a, b]`.
    pub fn cells_within(&self, axis: usize, a: f64, b: f64) -> (usize, usize) {
        let o = self.origin[axis];
        let h = self.spacing[axis];
        let n = self.shape[axis] as f64;
        let lo = ((a - o) / h - 1e-9).ceil().clamp(0.0, n) as usize;
        let hi = (((b - o) / h + 1e-9).floor() + 1.0).clamp(0.0, n) as usize;
        (lo, hi.max(lo))
    }
}

/// A nonnegative function sampled at cell centres, row-major with the last
/// axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    geom: Geometry,
    values: Vec<f64>,
}

impl GridFunction {
    /// Negative samples are clamped to zero; non-finite samples are rejected.
    pub fn new(geom: Geometry, mut values: Vec<f64>) -> Result<Self> {
        geom.validate()?;
        if values.len() != geom.len() {
            return Err(Error::InvalidGrid(format!("{} values for {} cells", values.len(), geom.len())));
        }
        for (i, v) in values.iter_mut().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidGrid(format!("value {i} is not finite")));
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        Ok(GridFunction { geom, values })
    }

    pub fn constant(geom: Geometry, c: f64) -> Result<Self> {
        let n = geom.len();
        Self::new(geom, vec![c; n])
    }

    /// Samples `f` at every cell centre.
    pub fn from_fn(geom: Geometry, f: impl Fn([f64; 3]) -> f64) -> Result<Self> {
        let values = (0..geom.len()).map(|i| f(geom.center(geom.unflatten(i)))).collect();
        Self::new(geom, values)
    }

    /// Indicator of the box `[lo, hi]`, sampled at cell centres.
    pub fn indicator(geom: Geometry, lo: &[f64], hi: &[f64]) -> Result<Self> {
        let dim = geom.dim;
        if lo.len() != dim || hi.len() != dim {
            return Err(Error::InvalidGrid("box corners must have length dim".into()));
        }
        Self::from_fn(geom, |x| {
            let inside = (0..dim).all(|a| x[a] >= lo[a] && x[a] <= hi[a]);
            if inside {
                1.0
            } else {
                0.0
            }
        })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geom
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn dim(&self) -> usize {
        self.geom.dim
    }

    pub fn get(&self, idx: [usize; 3]) -> f64 {
        self.values[self.geom.index(idx)]
    }

    /// Applies `f` pointwise; the result goes through the same validation.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.geom.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise combination of two grids on the same geometry.
    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.geom != other.geom {
            return Err(Error::GeometryMismatch);
        }
        Self::new(self.geom.clone(), self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect())
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// `int f dx` by the midpoint rule.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.geom.cell_volume()
    }

    /// Samples of `f` inside `r`, in row-major order.
    pub fn rect_values(&self, r: &Rect) -> Vec<f64> {
        let mut out = Vec::with_capacity(r.cells());
        for i in r.lo[0]..r.hi[0] {
            for j in r.lo[1]..r.hi[1] {
                let row = self.geom.index([i, j, r.lo[2]]);
                out.extend_from_slice(&self.values[row..row + (r.hi[2] - r.lo[2])]);
            }
        }
        out
    }

    /// Serialises to the grid text format.
    pub fn to_grid_string(&self) -> String {
        let header = serde_json::to_string(&self.geom).expect("geometry serialises");
        let row = *self.geom.shape.last().unwrap_or(&1);
        let mut out = String::with_capacity(header.len() + self.values.len() * 12);
        out.push_str(&header);
        out.push('\n');
        for chunk in self.values.chunks(row) {
            for (k, v) in chunk.iter().enumerate() {
                if k > 0 {
                    out.push(' ');
                }
                // Debug prints the shortest string that round-trips
                let _ = write!(out, "{v:?}");
            }
            out.push('\n');
        }
        out
    }

    /// Parses the grid text format: a JSON header line followed by
    /// whitespace-separated values in row-major order.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (header_line, header) = lines
            .by_ref()
            .find(|(_, l)| !l.trim().is_empty())
            .ok_or(Error::Parse { line: 1, msg: "missing header".into() })?;
        let geom: Geometry = serde_json::from_str(header.trim())
            .map_err(|e| Error::Parse { line: header_line + 1, msg: format!("bad header: {e}") })?;
        geom.validate().map_err(|e| Error::Parse { line: header_line + 1, msg: e.to_string() })?;
        if geom.dim != geom.shape.len() {
            return Err(Error::Parse { line: header_line + 1, msg: "dim does not match shape".into() });
        }
        let expected = geom.len();
        let mut values = Vec::with_capacity(expected);
        for (ln, line) in lines {
            for tok in line.split_whitespace() {
                if values.len() == expected {
                    return Err(Error::Parse { line: ln + 1, msg: format!("more than {expected} values") });
                }
                let v: f64 = tok
                    .parse()
                    .map_err(|_| Error::Parse { line: ln + 1, msg: format!("not a number: {tok:?}") })?;
                if !v.is_finite() {
                    return Err(Error::Parse { line: ln + 1, msg: format!("non-finite value {tok:?}") });
                }
                values.push(v);
            }
        }
        if values.len() != expected {
            return Err(Error::Parse {
                line: text.lines().count(),
                msg: format!("expected {expected} values, found {}", values.len()),
            });
        }
        Self::new(geom, values)
    }
}

/// A grid-aligned box of cells: half-open index ranges `[lo_k, hi_k)`.
/// Axes beyond `dim` hold the range `[0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<[usize; 2]>", into = "Vec<[usize; 2]>")]
pub struct Rect {
    pub dim: usize,
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl Rect {
    pub fn new(lo: &[usize], hi: &[usize]) -> Result<Self> {
        if lo.len() != hi.len() || !(1..=3).contains(&lo.len()) {
            return Err(Error::InvalidRect("corners must have equal length 1, 2 or 3".into()));
        }
        let mut r = Rect { dim: lo.len(), lo: [0; 3], hi: [1; 3] };
        for a in 0..lo.len() {
            if lo[a] >= hi[a] {
                return Err(Error::EmptyRect);
            }
            r.lo[a] = lo[a];
            r.hi[a] = hi[a];
        }
        Ok(r)
    }

    /// The single-cell rectangle at `idx`.
    pub fn cell(dim: usize, idx: [usize; 3]) -> Self {
        let mut r = Rect { dim, lo: [0; 3], hi: [1; 3] };
        for a in 0..dim {
            r.lo[a] = idx[a];
            r.hi[a] = idx[a] + 1;
        }
        r
    }

    /// Checks that the rectangle lies inside `geom`.
    pub fn check_within(&self, geom: &Geometry) -> Result<()> {
        if self.dim != geom.dim {
            return Err(Error::InvalidRect(format!("{}-D rectangle on a {}-D grid", self.dim, geom.dim)));
        }
        let s = geom.shape3();
        for a in 0..3 {
            if self.lo[a] >= self.hi[a] {
                return Err(Error::EmptyRect);
            }
            if self.hi[a] > s[a] {
                return Err(Error::InvalidRect(format!("axis {a} range exceeds the grid")));
            }
        }
        Ok(())
    }

    pub fn side(&self, axis: usize) -> usize {
        self.hi[axis] - self.lo[axis]
    }

    pub fn cells(&self) -> usize {
        (0..3).map(|a| self.side(a)).product()
    }

    pub fn contains(&self, idx: [usize; 3]) -> bool {
        (0..3).all(|a| idx[a] >= self.lo[a] && idx[a] < self.hi[a])
    }

    pub fn intersect(&self, other: &Rect) -> Option<Rect> {
        let mut r = *self;
        for a in 0..3 {
            r.lo[a] = self.lo[a].max(other.lo[a]);
            r.hi[a] = self.hi[a].min(other.hi[a]);
            if r.lo[a] >= r.hi[a] {
                return None;
            }
        }
        Some(r)
    }

    /// Visits every cell index in row-major order.
    pub fn for_each_cell(&self, mut f: impl FnMut([usize; 3])) {
        for i in self.lo[0]..self.hi[0] {
            for j in self.lo[1]..self.hi[1] {
                for k in self.lo[2]..self.hi[2] {
                    f([i, j, k]);
                }
            }
        }
    }
}

impl TryFrom<Vec<[usize; 2]>> for Rect {
    type Error = Error;
    fn try_from(ranges: Vec<[usize; 2]>) -> Result<Self> {
        let lo: Vec<usize> = ranges.iter().map(|r| r[0]).collect();
        let hi: Vec<usize> = ranges.iter().map(|r| r[1]).collect();
        Rect::new(&lo, &hi)
    }
}

impl From<Rect> for Vec<[usize; 2]> {
    fn from(r: Rect) -> Self {
        (0..r.dim).map(|a| [r.lo[a], r.hi[a]]).collect()
    }
}

impl std::fmt::Display for Rect {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for a in 0..self.dim {
            if a > 0 {
                write!(f, "x")?;
            }
            write!(f, "[{},{})", self.lo[a], self.hi[a])?;
        }
        Ok(())
    }
}

/// Cumulative sums with one extra leading row per axis, so that every
/// rectangle sum is an inclusion-exclusion of at most eight entries.
///
/// Entries are unevaluated pairs `hi + lo` and the inclusion-exclusion is
/// carried out in the same pair arithmetic, so a rectangle sum carries a
/// relative error near machine precision even when it is tiny compared to
/// the table entries it is formed from.
#[derive(Clone, Debug)]
pub struct SummedAreaTable {
    dim: usize,
    shape: [usize; 3],
    stride: [usize; 3],
    table: Vec<Dd>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
struct Dd(f64, f64);

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

impl Dd {
    #[inline]
    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.0, o.0);
        let e = e + (self.1 + o.1);
        let hi = s + e;
        Dd(hi, e - (hi - s))
    }

    #[inline]
    fn sub(self, o: Dd) -> Dd {
        self.add(Dd(-o.0, -o.1))
    }

    #[inline]
    fn value(self) -> f64 {
        self.0 + self.1
    }
}

impl SummedAreaTable {
    pub fn new(f: &GridFunction) -> Self {
        Self::from_values(f.dim(), f.geometry().shape3(), f.values())
    }

    pub fn from_values(dim: usize, shape: [usize; 3], values: &[f64]) -> Self {
        let ext = [shape[0] + 1, shape[1] + 1, shape[2] + 1];
        let stride = [ext[1] * ext[2], ext[2], 1];
        let mut table = vec![Dd::default(); ext[0] * ext[1] * ext[2]];
        for i in 0..shape[0] {
            for j in 0..shape[1] {
                let mut run = Dd::default();
                for k in 0..shape[2] {
                    run = run.add(Dd(values[(i * shape[1] + j) * shape[2] + k], 0.0));
                    let at = (i + 1) * stride[0] + (j + 1) * stride[1] + k + 1;
                    table[at] = run.add(table[at - stride[1]]);
                }
            }
            // add the previous plane to finish the prefix along axis 0
            let (prev, cur) = table.split_at_mut((i + 1) * stride[0]);
            let prev = &prev[i * stride[0]..];
            for (c, p) in cur[..stride[0]].iter_mut().zip(prev) {
                *c = c.add(*p);
            }
        }
        SummedAreaTable { dim, shape, stride, table }
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    #[inline]
    fn at(&self, i: usize, j: usize, k: usize) -> Dd {
        self.table[i * self.stride[0] + j * self.stride[1] + k]
    }

    /// Sum of the samples in `r`; `r` must lie inside the grid.
    #[inline]
    pub fn sum(&self, r: &Rect) -> f64 {
        let [a0, a1, a2] = r.lo;
        let [b0, b1, b2] = r.hi;
        match self.dim {
            1 => self.at(b0, 1, 1).sub(self.at(a0, 1, 1)).value(),
            2 => {
                let top = self.at(b0, b1, 1).sub(self.at(a0, b1, 1));
                let bottom = self.at(b0, a1, 1).sub(self.at(a0, a1, 1));
                top.sub(bottom).value()
            }
            _ => {
                let face = |c: usize| {
                    let top = self.at(b0, b1, c).sub(self.at(a0, b1, c));
                    let bottom = self.at(b0, a1, c).sub(self.at(a0, a1, c));
                    top.sub(bottom)
                };
                face(b2).sub(face(a2)).value()
            }
        }
    }

    /// Mean of the samples in `r` without validation.
    #[inline]
    pub fn mean(&self, r: &Rect) -> f64 {
        self.sum(r) / r.cells() as f64
    }
}

/// `(1/|R|) int_R f`, the mean of the covered samples.
pub fn rect_average(sat: &SummedAreaTable, r: &Rect) -> Result<f64> {
    for a in 0..3 {
        if r.lo[a] >= r.hi[a] {
            return Err(Error::EmptyRect);
        }
        if r.hi[a] > sat.shape[a] {
            return Err(Error::InvalidRect(format!("axis {a} range exceeds the grid")));
        }
    }
    Ok(sat.mean(r))
}

/// `(sum f^p w dV)^(1/p)`, with `w = 1` when absent.
pub fn norm_lp(f: &GridFunction, p: f64, weight: Option<&GridFunction>) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::Config(format!("p must be positive, got {p}")));
    }
    if let Some(w) = weight {
        if w.geometry() != f.geometry() {
            return Err(Error::GeometryMismatch);
        }
    }
    let mut sum = 0.0;
    for (i, &v) in f.values().iter().enumerate() {
        let w = weight.map_or(1.0, |w| w.values()[i]);
        sum += v.powf(p) * w;
    }
    Ok((sum * f.geometry().cell_volume()).powf(1.0 / p))
}

/// `inf { lambda > 0 : (1/|R|) int_R Phi(f / lambda) <= 1 }`.
pub fn luxemburg_norm(f: &GridFunction, r: &Rect, phi: &YoungFunction, tol: f64) -> Result<f64> {
    r.check_within(f.geometry())?;
    let values = f.rect_values(r);
    Ok(LuxemburgSolver::new(phi, tol).solve(&values))
}

/// Luxemburg norms of sample sets for a fixed Young function, caching the
/// inverse values used for the initial bracket.
///
/// The solver works on `mu = 1 / lambda`, where `H(mu) = mean Phi(mu v) - 1`
/// is increasing (and convex for convex `Phi`). Newton's method started above
/// the root descends monotonically; a bisection safeguard takes over whenever
/// a step leaves the bracket or `H` is infinite. The returned `lambda` is on
/// the feasible side: the mean of `Phi(v / lambda)` is at most one and
/// `lambda` exceeds the infimum by at most `tol` relative.
#[derive(Clone, Debug)]
pub struct LuxemburgSolver<'a> {
    phi: &'a YoungFunction,
    tol: f64,
    power: Option<f64>,
    inv_cache: HashMap<usize, f64>,
}

impl<'a> LuxemburgSolver<'a> {
    pub fn new(phi: &'a YoungFunction, tol: f64) -> Self {
        LuxemburgSolver { phi, tol: tol.max(1e-15), power: phi.as_power(), inv_cache: HashMap::new() }
    }

    pub fn phi(&self) -> &YoungFunction {
        self.phi
    }

    /// `Phi^-1(y)` for integer `y`, or `None` when `y` exceeds the range.
    fn inverse_of_count(&mut self, y: usize) -> Option<f64> {
        if let Some(&v) = self.inv_cache.get(&y) {
            return (!v.is_nan()).then_some(v);
        }
        let v = inverse(self.phi, y as f64, INVERSE_TOL).unwrap_or(f64::NAN);
        self.inv_cache.insert(y, v);
        (!v.is_nan()).then_some(v)
    }

    pub fn solve(&mut self, values: &[f64]) -> f64 {
        let (sum, max) = values.iter().fold((0.0, 0.0f64), |(s, m), &v| (s + v, m.max(v)));
        self.solve_with_stats(values, sum, max)
    }

    /// As [`solve`](Self::solve) with the sum and maximum of `values` supplied.
    pub fn solve_with_stats(&mut self, values: &[f64], sum: f64, max: f64) -> f64 {
        let count = values.len();
        if count == 0 || max <= 0.0 {
            return 0.0;
        }
        if let Some(r) = self.power {
            if r == 1.0 {
                return sum / count as f64;
            }
            let s: f64 = values.iter().map(|v| v.powf(r)).sum();
            return (s / count as f64).powf(1.0 / r);
        }
        let mean = sum / count as f64;
        let phi = self.phi;
        let h = |mu: f64| -> (f64, f64) {
            let (mut g, mut dg) = (0.0, 0.0);
            for &v in values {
                if v > 0.0 {
                    let (val, slope) = phi.eval_with_slope(mu * v);
                    g += val;
                    dg += v * slope;
                }
            }
            (g / count as f64 - 1.0, dg / count as f64)
        };

        // upper bounds from Jensen and from the largest sample alone
        let cap_bound = phi.domain_cap().map_or(f64::INFINITY, |c| c / max);
        let mut hi = cap_bound;
        if let Some(t1) = self.inverse_of_count(1) {
            hi = hi.min(t1 / mean);
        }
        if let Some(tn) = self.inverse_of_count(count) {
            hi = hi.min(tn / max);
        }
        // lower bound: every sample at the maximum
        let mut lo = match self.inverse_of_count(1) {
            Some(t1) => (t1 / max).min(hi),
            None => hi,
        };
        let (h_hi, _) = h(hi);
        if h_hi <= 0.0 {
            return 1.0 / hi;
        }
        let (h_lo, _) = h(lo);
        if h_lo > 0.0 {
            // only possible for non-convex tables; fall back to a wider search
            while lo > 0.0 && h(lo).0 > 0.0 {
                hi = lo;
                lo *= 0.5;
            }
        }

        let mut mu = hi;
        let (mut h_mu, mut dh_mu) = h(mu);
        for _ in 0..MAX_ITERATIONS {
            if h_mu > 0.0 {
                hi = mu;
            } else {
                lo = mu;
            }
            if hi - lo <= 0.75 * self.tol * lo {
                break;
            }
            let mut next = if h_mu.is_finite() && dh_mu.is_finite() && dh_mu > 0.0 {
                mu - h_mu / dh_mu
            } else {
                f64::NAN
            };
            if !(next > lo && next < hi) {
                next = if lo > 0.0 { (lo * hi).sqrt() } else { 0.5 * hi };
            } else if h_mu > 0.0 && mu - next <= 0.25 * self.tol * mu {
                // Newton has settled from above: probe just below for a
                // feasible point
                next = (mu * (1.0 - 0.5 * self.tol)).max(lo);
                if next <= lo {
                    break;
                }
            }
            mu = next;
            (h_mu, dh_mu) = h(mu);
        }
        1.0 / lo
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom2(n: usize, m: usize) -> Geometry {
        Geometry::new(&[n, m], &[0.5, 0.5], &[1.0, 1.0]).unwrap()
    }

    #[test]
    fn constant_average() {
        let f = GridFunction::constant(geom2(5, 7), 3.0).unwrap();
        let sat = SummedAreaTable::new(&f);
        for r in [Rect::new(&[0, 0], &[5, 7]).unwrap(), Rect::new(&[1, 2], &[3, 3]).unwrap()] {
            assert_eq!(rect_average(&sat, &r).unwrap(), 3.0);
        }
    }

    #[test]
    fn sat_matches_direct_sums_exactly_on_dyadic_data() {
        for (dim, shape) in [(1, [13, 1, 1]), (2, [6, 9, 1]), (3, [4, 5, 3])] {
            let geom = Geometry::new(&shape[..dim], &vec![0.0; dim], &vec![1.0; dim]).unwrap();
            let vals: Vec<f64> = (0..geom.len()).map(|i| ((i * 37) % 64) as f64 / 64.0).collect();
            let f = GridFunction::new(geom, vals).unwrap();
            let sat = SummedAreaTable::new(&f);
            let full = f.geometry().full_rect();
            for l0 in 0..shape[0] {
                for l1 in 0..shape[1] {
                    for l2 in 0..shape[2] {
                        let r = Rect { dim, lo: [l0, l1, l2], hi: full.hi };
                        let direct: f64 = f.rect_values(&r).iter().sum();
                        assert_eq!(sat.sum(&r), direct, "{r}");
                    }
                }
            }
        }
    }

    #[test]
    fn empty_and_outside_rects() {
        assert!(matches!(Rect::new(&[2, 1], &[2, 3]), Err(Error::EmptyRect)));
        let f = GridFunction::constant(geom2(3, 3), 1.0).unwrap();
        let sat = SummedAreaTable::new(&f);
        let outside = Rect::new(&[0, 0], &[4, 1]).unwrap();
        assert!(rect_average(&sat, &outside).is_err());
    }

    #[test]
    fn indicator_average_counts_cells() {
        let geom = Geometry::covering(&[-2.0, -2.0], &[2.0, 2.0], 4).unwrap();
        let f = GridFunction::indicator(geom.clone(), &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert_eq!(f.values().iter().sum::<f64>(), 16.0);
        let sat = SummedAreaTable::new(&f);
        let r = Rect::new(&[6, 6], &[14, 14]).unwrap();
        assert_eq!(rect_average(&sat, &r).unwrap(), 16.0 / 64.0);
    }

    #[test]
    fn norm_lp_examples() {
        let g = Geometry::covering(&[0.0, 0.0], &[1.0, 1.0], 8).unwrap();
        let one = GridFunction::constant(g, 1.0).unwrap();
        assert!((norm_lp(&one, 3.0, None).unwrap() - 1.0).abs() < 1e-15);
        let g = Geometry::covering(&[-1.0, -1.0], &[2.0, 2.0], 8).unwrap();
        let chi = GridFunction::indicator(g, &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert_eq!(norm_lp(&chi, 2.0, None).unwrap(), 1.0);
        let w = GridFunction::constant(chi.geometry().clone(), 1.0).unwrap();
        assert_eq!(norm_lp(&chi, 2.0, Some(&w)).unwrap(), norm_lp(&chi, 2.0, None).unwrap());
    }

    #[test]
    fn luxemburg_constant_and_power() {
        let f = GridFunction::constant(geom2(4, 4), 2.5).unwrap();
        let r = f.geometry().full_rect();
        let sq = YoungFunction::power(2.0).unwrap();
        assert!((luxemburg_norm(&f, &r, &sq, 1e-12).unwrap() - 2.5).abs() < 1e-12);
        let vals: Vec<f64> = (0..16).map(|i| (i % 5) as f64).collect();
        let g = GridFunction::new(geom2(4, 4), vals.clone()).unwrap();
        let direct = (vals.iter().map(|v| v * v).sum::<f64>() / 16.0).sqrt();
        assert!((luxemburg_norm(&g, &r, &sq, 1e-12).unwrap() - direct).abs() < 1e-12 * direct);
    }

    #[test]
    fn luxemburg_newton_matches_power_fast_path() {
        // a tabulated t^3 forces the general solver
        let tab = YoungFunction::tabulate_fn(|t| t.powi(3), 1e-6, 1e6, 50).unwrap();
        let vals: Vec<f64> = (0..30).map(|i| ((i * 7) % 11) as f64 * 0.3).collect();
        let lux = LuxemburgSolver::new(&tab, 1e-10).solve(&vals);
        let direct = (vals.iter().map(|v| v.powi(3)).sum::<f64>() / 30.0).cbrt();
        assert!(lux >= direct * (1.0 - 1e-12) && lux <= direct * (1.0 + 2e-10), "{lux} vs {direct}");
    }

    #[test]
    fn luxemburg_indicator_closed_form() {
        let phi = YoungFunction::power_log(2.0, 1.5).unwrap();
        let mut vals = vec![0.0; 40];
        for v in vals.iter_mut().take(7) {
            *v = 1.0;
        }
        let lux = LuxemburgSolver::new(&phi, 1e-10).solve(&vals);
        let closed = 1.0 / inverse(&phi, 40.0 / 7.0, 1e-14).unwrap();
        assert!((lux - closed).abs() <= 2e-10 * closed, "{lux} vs {closed}");
    }

    #[test]
    fn luxemburg_is_feasible() {
        let phi = YoungFunction::power_log_log(2.0, 1.5, 2).unwrap();
        let vals: Vec<f64> = (0..50).map(|i| ((i * 13) % 17) as f64 / 3.0).collect();
        let lux = LuxemburgSolver::new(&phi, 1e-8).solve(&vals);
        let g = vals.iter().map(|v| phi.eval(v / lux)).sum::<f64>() / 50.0;
        assert!(g <= 1.0 && g > 1.0 - 1e-6, "{g}");
    }

    #[test]
    fn luxemburg_of_zero_is_zero() {
        let phi = YoungFunction::power_log(2.0, 1.5).unwrap();
        assert_eq!(LuxemburgSolver::new(&phi, 1e-10).solve(&[0.0, 0.0]), 0.0);
    }

    #[test]
    fn luxemburg_with_cap_hits_the_jump() {
        // capped at 1: the norm is the largest sample once Phi stays small
        let phi = YoungFunction::power(2.0).unwrap().with_domain_cap(1.0).unwrap();
        let lux = LuxemburgSolver::new(&phi, 1e-10).solve(&[1.0, 0.1, 0.1, 0.1]);
        assert!((lux - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_text_round_trip() {
        let geom = Geometry::new(&[2, 3], &[-1.0, 0.25], &[0.5, 0.125]).unwrap();
        let f = GridFunction::new(geom, vec![0.1, 1.0 / 3.0, 2.0, 0.0, 1e-300, 7.5e10]).unwrap();
        let text = f.to_grid_string();
        assert!(text.starts_with("{\"dim\":2"));
        assert_eq!(GridFunction::parse(&text).unwrap(), f);
    }

    #[test]
    fn grid_parse_errors() {
        let h = r#"{"dim":1,"shape":[3],"origin":[0],"spacing":[1]}"#;
        assert!(GridFunction::parse(&format!("{h}\n1 2 3")).is_ok());
        assert!(matches!(GridFunction::parse(&format!("{h}\n1 2")), Err(Error::Parse { .. })));
        assert!(matches!(GridFunction::parse(&format!("{h}\n1 2 3 4")), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(GridFunction::parse(&format!("{h}\n1 x 3")), Err(Error::Parse { line: 2, .. })));
        assert!(GridFunction::parse(&format!("{h}\n1 NaN 3")).is_err());
        assert!(GridFunction::parse(r#"{"dim":4,"shape":[1,1,1,1],"origin":[0,0,0,0],"spacing":[1,1,1,1]}"#).is_err());
        assert!(GridFunction::parse(r#"{"dim":1,"shape":[2],"origin":[0],"spacing":[0]}"#).is_err());
        assert!(GridFunction::parse("").is_err());
        // negatives are clamped
        let f = GridFunction::parse(&format!("{h}\n-1 2 3")).unwrap();
        assert_eq!(f.values()[0], 0.0);
    }

    #[test]
    fn rect_json_shape() {
        let r = Rect::new(&[1, 2], &[3, 5]).unwrap();
        let s = serde_json::to_string(&r).unwrap();
        assert_eq!(s, "[[1,3],[2,5]]");
        assert_eq!(serde_json::from_str::<Rect>(&s).unwrap(), r);
        assert!(serde_json::from_str::<Rect>("[[3,3]]").is_err());
    }

    #[test]
    fn cells_within_box() {
        let g = Geometry::covering(&[-8.0], &[8.0], 16).unwrap();
        let (lo, hi) = g.cells_within(0, 0.0, 1.0);
        assert_eq!(hi - lo, 16);
        assert!((g.center([lo, 0, 0])[0] - 1.0 / 32.0).abs() < 1e-15);
    }
}

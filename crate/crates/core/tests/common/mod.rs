//! Brute-force oracles: every rectangle is enumerated, its statistic is
//! computed by direct summation over its cells, and the value is pushed to
//! every cell it contains.

#![allow(dead_code)]

use orlicz_core::grid::{Geometry, GridFunction, Rect};
use orlicz_core::young::YoungFunction;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn all_rects(shape: &[usize]) -> Vec<Rect> {
    let mut spans = Vec::new();
    for &n in shape {
        let mut axis = Vec::new();
        for lo in 0..n {
            for hi in lo + 1..=n {
                axis.push((lo, hi));
            }
        }
        spans.push(axis);
    }
    let mut out = Vec::new();
    let dim = shape.len();
    let one = vec![(0usize, 1usize)];
    let s1 = if dim > 1 { &spans[1] } else { &one };
    let s2 = if dim > 2 { &spans[2] } else { &one };
    for &(a0, b0) in &spans[0] {
        for &(a1, b1) in s1 {
            for &(a2, b2) in s2 {
                let lo = [a0, a1, a2];
                let hi = [b0, b1, b2];
                out.push(Rect::new(&lo[..dim], &hi[..dim]).unwrap());
            }
        }
    }
    out
}

pub fn gather(f: &GridFunction, r: &Rect) -> Vec<f64> {
    let g = f.geometry();
    let mut v = Vec::with_capacity(r.cells() as usize);
    r.for_each_cell(|idx| v.push(f.values()[g.index(idx)]));
    v
}

pub fn mean(v: &[f64]) -> f64 {
    let mut s = 0.0;
    for x in v {
        s += x;
    }
    s / v.len() as f64
}

/// Smallest `l` with `mean Phi(v / l) <= 1`, by bisection on `log l` to
/// relative width `1e-14`; returns the feasible end.
pub fn luxemburg(phi: &YoungFunction, v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0.0;
    }
    let modular = |l: f64| v.iter().map(|x| phi.eval(x / l)).sum::<f64>() / v.len() as f64;
    let mut hi = max;
    while modular(hi) > 1.0 {
        hi *= 2.0;
    }
    let mut lo = hi;
    while modular(lo) <= 1.0 {
        lo /= 2.0;
    }
    while hi / lo - 1.0 > 1e-14 {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        if modular(mid) <= 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn push(f: &GridFunction, stat: impl Fn(&Rect) -> f64) -> Vec<f64> {
    let g = f.geometry();
    let mut out = vec![0.0f64; g.len()];
    for r in all_rects(&g.shape) {
        let s = stat(&r);
        r.for_each_cell(|idx| {
            let k = g.index(idx);
            if s > out[k] {
                out[k] = s;
            }
        });
    }
    out
}

pub fn brute_strong(f: &GridFunction) -> Vec<f64> {
    push(f, |r| mean(&gather(f, r)))
}

pub fn brute_orlicz(f: &GridFunction, phi: &YoungFunction) -> Vec<f64> {
    push(f, |r| luxemburg(phi, &gather(f, r)))
}

pub fn brute_multilinear(fs: &[GridFunction]) -> Vec<f64> {
    push(&fs[0], |r| fs.iter().map(|f| mean(&gather(f, r))).product())
}

/// Values `k / 8`, `k` in `0..64`: every partial sum is exact, so summed-area
/// averages coincide with direct averages bit for bit.
pub fn dyadic_grid(shape: &[usize], rng: &mut ChaCha8Rng) -> GridFunction {
    let dim = shape.len();
    let geom = Geometry::new(shape, &vec![0.5; dim], &vec![1.0; dim]).unwrap();
    let vals = (0..geom.len()).map(|_| rng.random_range(0..64) as f64 / 8.0).collect();
    GridFunction::new(geom, vals).unwrap()
}

pub fn random_shape(dim: usize, max: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    (0..dim).map(|_| rng.random_range(1..=max)).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

mod common;

use orlicz_core::grid::{Geometry, GridFunction, LUXEMBURG_TOL};
use orlicz_core::maximal::{
    multilinear_maximal, orlicz_maximal, orlicz_maximal_with, strong_maximal, strong_maximal_with, Basis, MaximalOptions,
};
use orlicz_core::young::YoungFunction;
use proptest::prelude::*;

fn grid(dim: usize, max: usize) -> impl Strategy<Value = GridFunction> {
    proptest::collection::vec(1usize..=max, dim).prop_flat_map(move |shape| {
        let n: usize = shape.iter().product();
        proptest::collection::vec(0.0f64..4.0, n).prop_map(move |vals| {
            let geom = Geometry::new(&shape, &vec![0.5; shape.len()], &vec![1.0; shape.len()]).unwrap();
            GridFunction::new(geom, vals).unwrap()
        })
    })
}

fn grid_any() -> impl Strategy<Value = GridFunction> {
    prop_oneof![grid(1, 12), grid(2, 7), grid(3, 4)]
}

fn general() -> YoungFunction {
    YoungFunction::power_log(2.0, 1.5).unwrap()
}

fn close(a: &[f64], b: &[f64], rel: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= rel * x.abs().max(y.abs()) + 1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn matches_brute_force(f in grid_any()) {
        let m = strong_maximal(&f, Basis::rectangles()).unwrap().field;
        prop_assert!(close(m.values(), &common::brute_strong(&f), 1e-13));
        let phi = general();
        let o = orlicz_maximal(&f, &phi, Basis::rectangles()).unwrap().field;
        prop_assert!(close(o.values(), &common::brute_orlicz(&f, &phi), LUXEMBURG_TOL + 1e-13));
    }

    #[test]
    fn monotone(f in grid(2, 6), bumps in proptest::collection::vec(0.0f64..2.0, 36)) {
        let g = GridFunction::new(f.geometry().clone(), f.values().iter().zip(&bumps).map(|(a, b)| a + b).collect()).unwrap();
        let (mf, mg) = (strong_maximal(&f, Basis::rectangles()).unwrap().field, strong_maximal(&g, Basis::rectangles()).unwrap().field);
        prop_assert!(mf.values().iter().zip(mg.values()).all(|(a, b)| *a <= *b * (1.0 + 1e-14)));
        let phi = general();
        let (of, og) = (orlicz_maximal(&f, &phi, Basis::rectangles()).unwrap().field, orlicz_maximal(&g, &phi, Basis::rectangles()).unwrap().field);
        prop_assert!(of.values().iter().zip(og.values()).all(|(a, b)| *a <= *b * (1.0 + 2.0 * LUXEMBURG_TOL)));
    }

    #[test]
    fn homogeneous(f in grid_any(), c in 0.01f64..100.0) {
        let cf = f.map(|v| c * v).unwrap();
        let m = strong_maximal(&f, Basis::rectangles()).unwrap().field.map(|v| c * v).unwrap();
        let mc = strong_maximal(&cf, Basis::rectangles()).unwrap().field;
        prop_assert!(close(m.values(), mc.values(), 1e-13));
        let phi = general();
        let o = orlicz_maximal(&f, &phi, Basis::rectangles()).unwrap().field.map(|v| c * v).unwrap();
        let oc = orlicz_maximal(&cf, &phi, Basis::rectangles()).unwrap().field;
        prop_assert!(close(o.values(), oc.values(), 4.0 * LUXEMBURG_TOL));
    }

    #[test]
    fn dominates_cell_value(f in grid_any()) {
        let m = strong_maximal(&f, Basis::rectangles()).unwrap().field;
        prop_assert!(m.values().iter().zip(f.values()).all(|(m, v)| m >= v));
    }

    #[test]
    fn sub_bases_are_dominated(f in grid(2, 9)) {
        let rect = strong_maximal(&f, Basis::rectangles()).unwrap().field;
        for basis in [Basis::cubes(), Basis::dyadic()] {
            let sub = strong_maximal(&f, basis).unwrap().field;
            prop_assert!(sub.values().iter().zip(rect.values()).all(|(s, r)| *s <= *r));
        }
    }

    #[test]
    fn power_one_equals_average(f in grid_any()) {
        let a = strong_maximal(&f, Basis::rectangles()).unwrap().field;
        let o = orlicz_maximal(&f, &YoungFunction::power(1.0).unwrap(), Basis::rectangles()).unwrap().field;
        prop_assert_eq!(a.values(), o.values());
    }

    #[test]
    fn pruning_and_threads_do_not_change_results(f in grid(2, 7)) {
        let phi = general();
        let base = orlicz_maximal_with(&f, &phi, Basis::rectangles(), &MaximalOptions { prune: false, parallel: false, ..Default::default() }).unwrap();
        let fast = orlicz_maximal_with(&f, &phi, Basis::rectangles(), &MaximalOptions::default()).unwrap();
        prop_assert_eq!(base.field.values(), fast.field.values());
        let s1 = strong_maximal_with(&f, Basis::rectangles(), &MaximalOptions { parallel: false, ..Default::default() }).unwrap();
        let s2 = strong_maximal(&f, Basis::rectangles()).unwrap();
        prop_assert_eq!(s1.field.values(), s2.field.values());
    }

    #[test]
    fn multilinear_matches_brute_force(f in grid(2, 6), scale in 0.1f64..3.0) {
        let g = f.map(|v| (v * scale).sin().abs()).unwrap();
        let fs = [f, g];
        let m = multilinear_maximal(&fs, Basis::rectangles()).unwrap().field;
        prop_assert!(close(m.values(), &common::brute_multilinear(&fs), 1e-13));
    }
}

#[test]
fn dyadic_values_are_bit_identical_to_brute_force() {
    let mut rng = common::rng(77);
    for _ in 0..6 {
        let shape = common::random_shape(2, 10, &mut rng);
        let f = common::dyadic_grid(&shape, &mut rng);
        let g = common::dyadic_grid(&shape, &mut rng);
        assert_eq!(strong_maximal(&f, Basis::rectangles()).unwrap().field.values(), common::brute_strong(&f).as_slice());
        let fg = [f, g];
        assert_eq!(multilinear_maximal(&fg, Basis::rectangles()).unwrap().field.values(), common::brute_multilinear(&fg).as_slice());
    }
}

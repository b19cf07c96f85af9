use orlicz_core::grid::{Geometry, GridFunction};
use orlicz_core::maximal::Basis;
use orlicz_core::weights::{ap_constant, bump_constant, sawyer_constant, FamilySpec};
use orlicz_core::young::YoungFunction;
use proptest::prelude::*;

fn weight(n: usize) -> impl Strategy<Value = GridFunction> {
    proptest::collection::vec(-2.0f64..2.0, n * n).prop_map(move |logs| {
        let geom = Geometry::new(&[n, n], &[0.5, 0.5], &[1.0, 1.0]).unwrap();
        GridFunction::new(geom, logs.into_iter().map(f64::exp).collect()).unwrap()
    })
}

fn phi() -> YoungFunction {
    YoungFunction::power_log(3.0, 1.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn witness_reproduces_the_sup(u in weight(5), v in weight(5)) {
        let rep = bump_constant(&u, &v, &phi(), 2.0, &FamilySpec::exhaustive(Basis::rectangles())).unwrap();
        let r = rep.argmax_rect.clone().unwrap();
        let again = bump_constant(&u, &v, &phi(), 2.0, &FamilySpec::explicit(Basis::rectangles(), vec![r])).unwrap();
        prop_assert!((again.sup_constant - rep.sup_constant).abs() <= 1e-12 * rep.sup_constant);
    }

    #[test]
    fn common_scaling_cancels(u in weight(4), v in weight(4), c in 0.01f64..100.0) {
        let fam = FamilySpec::exhaustive(Basis::rectangles());
        let a = bump_constant(&u, &v, &phi(), 2.0, &fam).unwrap().sup_constant;
        let (cu, cv) = (u.map(|x| c * x).unwrap(), v.map(|x| c * x).unwrap());
        let b = bump_constant(&cu, &cv, &phi(), 2.0, &fam).unwrap().sup_constant;
        prop_assert!((a - b).abs() <= 1e-9 * a, "{} {}", a, b);
    }

    #[test]
    fn larger_families_give_larger_constants(u in weight(5), v in weight(5), samples in 1usize..40, seed in any::<u64>()) {
        let full = bump_constant(&u, &v, &phi(), 2.0, &FamilySpec::exhaustive(Basis::rectangles())).unwrap().sup_constant;
        let part = bump_constant(&u, &v, &phi(), 2.0, &FamilySpec::stratified(Basis::rectangles(), samples, seed)).unwrap().sup_constant;
        prop_assert!(part <= full);
        let cubes = bump_constant(&u, &v, &phi(), 2.0, &FamilySpec::exhaustive(Basis::cubes())).unwrap().sup_constant;
        prop_assert!(cubes <= full);
    }

    #[test]
    fn ap_at_least_one(w in weight(5), p in 1.1f64..4.0) {
        let rep = ap_constant(&w, p, &FamilySpec::exhaustive(Basis::rectangles())).unwrap();
        prop_assert!(rep.sup_constant >= 1.0 - 1e-9);
    }

    #[test]
    fn sawyer_is_finite(u in weight(4), v in weight(4)) {
        let rep = sawyer_constant(&u, &v, 2.0, &FamilySpec::exhaustive(Basis::cubes())).unwrap();
        prop_assert!(rep.sup_constant.is_finite() && rep.sup_constant > 0.0);
    }
}

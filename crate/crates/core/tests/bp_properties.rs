use orlicz_core::bp::{bp_partial, bp_star_partial, classify, classify_from, Label, Mode};
use orlicz_core::young::YoungFunction;
use proptest::prelude::*;

fn families() -> Vec<YoungFunction> {
    vec![
        YoungFunction::power(1.5).unwrap(),
        YoungFunction::power(2.0).unwrap(),
        YoungFunction::power(2.5).unwrap(),
        YoungFunction::power_log(2.0, 0.5).unwrap(),
        YoungFunction::power_log(2.0, 1.5).unwrap(),
        YoungFunction::power_log(2.0, 3.5).unwrap(),
        YoungFunction::power_log_log(2.0, 2.0, 2).unwrap(),
        YoungFunction::power_log_log(2.0, -1.0, 3).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn partials_are_monotone(k in 0usize..8, a in 1.0f64..6.0, b in 0.0f64..3.0, n in 1u32..=3) {
        let phi = &families()[k];
        let (t1, t2) = (10f64.powf(a), 10f64.powf(a + b));
        prop_assert!(bp_partial(phi, 2.0, 1.0, t1).unwrap() <= bp_partial(phi, 2.0, 1.0, t2).unwrap());
        prop_assert!(bp_star_partial(phi, 2.0, n, 1.0, t1).unwrap() <= bp_star_partial(phi, 2.0, n, 1.0, t2).unwrap());
    }

    #[test]
    fn lower_limit_does_not_change_label(k in 0usize..8, c in 0.5f64..10.0) {
        let phi = &families()[k];
        for mode in [Mode::Bp, Mode::BpStar] {
            prop_assert_eq!(classify_from(phi, 2.0, 2, mode, c).unwrap().label, classify(phi, 2.0, 2, mode).unwrap().label);
        }
    }
}

#[test]
fn star_implies_plain() {
    for phi in families() {
        for n in 1..=3 {
            if classify(&phi, 2.0, n, Mode::BpStar).unwrap().label == Label::Converges {
                assert_eq!(classify(&phi, 2.0, n, Mode::Bp).unwrap().label, Label::Converges, "{phi} n={n}");
            }
        }
    }
}

#[test]
fn growing_dimension_never_helps() {
    for phi in families() {
        let labels: Vec<Label> = (1..=3).map(|n| classify(&phi, 2.0, n, Mode::BpStar).unwrap().label).collect();
        for w in labels.windows(2) {
            assert!(!(w[0] == Label::Diverges && w[1] == Label::Converges), "{phi}: {labels:?}");
        }
    }
}

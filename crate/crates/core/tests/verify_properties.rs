mod common;

use orlicz_core::bp::Label;
use orlicz_core::grid::{luxemburg_norm, Geometry, GridFunction, Rect, LUXEMBURG_TOL};
use orlicz_core::maximal::{orlicz_maximal, strong_maximal, Basis};
use orlicz_core::verify::{
    fefferman_stein_probe, holder_orlicz_suite, lp_bound_probe, multilinear_probe, necessity_construction,
    transfer_sides, two_weight_probe, Certificate, FieldSpec, Generator, ProbeSuite,
};
use orlicz_core::weights::{bump_constant, FamilySpec, SetSampler, WeightSystem};
use orlicz_core::young::{complementary, inverse, YoungFunction, INVERSE_TOL};

fn suite(resolutions: Vec<usize>) -> ProbeSuite {
    ProbeSuite {
        dim: 2,
        half_widths: vec![2.0],
        resolutions,
        generators: vec![
            Generator::Indicator { lo: vec![0.0, 0.0], hi: vec![1.0, 1.0] },
            Generator::RandomUnion { count: 3, max_rects: 3, max_side: 1.0 },
            Generator::SmoothBump { count: 2, width: 0.3 },
            Generator::Spike { count: 2 },
        ],
        seed: 3,
        placement: 1.5,
    }
}

#[test]
fn reruns_are_bit_identical() {
    let phi = YoungFunction::power_log(2.0, 2.5).unwrap();
    let a = lp_bound_probe(&phi, 2.0, Basis::rectangles(), &suite(vec![4])).unwrap();
    let b = lp_bound_probe(&phi, 2.0, Basis::rectangles(), &suite(vec![4])).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn power_one_probe_is_the_average_probe() {
    let s = suite(vec![4]);
    let rep = lp_bound_probe(&YoungFunction::power(1.0).unwrap(), 2.0, Basis::rectangles(), &s).unwrap();
    let geom = &s.geometries().unwrap()[0].2;
    for ((id, f), e) in s.cases_on(geom).unwrap().iter().zip(&rep.entries) {
        assert_eq!(id, &e.case);
        let m = strong_maximal(f, Basis::rectangles()).unwrap().field;
        let num: f64 = m.values().iter().map(|v| v.powf(2.0) * 1.0).sum();
        let den: f64 = f.values().iter().map(|v| v.powf(2.0) * 1.0).sum();
        assert_eq!(e.ratio.to_bits(), (num / den).powf(0.5).to_bits());
    }
}

#[test]
fn diverging_certificate_flags_the_probe() {
    let bad = YoungFunction::power_log(2.0, 1.5).unwrap();
    let rep = lp_bound_probe(&bad, 2.0, Basis::rectangles(), &suite(vec![2])).unwrap();
    assert!(rep.expect_unbounded);
    assert!(matches!(&rep.certificates[0], Certificate::Verdict { verdict, .. } if verdict.label == Label::Diverges));
    let good = YoungFunction::power_log(2.0, 2.5).unwrap();
    assert!(!lp_bound_probe(&good, 2.0, Basis::rectangles(), &suite(vec![2])).unwrap().expect_unbounded);
}

#[test]
fn spike_on_small_grid_matches_brute_force() {
    let phi = YoungFunction::power(1.5).unwrap();
    let s = ProbeSuite {
        dim: 2,
        half_widths: vec![4.0],
        resolutions: vec![1],
        generators: vec![Generator::Spike { count: 1 }],
        seed: 0,
        placement: 4.0,
    };
    let geom = s.geometries().unwrap()[0].2.clone();
    let spike = s.cases_on(&geom).unwrap()[0].1.clone();
    assert_eq!(spike.values().iter().filter(|v| **v > 0.0).count(), 1);
    let w = GridFunction::from_fn(geom, |x| 1.0 + 0.1 * x[0] + 0.05 * x[1] * x[1]).unwrap();
    let rep = fefferman_stein_probe(&phi, 2.0, &FieldSpec::Sampled(w.clone()), 0.5, None, &s).unwrap();
    let mf = common::brute_orlicz(&spike, &phi);
    let mw = common::brute_strong(&w);
    let num: f64 = mf.iter().zip(w.values()).map(|(m, w)| m * m * w).sum();
    let den: f64 = spike.values().iter().zip(&mw).map(|(f, m)| f * f * m).sum();
    let exact = (num / den).sqrt();
    assert!((rep.sup - exact).abs() <= 1e-9 * exact, "{} {exact}", rep.sup);
}

#[test]
fn unit_weights_reduce_two_weight_to_unweighted() {
    let s = suite(vec![4]);
    let one = FieldSpec::Constant { value: 1.0 };
    let phi = YoungFunction::power(3.0).unwrap();
    let tw = two_weight_probe(&one, &one, &phi, 2.0, None, &FamilySpec::exhaustive(Basis::rectangles()), &s).unwrap();
    let lp = lp_bound_probe(&YoungFunction::power(1.0).unwrap(), 2.0, Basis::rectangles(), &s).unwrap();
    for (a, b) in tw.entries.iter().zip(&lp.entries) {
        assert!((a.ratio - b.ratio * b.ratio).abs() <= 1e-12 * a.ratio);
    }
    assert!(tw.certificates.iter().any(|c| matches!(c, Certificate::Condition { .. })));
}

#[test]
fn necessity_pair_for_perturbed_indicator() {
    let geom = Geometry::centered_cube(2, 3.0, 2).unwrap();
    let eps = 1e-3;
    let g = GridFunction::indicator(geom.clone(), &[0.0, 0.0], &[1.0, 1.0]).unwrap().map(|v| v + eps).unwrap();
    let phi = YoungFunction::power(3.0).unwrap();
    let (u, v) = necessity_construction(&g, 2.0, &phi).unwrap();
    // far from the cube, 1/u tracks the closed-form field 1/Phi^-1(y1 y2)
    for (i, &ui) in u.values().iter().enumerate() {
        let c = geom.center(geom.unflatten(i));
        if c[0] > 1.2 && c[1] > 1.2 {
            let closed = 1.0 / inverse(&phi, c[0] * c[1], INVERSE_TOL).unwrap();
            let got = 1.0 / ui;
            assert!((got - closed).abs() <= 0.5 * closed + eps.sqrt(), "{c:?}: {got} vs {closed}");
        }
    }
    let k = bump_constant(&u, &v, &phi, 2.0, &FamilySpec::exhaustive(Basis::rectangles())).unwrap().sup_constant;
    assert!(k <= 1.0 + 1e-9, "{k}");
}

#[test]
fn holder_reductions_in_closed_form() {
    let phi = YoungFunction::power_log(2.0, 1.5).unwrap();
    let bar = complementary(&phi);
    let geom = Geometry::new(&[6, 6], &[0.5, 0.5], &[1.0, 1.0]).unwrap();
    let r = Rect::new(&[0, 0], &[6, 6]).unwrap();
    let chi = GridFunction::indicator(geom.clone(), &[0.0, 0.0], &[2.0, 3.0]).unwrap();
    // f = g = chi_E: mean = |E|/|R| and both norms are 1/Phi^-1(|R|/|E|)
    let ratio = 36.0 / 6.0;
    let lhs = 6.0 / 36.0;
    let nf = luxemburg_norm(&chi, &r, &phi, LUXEMBURG_TOL).unwrap();
    let ng = luxemburg_norm(&chi, &r, &bar, LUXEMBURG_TOL).unwrap();
    assert!((nf - 1.0 / inverse(&phi, ratio, 1e-14).unwrap()).abs() < 1e-8 * nf);
    assert!((ng - 1.0 / inverse(&bar, ratio, 1e-14).unwrap()).abs() < 1e-8 * ng);
    assert!(lhs <= 2.0 * nf * ng);
    // g = 1: mean f <= 2 ||f||_Phi ||1||_Phi-bar
    let f = GridFunction::from_fn(geom, |x| x[0] * x[1]).unwrap();
    let mean = f.values().iter().sum::<f64>() / 36.0;
    let one = 1.0 / inverse(&bar, 1.0, 1e-14).unwrap();
    assert!(mean <= 2.0 * luxemburg_norm(&f, &r, &phi, LUXEMBURG_TOL).unwrap() * one);
    let rep = holder_orlicz_suite(&phi, 600, 9).unwrap();
    assert!(rep.pass);
}

#[test]
fn transfer_with_unit_weight_is_plain_average_ratio() {
    let geom = Geometry::centered_cube(2, 2.0, 2).unwrap();
    let f = GridFunction::from_fn(geom.clone(), |x| (-x[0] * x[0] - x[1] * x[1]).exp()).unwrap();
    let one = GridFunction::constant(geom, 1.0).unwrap();
    let phi = YoungFunction::power(3.0).unwrap();
    let (lhs, rhs) = transfer_sides(&phi, 2.0, &f, &one).unwrap();
    // M_Phi-bar(1) is the constant 1 / Phi-bar^-1(1)
    let c = 1.0 / inverse(&complementary(&phi), 1.0, 1e-14).unwrap();
    let m = strong_maximal(&f, Basis::rectangles()).unwrap().field;
    let plain: f64 = m.values().iter().map(|v| (v / c).powi(2)).sum();
    assert!((lhs - plain).abs() <= 1e-6 * plain, "{lhs} {plain}");
    assert!(rhs > 0.0);
}

#[test]
fn multilinear_probe_is_finite_and_stable() {
    let s = ProbeSuite {
        dim: 2,
        half_widths: vec![2.0],
        resolutions: vec![3],
        generators: vec![Generator::RandomUnion { count: 4, max_rects: 2, max_side: 1.5 }, Generator::SmoothBump { count: 2, width: 0.4 }],
        seed: 4,
        placement: 1.5,
    };
    let geom = s.geometries().unwrap()[0].2.clone();
    let w1 = GridFunction::from_fn(geom.clone(), |x| (0.2 * x[0]).exp()).unwrap();
    let w2 = GridFunction::from_fn(geom.clone(), |x| (0.2 * x[1]).exp()).unwrap();
    let nu = w1.zip_with(&w2, |a, b| a * b).unwrap();
    let sys = WeightSystem::new(&nu, &[w1, w2], &[4.0, 4.0]).unwrap();
    let psis = vec![YoungFunction::power_log(4.0, 1.0).unwrap(), YoungFunction::power_log(4.0, 1.0).unwrap()];
    let fam = FamilySpec::stratified(Basis::rectangles(), 200, 4);
    let a = multilinear_probe(&sys, &psis, &fam, &s).unwrap();
    let b = multilinear_probe(&sys, &psis, &fam, &s).unwrap();
    assert!(a.sup.is_finite() && a.sup > 0.0);
    assert_eq!(a.sup.to_bits(), b.sup.to_bits());
    assert_eq!(a.certificates.len(), 3);
}

#[test]
fn condition_a_certificate_is_attached() {
    let phi = YoungFunction::power(1.5).unwrap();
    let sampler = SetSampler { sets: 16, max_rects: 3, seed: 1 };
    let rep = fefferman_stein_probe(&phi, 2.0, &FieldSpec::Radial { exponent: 0.5 }, 0.5, Some(&sampler), &suite(vec![2])).unwrap();
    assert!(rep.certificates.iter().any(|c| matches!(c, Certificate::Condition { report, .. } if report.sup_constant.is_finite())));
    let m = orlicz_maximal(&GridFunction::constant(Geometry::centered_cube(1, 1.0, 2).unwrap(), 1.0).unwrap(), &phi, Basis::rectangles()).unwrap();
    assert!(m.field.values().iter().all(|v| (v - 1.0).abs() < 1e-9));
}

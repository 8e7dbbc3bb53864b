mod common;

use klyshko_core::fock::{
    conditional_click_prob, heralded_g2_analytic, heralded_pmf, joint_click_prob, marginal_click_prob,
    split_click_probs, squeeze_to_zeta, thermal_pmf, truncation_nmax, SqueezeParam, TRUNCATION_TOLERANCE,
};
use proptest::prelude::*;

fn r_for_zeta(zeta: f64) -> f64 {
    zeta.sqrt().atanh()
}

proptest! {
    #[test]
    fn bayes_consistency(e1 in 0.01f64..1.0, e2 in 0.01f64..1.0, r in 0.01f64..2.0) {
        let z = squeeze_to_zeta(r).unwrap();
        let lhs = conditional_click_prob(e1, e2, r).unwrap() * marginal_click_prob(z, e1).unwrap();
        let rhs = conditional_click_prob(e2, e1, r).unwrap() * marginal_click_prob(z, e2).unwrap();
        let joint = joint_click_prob(SqueezeParam::new(r).unwrap(), e1, e2).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.max(1e-300), "{lhs} {rhs}");
        prop_assert!((lhs - joint).abs() <= 1e-12 * joint.max(1e-300));
    }

    #[test]
    fn monotone_in_r_and_eta2(e1 in 0.01f64..1.0, e2 in 0.0f64..0.99, r in 0.0f64..3.0, dr in 0.0f64..0.5, de in 0.0f64..0.01) {
        let p = conditional_click_prob(e1, e2, r).unwrap();
        prop_assert!(conditional_click_prob(e1, e2, r + dr).unwrap() >= p - 1e-15);
        prop_assert!(conditional_click_prob(e1, e2 + de, r).unwrap() >= p - 1e-15);
    }

    #[test]
    fn closed_form_matches_fock_sum(e1 in 0.05f64..1.0, e2 in 0.05f64..1.0, zeta in 1e-6f64..0.9) {
        let r = r_for_zeta(zeta);
        let closed = conditional_click_prob(e1, e2, r).unwrap();
        let brute = common::brute_conditional(e1, e2, r);
        prop_assert!((closed - brute).abs() < 1e-10, "{closed} vs {brute}");
    }

    #[test]
    fn heralded_pmf_is_normalized(zeta in 0.0f64..0.95, e1 in 0.01f64..1.0) {
        let n = truncation_nmax(zeta).unwrap();
        let d = heralded_pmf(zeta, e1, n).unwrap();
        prop_assert!((d.total() - 1.0).abs() < TRUNCATION_TOLERANCE.max(1e-13));
        prop_assert!(d.probs()[0] == 0.0);
    }

    #[test]
    fn loss_commutes_with_detection(t1 in 0.05f64..1.0, d1 in 0.05f64..1.0, t2 in 0.05f64..1.0, d2 in 0.05f64..1.0, zeta in 1e-4f64..0.5) {
        let r = r_for_zeta(zeta);
        let merged = conditional_click_prob(t1 * d1, t2 * d2, r).unwrap();
        let staged = common::brute_lossy_conditional(t1, d1, t2, d2, r);
        prop_assert!((merged - staged).abs() < 1e-12, "{merged} vs {staged}");
    }
}

#[test]
fn thermal_truncation_tail_is_certified() {
    for &z in &[1e-6, 0.01, 0.3, 0.9, 0.99] {
        let n = truncation_nmax(z).unwrap();
        let d = thermal_pmf(z, n).unwrap();
        assert!(1.0 - d.total() < 1.01 * TRUNCATION_TOLERANCE, "zeta {z}");
    }
    assert_eq!(truncation_nmax(0.999_999_99).unwrap(), 4096);
}

#[test]
fn split_probabilities_match_multinomial_routing() {
    for &(zeta, e1, split, e2, e3) in &[
        (0.06, 0.63, 0.5, 0.57, 0.57),
        (0.2, 0.3, 0.3, 0.9, 0.4),
        (0.5, 1.0, 0.5, 1.0, 1.0),
        (0.01, 0.1, 0.7, 0.2, 0.05),
    ] {
        let d = heralded_pmf(zeta, e1, truncation_nmax(zeta).unwrap()).unwrap();
        let got = split_click_probs(&d, split, e2, e3, 0.0, 0.0).unwrap();
        let (p2, p3, p23) = common::brute_split(zeta, e1, split, e2, e3);
        assert!((got.p2 - p2).abs() < 1e-12);
        assert!((got.p3 - p3).abs() < 1e-12);
        assert!((got.p23 - p23).abs() < 1e-12, "{} vs {p23}", got.p23);
        let g = heralded_g2_analytic(zeta, e1, split, e2, e3, truncation_nmax(zeta).unwrap()).unwrap();
        assert!((g - p23 / (p2 * p3)).abs() < 1e-9 * g.max(1.0));
    }
}

#[test]
fn poissonian_noise_alone_gives_unit_g2() {
    // A blind split path with only independent noise: no correlations.
    let d = heralded_pmf(0.1, 0.5, 60).unwrap();
    let p = split_click_probs(&d, 0.5, 0.0, 0.0, 0.01, 0.02).unwrap();
    assert!((p.g2().unwrap() - 1.0).abs() < 1e-12);
}

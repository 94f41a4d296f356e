mod support;

use detinfo::metrics::{kondo_di, ConfusionCounts};
use detinfo::{binary_entropy, log_i0, marcum_q1, sinc};
use proptest::prelude::*;
use support::oracles;

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig::with_cases(n)
}

proptest! {
    #![proptest_config(cases(1000))]

    #[test]
    fn log_i0_matches_trapezoid(x in 0.0f64..700.0) {
        let got = log_i0(x).unwrap().ln();
        let want = oracles::log_i0(x);
        if x <= 20.0 {
            prop_assert!((got - want).abs() <= 1e-10, "x={x}: {got} vs {want}");
        } else {
            prop_assert!(((got - want) / want).abs() <= 1e-10, "x={x}: {got} vs {want}");
        }
    }

    #[test]
    fn marcum_matches_simpson(a in 0.0f64..6.0, b in 0.0f64..6.0) {
        let got = marcum_q1(a, b).unwrap();
        let want = oracles::marcum_q1(a, b);
        prop_assert!((got - want).abs() <= 1e-8, "Q({a},{b}) = {got} vs {want}");
    }

    #[test]
    fn sinc_matches_direct(x in -64.0f64..64.0) {
        prop_assert!((sinc(x) - oracles::sinc(x)).abs() <= 1e-12);
    }

    #[test]
    fn binary_entropy_matches_log2_route(p in 0.0f64..=1.0) {
        prop_assert!((binary_entropy(p).unwrap() - oracles::binary_entropy(p)).abs() <= 1e-12);
    }

    #[test]
    fn kondo_equals_plug_in_mi(n00 in 0u64..500, n01 in 0u64..500, n10 in 0u64..500, n11 in 0u64..500) {
        prop_assume!(n00 + n01 > 0 && n10 + n11 > 0);
        let counts = ConfusionCounts { n00, n01, n10, n11 };
        let prior = counts.empirical_prior().unwrap();
        let got = kondo_di(&counts, prior).unwrap().value_bits;
        let want = oracles::mutual_information_2x2([[n00, n01], [n10, n11]]);
        prop_assert!((got - want).abs() <= 1e-12, "{got} vs {want}");
    }
}

#[test]
fn frozen_values() {
    assert_eq!(log_i0(0.0).unwrap().ln(), 0.0);
    assert!((log_i0(700.0).unwrap().ln() - 695.805_699_998_443_4).abs() < 1e-9);
    assert!((sinc(0.5) - 2.0 / std::f64::consts::PI).abs() < 1e-15);
    // Q₁(√2, √2) from the quadrature oracle.
    let s = 2f64.sqrt();
    assert!((marcum_q1(s, s).unwrap() - oracles::marcum_q1(s, s)).abs() < 1e-9);
    for b in [0.3, 1.0, 2.5] {
        assert!((marcum_q1(0.0, b).unwrap() - (-b * b / 2.0).exp()).abs() < 1e-14);
    }
}

#[test]
fn marcum_large_arguments_stay_in_range() {
    for (a, b) in [
        (30.0, 29.0),
        (30.0, 31.0),
        (50.0, 50.0),
        (100.0, 90.0),
        (5.0, 40.0),
    ] {
        let q = marcum_q1(a, b).unwrap();
        assert!((0.0..=1.0).contains(&q), "Q({a},{b}) = {q}");
    }
    assert!(marcum_q1(100.0, 90.0).unwrap() > 0.999_999);
    assert!(marcum_q1(5.0, 40.0).unwrap() < 1e-100);
}

use proptest::prelude::*;

use nfl_core::convex::{convex_diff_lower_bound, delta_p_bruteforce, delta_p_closed_form, Parabola};

#[test]
fn reference_instances() {
    let p = Parabola::<f64>::new(1.0, 0.0, 1.0).unwrap();
    assert!((delta_p_closed_form(&p) - 2f64.sqrt()).abs() <= 1e-12);
    let q = Parabola::<f64>::new(0.1, 0.0, 1.0).unwrap();
    assert!((delta_p_closed_form(&q) - 0.6).abs() <= 1e-12);
    for p in [p, q] {
        let b = delta_p_bruteforce(&p, 4096).unwrap();
        assert!((b.best - delta_p_closed_form(&p)).abs() <= 1e-6);
    }
}

#[test]
fn f32_closed_form() {
    let p = Parabola::<f32>::new(1.0, 0.0, 1.0).unwrap();
    assert!((delta_p_closed_form(&p) - std::f32::consts::SQRT_2).abs() <= 1e-6);
}

#[test]
fn quadratic_samples_meet_the_bound_with_equality() {
    // g(x) = x²/2 is C-convex for C = 1 with zero margin
    let samples: Vec<(f64, f64)> = (0..41).map(|i| {
        let x = -1.0 + i as f64 * 0.05;
        (x, x * x / 2.0)
    }).collect();
    let r = convex_diff_lower_bound(&samples, 1.0, 1e-12).unwrap();
    assert!(r.hypotheses_hold, "{r:?}");
    assert!(r.worst_margin.unwrap() >= -1e-12, "{r:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn brute_force_never_exceeds_closed_form(
        c in 0.25f64..4.0,
        b in -1.5f64..1.5,
        extra in 0.0f64..2.0,
    ) {
        let a = (b * b / (2.0 * c * c)).max(b * b / (2.0 * c)) + extra;
        let p = Parabola::new(a, b, c).unwrap();
        let closed = delta_p_closed_form(&p);
        let brute = delta_p_bruteforce(&p, 2048).unwrap();
        prop_assert!(brute.best <= closed + 1e-9);
        prop_assert!(closed - brute.best <= 1e-4);
    }
}

use proptest::prelude::*;
use tq_core::tq::{self, Form, TqParams, TqState};

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn reference_values_at_q_two() {
    let p = TqParams::new(2.0).unwrap();
    let d = tq::h0_down(1.0, &p, Form::Phi11).unwrap().value;
    assert!((d - 0.539095662989877).abs() < 1e-13);
    let z = tq::h_to_zero(0, 1.0, &p).unwrap().value;
    assert!((z - 0.2947202856337352).abs() < 1e-13);
}

#[test]
fn large_lambda_resolvent_concentrates_at_the_start() {
    let p = TqParams::new(2.0).unwrap();
    let lam = 1e6;
    let r = tq::resolvent_killed(0, 0, lam, &p).unwrap();
    assert!((lam * r - 1.0).abs() < 1e-5);
}

#[test]
fn resolvent_vanishes_at_the_origin_column() {
    let p = TqParams::new(2.0).unwrap();
    let r = tq::resolvent_full(TqState::Positive(1), TqState::Zero, 1.0, &p).unwrap();
    assert_eq!(r, 0.0);
}

#[test]
fn resolvent_is_mirror_symmetric() {
    let p = TqParams::new(1.6).unwrap();
    for &(x, y) in &[(TqState::Positive(1), TqState::Negative(-2)), (TqState::Negative(0), TqState::Negative(2))] {
        let a = tq::resolvent_full(x, y, 0.8, &p).unwrap();
        let b = tq::resolvent_full(x.mirror(), y.mirror(), 0.8, &p).unwrap();
        assert!(rel(a, b) < 1e-13);
    }
}

#[test]
fn non_positive_lambda_is_a_domain_error() {
    let p = TqParams::new(2.0).unwrap();
    assert!(tq::h0_down(0.0, &p, Form::Phi11).is_err());
    assert!(tq::h_to_zero(0, -1.0, &p).is_err());
    assert!(TqParams::new(1.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn all_methods_agree(q in 1.2f64..4.0, lam in 0.01f64..50.0) {
        let p = TqParams::new(q).unwrap();
        let a = tq::h0_down(lam, &p, Form::Phi01).unwrap().value;
        let b = tq::h0_down(lam, &p, Form::Phi11).unwrap().value;
        let c = tq::h0_down_cf(lam, &p, 1e-15).unwrap().value;
        let d = tq::h0_down_alt(lam, &p).unwrap().value;
        for v in [b, c, d] {
            prop_assert!(rel(v, a) < 1e-10, "{a} vs {v}");
        }
        let u = tq::h0_up(lam, &p).unwrap().value;
        let v = tq::h0_up_cf(lam, &p, 1e-15).unwrap().value;
        let w = tq::h0_up_alt(lam, &p).unwrap().value;
        prop_assert!(rel(v, u) < 1e-10 && rel(w, u) < 1e-9);
    }

    #[test]
    fn transforms_decrease_in_lambda(q in 1.2f64..4.0, lam in 0.01f64..20.0, n in -3i64..3) {
        let p = TqParams::new(q).unwrap();
        for m in [n - 2, n - 1, n + 1, n + 2] {
            let a = tq::h_nm(n, m, lam, &p).unwrap().value;
            let b = tq::h_nm(n, m, lam * 1.1, &p).unwrap().value;
            prop_assert!(0.0 < b && b < a && a < 1.0);
        }
        let a = tq::h_to_zero(n, lam, &p).unwrap().value;
        let b = tq::h_to_zero(n, lam * 1.1, &p).unwrap().value;
        prop_assert!(0.0 < b && b < a && a < 1.0);
    }

    #[test]
    fn upward_is_below_downward(q in 1.2f64..4.0, lam in 0.01f64..20.0, n in -3i64..3) {
        let p = TqParams::new(q).unwrap();
        let up = tq::h_nm(n, n + 1, lam, &p).unwrap().value;
        let down = tq::h_nm(n, n - 1, lam, &p).unwrap().value;
        prop_assert!(up < down);
    }

    #[test]
    fn scaling_in_level(q in 1.2f64..4.0, lam in 0.01f64..5.0, n in -3i64..3, m in -3i64..3) {
        let p = TqParams::new(q).unwrap();
        let a = tq::h_nm(n + 1, m + 1, lam, &p).unwrap().value;
        let b = tq::h_nm(n, m, lam * q * q, &p).unwrap().value;
        prop_assert!(rel(a, b) < 1e-11);
        let a = tq::h_to_zero(n + 1, lam, &p).unwrap().value;
        let b = tq::h_to_zero(n, lam * q * q, &p).unwrap().value;
        prop_assert!(rel(a, b) < 1e-11);
    }

    #[test]
    fn down_paths_factor_through_intermediate_levels(q in 1.2f64..4.0, lam in 0.01f64..5.0, n in -2i64..3, k in 1i64..3, j in 1i64..3) {
        let p = TqParams::new(q).unwrap();
        let direct = tq::h_nm(n, n - k - j, lam, &p).unwrap().value;
        let split = tq::h_nm(n, n - k, lam, &p).unwrap().value * tq::h_nm(n - k, n - k - j, lam, &p).unwrap().value;
        prop_assert!(rel(direct, split) < 1e-10);
    }

    #[test]
    fn psi_is_positive_increasing_and_scales(q in 1.2f64..4.0, lam in 0.01f64..50.0) {
        let p = TqParams::new(q).unwrap();
        let a = tq::psi_exponent(lam, &p).unwrap();
        let b = tq::psi_exponent(lam * 1.1, &p).unwrap();
        prop_assert!(0.0 < a && a < b);
        let c = tq::psi_exponent(lam / (q * q), &p).unwrap();
        prop_assert!(rel(c, a / q) < 1e-11);
    }

    #[test]
    fn killed_resolvent_satisfies_detailed_balance(q in 1.2f64..4.0, lam in 0.05f64..5.0, m in -3i64..3, n in -3i64..3) {
        let p = TqParams::new(q).unwrap();
        let a = p.mu_atom(m) * tq::resolvent_killed(m, n, lam, &p).unwrap();
        let b = p.mu_atom(n) * tq::resolvent_killed(n, m, lam, &p).unwrap();
        prop_assert!(rel(a, b) < 1e-10);
    }
}

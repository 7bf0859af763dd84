use proptest::prelude::*;
use tq_core::qseries::{self, Extent, LogSigned, QBase, SeriesControl};

/// `Π_{k<n} (1 - z q^k)` by a plain loop.
fn finite_prod(z: f64, q: f64, n: usize) -> f64 {
    (0..n).map(|k| 1.0 - z * q.powi(k as i32)).product()
}

/// `(z; q)_n` for negative `n` from `1 / (z q^n; q)_{-n}`.
fn signed_prod(z: f64, q: f64, n: i64) -> f64 {
    if n >= 0 {
        finite_prod(z, q, n as usize)
    } else {
        1.0 / finite_prod(z * q.powi(n as i32), q, (-n) as usize)
    }
}

/// Bound on the absolute term sum of `1phi1(a; b; z)` for `|b| < 1`.
fn phi11_abs_bound(a: f64, b: f64, q: f64, z: f64) -> f64 {
    let (mut t, mut s) = (1.0f64, 1.0f64);
    let mut qk = 1.0;
    while t > 1e-18 * s {
        t *= (1.0 + a.abs() * qk) / ((1.0 - q * qk) * (1.0 - b.abs() * qk)) * qk * z.abs();
        s += t;
        qk *= q;
    }
    s
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1e-300)
}

#[test]
fn qpoch_small_examples() {
    let q = QBase::new(0.3).unwrap();
    assert_eq!(qseries::qpoch(0.7, q, 0).unwrap().to_f64(), 1.0);
    let v = qseries::qpoch(0.5, QBase::new(0.5).unwrap(), 2).unwrap().to_f64();
    assert!((v - 0.375).abs() < 1e-15);
}

#[test]
fn qpoch_negative_index_splits_the_infinite_product() {
    let q = QBase::new(0.25).unwrap();
    let (z, n) = (-0.4, -3i64);
    let lhs = qseries::qpoch(z, q, n).unwrap() * qseries::qpoch(z * 0.25f64.powi(n as i32), q, Extent::Infinite).unwrap();
    let rhs = qseries::qpoch(z, q, Extent::Infinite).unwrap();
    assert!(close(lhs.to_f64(), rhs.to_f64(), 1e-13));
}

#[test]
fn q_binomial_worked_example() {
    let q = QBase::new(0.4).unwrap();
    let lhs = qseries::rphis(&[0.3], &[], q, 0.2, &SeriesControl::default()).unwrap();
    let rhs = finite_prod(0.06, 0.4, 200) / finite_prod(0.2, 0.4, 200);
    assert!(close(lhs, rhs, 1e-13));
}

#[test]
fn empty_series_at_zero_is_one() {
    let v = qseries::rphis(&[], &[], QBase::new(0.5).unwrap(), 0.0, &SeriesControl::default()).unwrap();
    assert_eq!(v, 1.0);
}

#[test]
fn divergent_and_pole_parameters_are_rejected() {
    let q = QBase::new(0.5).unwrap();
    let ctrl = SeriesControl::default();
    assert!(qseries::rphis(&[0.1, 0.2], &[], q, 0.1, &ctrl).is_err());
    assert!(qseries::rphis(&[0.1], &[], q, 1.0, &ctrl).is_err());
    assert!(qseries::rphis(&[0.1], &[4.0], q, 0.1, &ctrl).is_err());
    assert!(qseries::eq_exp(1.0, q).is_err());
    assert!(qseries::psi01(0.5, q, 0.3, &ctrl).is_err());
}

#[test]
fn exponential_product_and_series_forms_agree() {
    let q = QBase::new(0.5).unwrap();
    let a = qseries::eq_exp(0.5, q).unwrap();
    let b = qseries::eq_exp_series(0.5, q).unwrap();
    assert!(close(a, b, 1e-12));
    let a = qseries::Eq_exp(0.7, q).unwrap();
    let b = qseries::Eq_exp_series(0.7, q).unwrap();
    assert!(close(a, b, 1e-12));
    assert_eq!(qseries::eq_exp(0.0, q).unwrap(), 1.0);
}

#[test]
fn triple_product_example() {
    let q = QBase::new(0.3).unwrap();
    let ctrl = SeriesControl::default();
    let (c, z) = (0.1, 0.5);
    let prod = qseries::psi01(c, q, z, &ctrl).unwrap();
    let sum = qseries::psi01_bilateral_sum(c, q, z, &ctrl).unwrap();
    assert!(close(prod, sum, 1e-10));
    let rhs = finite_prod(0.3, 0.3, 200) * finite_prod(z, 0.3, 200) * finite_prod(0.3 / z, 0.3, 200)
        / (finite_prod(c, 0.3, 200) * finite_prod(c / z, 0.3, 200));
    assert!(close(prod, rhs, 1e-12));
    let c0 = qseries::psi01(0.0, q, z, &ctrl).unwrap();
    let r0 = finite_prod(0.3, 0.3, 200) * finite_prod(z, 0.3, 200) * finite_prod(0.3 / z, 0.3, 200);
    assert!(close(c0, r0, 1e-12));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn q_binomial_theorem(q in 0.05f64..0.95, a in -2.0f64..2.0, z in -0.9f64..0.9) {
        let rhs = finite_prod(a * z, q, 4000) / finite_prod(z, q, 4000);
        // Σ|t_k| is bounded by the same identity at (-|a|, |z|); skip draws
        // whose cancellation exceeds what f64 summation can resolve.
        let abs_bound = finite_prod(-(a * z).abs(), q, 4000) / finite_prod(z.abs(), q, 4000);
        prop_assume!(abs_bound / rhs.abs() < 1e5);
        let lhs = qseries::rphis(&[a], &[], QBase::new(q).unwrap(), z, &SeriesControl::default()).unwrap();
        prop_assert!(close(lhs, rhs, 1e-10), "{lhs} vs {rhs}");
    }

    #[test]
    fn index_additivity(q in 0.1f64..0.9, z in -0.9f64..0.9, m in -5i64..=5, n in -5i64..=5) {
        let qb = QBase::new(q).unwrap();
        let lhs = qseries::qpoch(z, qb, m + n);
        let r1 = qseries::qpoch(z, qb, m);
        let r2 = qseries::qpoch(z * q.powi(m as i32), qb, n);
        if let (Ok(l), Ok(a), Ok(b)) = (lhs, r1, r2) {
            let want = signed_prod(z, q, m + n);
            prop_assert!(close(l.to_f64(), want, 1e-11));
            prop_assert!(close((a * b).to_f64(), l.to_f64(), 1e-11));
        }
    }

    #[test]
    fn reciprocity_of_q_exponentials(q in 0.05f64..0.95, z in -0.9f64..0.9) {
        let qb = QBase::new(q).unwrap();
        let p = qseries::eq_exp(z, qb).unwrap() * qseries::Eq_exp(-z, qb).unwrap();
        prop_assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn limit_relation_in_a_numerator_parameter(q in 0.05f64..0.95, a in -0.9f64..0.9, b in -0.9f64..0.9, z in -0.9f64..0.9) {
        let qb = QBase::new(q).unwrap();
        let ctrl = SeriesControl::default();
        let big = 1e8;
        let r = qseries::rphis(&[a], &[b], qb, z, &ctrl).unwrap();
        // Relative error is ill-posed near zeros of the limit function.
        prop_assume!(phi11_abs_bound(a, b, q, z) < 100.0 * r.abs());
        let l = qseries::rphis(&[big, a], &[b], qb, z / big, &ctrl).unwrap();
        prop_assert!(close(l, r, 1e-6));
    }

    #[test]
    fn limit_relation_in_a_denominator_parameter(q in 0.05f64..0.95, a in -0.9f64..0.9, z in -0.5f64..0.5) {
        // At finite B the terms with B q^k < 1 are lost; keep |z| < q.
        let z = z * q;
        let qb = QBase::new(q).unwrap();
        let ctrl = SeriesControl::default();
        let big = 1e8;
        let l = qseries::rphis(&[a], &[big], qb, big * z, &ctrl).unwrap();
        let r = qseries::rphis(&[a], &[], qb, z, &ctrl).unwrap();
        prop_assert!(close(l, r, 1e-6));
    }

    #[test]
    fn log_signed_round_trip(x in -1e300f64..1e300) {
        // exp(ln x) loses |ln x| ulps.
        let y = LogSigned::from_f64(x).to_f64();
        prop_assert!(close(y, x, 1e-12));
        let r = LogSigned::from_f64(x).recip().to_f64();
        if x != 0.0 {
            prop_assert!(close(r, 1.0 / x, 1e-12));
        }
    }
}

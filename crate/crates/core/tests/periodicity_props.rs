//! Periodicity reports and periodic solutions.

mod common;

use common::{random_matrix, rng, signed};
use hodograph_core::matops;
use hodograph_core::periodicity::{
    check_periodic, make_periodic_2d, periodic_4d_blocks, periodic_4d_swap, rational_approx,
    verify_solution_period, NonPeriodicReason, MAX_DENOMINATOR, RATIONAL_TOL,
};
use hodograph_core::{Branch, ForceSpec, HodographProblem, InitialData, Mat, Vect};
use proptest::prelude::*;
use rand::Rng;
use std::f64::consts::PI;

fn assert_periodic_exp(a: &Mat, period: f64, seed: u64) {
    let mut r = rng(seed);
    for _ in 0..10 {
        let t = r.random_range(-5.0..5.0);
        let e0 = matops::mat_exp(a, t).unwrap();
        let e1 = matops::mat_exp(a, t + period).unwrap();
        assert!((e1 - e0).amax() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn constructed_2d_matrices_are_periodic(lambda in 0.1f64..5.0, a11 in -2.0f64..2.0, a12 in prop_oneof![-3.0f64..-0.2, 0.2f64..3.0]) {
        let a = make_periodic_2d(lambda, a11, a12).unwrap();
        prop_assert_eq!(a.trace(), 0.0);
        let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
        prop_assert!((det - lambda * lambda).abs() <= 1e-12 * lambda * lambda * (1.0 + a11 * a11));
        let rep = check_periodic(&a, RATIONAL_TOL, MAX_DENOMINATOR).unwrap();
        prop_assert!(rep.periodic, "{:?}", rep.reason);
        let period = rep.period.unwrap();
        prop_assert!((period - 2.0 * PI / lambda).abs() <= 1e-9 * period);
    }

    #[test]
    fn rational_approx_recovers_small_fractions(p in -200i64..200, q in 1i64..=64) {
        let (a, b) = rational_approx(p as f64 / q as f64, MAX_DENOMINATOR, RATIONAL_TOL).unwrap();
        prop_assert_eq!(a * q, p * b);
        prop_assert!(b <= q);
    }

    #[test]
    fn odd_dimension_is_never_periodic(seed in any::<u64>(), half in 0usize..=2) {
        let n = 2 * half + 1;
        let a = random_matrix(&mut rng(seed), n, 1.0);
        prop_assume!(matops::det(&a).abs() > 1e-6);
        let rep = check_periodic(&a, RATIONAL_TOL, MAX_DENOMINATOR).unwrap();
        prop_assert!(!rep.periodic);
    }

    #[test]
    fn skew_odd_dimension_has_zero_eigenvalue(w1 in -2.0f64..2.0, w2 in -2.0f64..2.0, w3 in 0.1f64..2.0) {
        let a = hodograph_core::degenerate::coriolis3d_matrix([w1, w2, w3]);
        let rep = check_periodic(&a, RATIONAL_TOL, MAX_DENOMINATOR).unwrap();
        prop_assert!(!rep.periodic);
        prop_assert_eq!(rep.reason, Some(NonPeriodicReason::ZeroEigenvalue));
    }
}

#[test]
fn reported_periods_make_the_exponential_periodic() {
    let mut cases: Vec<Mat> = vec![
        hodograph_core::model::coriolis_2d_matrix(1.3),
        periodic_4d_blocks(0.7),
        periodic_4d_swap(2.0),
    ];
    let mut r = rng(5);
    for _ in 0..10 {
        let lambda = r.random_range(0.2..3.0);
        cases.push(make_periodic_2d(lambda, signed(&mut r, 0.0, 2.0), signed(&mut r, 0.2, 2.0)).unwrap());
    }
    // 4D with frequencies λ and 3λ/2 via a similarity transform
    let d = Mat::from_row_slice(4, 4, &[
        0.0, 1.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.5, 0.0, 0.0, -1.5, 0.0,
    ]);
    let s = Mat::identity(4, 4) + random_matrix(&mut r, 4, 0.3);
    cases.push(&s * d * s.clone().try_inverse().unwrap());
    for (k, a) in cases.iter().enumerate() {
        let rep = check_periodic(a, RATIONAL_TOL, MAX_DENOMINATOR).unwrap();
        assert!(rep.periodic, "case {k}: {:?}", rep.reason);
        let period = rep.period.unwrap();
        assert_periodic_exp(a, period, k as u64);
        // fundamental: no integer fraction of T is a period
        for div in 2..=6 {
            let e = matops::mat_exp(a, period / div as f64).unwrap();
            assert!((e - Mat::identity(a.nrows(), a.nrows())).amax() > 1e-6, "case {k}: T/{div} is a period");
        }
    }
}

#[test]
fn incommensurate_frequencies_are_not_periodic() {
    let sqrt2 = std::f64::consts::SQRT_2;
    let a = Mat::from_row_slice(4, 4, &[
        0.0, 1.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, sqrt2, 0.0, 0.0, -sqrt2, 0.0,
    ]);
    let rep = check_periodic(&a, RATIONAL_TOL, MAX_DENOMINATOR).unwrap();
    assert!(matches!(rep.reason, Some(NonPeriodicReason::IrrationalRatio { .. })), "{:?}", rep.reason);
}

#[test]
fn small_gaussian_coriolis_solution_is_periodic() {
    let omega = 1.0;
    let p = HodographProblem::new(
        ForceSpec::coriolis_2d(omega, Vect::zeros(2)).unwrap(),
        InitialData::gauss_2d_coriolis(0.05, [Branch::Plus, Branch::Plus]).unwrap(),
    )
    .unwrap();
    let rep = check_periodic(p.spec().a(), RATIONAL_TOL, MAX_DENOMINATOR).unwrap();
    let period = rep.period.unwrap();
    assert!((period - 2.0 * PI).abs() < 1e-12);
    let mut r = rng(77);
    let (lo, hi) = p.data().x_box();
    let samples: Vec<(f64, Vect)> = (0..20)
        .map(|_| {
            let t = r.random_range(0.0..1.0);
            (t, Vect::from_fn(2, |i, _| r.random_range(lo[i]..hi[i])))
        })
        .collect();
    let ver = verify_solution_period(&p, period, &samples, 1e-8).unwrap();
    assert!(ver.passed(), "{:?}", ver.points);
    assert_eq!(ver.points.len(), 20);
}

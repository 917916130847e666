//! Identities of the matrix kernels on random matrices.

mod common;

use common::random_matrix;
use hodograph_core::matops::{self, eig, phi_functions, CMat};
use hodograph_core::Mat;
use nalgebra::Complex;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn matrix(seed: u64, n: usize, scale: f64) -> Mat {
    random_matrix(&mut ChaCha8Rng::seed_from_u64(seed), n, scale)
}

/// A random matrix of norm at most 5.
fn bounded(seed: u64, n: usize) -> Mat {
    let a = matrix(seed, n, 3.0);
    let norm = a.norm();
    if norm > 5.0 {
        a * (5.0 / norm)
    } else {
        a
    }
}

/// Rank-deficient: the last column copies a combination of the others.
fn singular(seed: u64, n: usize) -> Mat {
    let mut a = matrix(seed, n, 1.5);
    let last = a.columns(0, n - 1).column_sum() * 0.5;
    a.set_column(n - 1, &last);
    a
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn group_property(seed in any::<u64>(), n in 1usize..=4, s in -3.0f64..3.0, t in -3.0f64..3.0) {
        let a = bounded(seed, n);
        let lhs = matops::mat_exp(&a, s + t).unwrap();
        let (es, et) = (matops::mat_exp(&a, s).unwrap(), matops::mat_exp(&a, t).unwrap());
        let rhs = &es * &et;
        // the product rounds at eps·‖e^{sA}‖·‖e^{tA}‖, which can exceed ‖e^{(s+t)A}‖ by 1e6
        let scale = (es.amax() * et.amax()).max(1.0);
        prop_assert!((&lhs - &rhs).amax() <= 1e-10 * scale, "{}", (&lhs - &rhs).amax() / scale);
    }

    #[test]
    fn phi_identities(seed in any::<u64>(), n in 1usize..=4, t in -2.0f64..2.0, sing in any::<bool>()) {
        let a = if sing && n > 1 { singular(seed, n) } else { matrix(seed, n, 1.0) };
        let p = phi_functions(&a, t).unwrap();
        let id = Mat::identity(n, n);
        let e1 = &a * &p.phi1 - (&p.exp - &id);
        let e2 = &a * &a * &p.phi2 - (&p.exp - &id - &a * t);
        let scale = p.exp.amax().max(1.0);
        prop_assert!(e1.amax() <= 1e-11 * scale, "{}", e1.amax());
        prop_assert!(e2.amax() <= 1e-11 * scale, "{}", e2.amax());
    }

    #[test]
    fn phi_continuity_at_zero(seed in any::<u64>(), n in 1usize..=4, t in -3.0f64..3.0) {
        let r = matrix(seed, n, 1.0);
        let small = phi_functions(&(r * 1e-8), t).unwrap();
        let zero = phi_functions(&Mat::zeros(n, n), t).unwrap();
        prop_assert!((&small.phi1 - &zero.phi1).amax() <= 1e-6);
        prop_assert!((&small.phi2 - &zero.phi2).amax() <= 1e-6);
        prop_assert!((&zero.phi1 - Mat::identity(n, n) * t).amax() == 0.0);
        prop_assert!((&zero.phi2 - Mat::identity(n, n) * (t * t / 2.0)).amax() <= 1e-15 * t * t);
    }

    #[test]
    fn eigenvalues_match_trace_and_det(seed in any::<u64>(), n in 1usize..=5) {
        let a = matrix(seed, n, 1.0);
        let s = eig(&a).unwrap();
        let sum: Complex<f64> = s.eigenvalues.iter().sum();
        let prod: Complex<f64> = s.eigenvalues.iter().product();
        prop_assert!((sum.re - a.trace()).abs() <= 1e-10 && sum.im.abs() <= 1e-10);
        prop_assert!((prod.re - matops::det(&a)).abs() <= 1e-10 && prod.im.abs() <= 1e-10);
    }

    #[test]
    fn exp_matches_eigendecomposition(seed in any::<u64>(), n in 1usize..=4, t in -1.5f64..1.5) {
        let a = matrix(seed, n, 1.0);
        let s = eig(&a).unwrap();
        prop_assume!(s.diagonalizable && s.condition < 1e4);
        let v: CMat = s.eigenvectors.clone();
        let vinv = v.clone().try_inverse().unwrap();
        let d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
            n,
            s.eigenvalues.iter().map(|l| (l * t).exp()),
        ));
        let via_eig = v * d * vinv;
        let direct = matops::mat_exp(&a, t).unwrap();
        for i in 0..n {
            for j in 0..n {
                let z = via_eig[(i, j)];
                prop_assert!((z.re - direct[(i, j)]).abs() <= 1e-9 * s.condition && z.im.abs() <= 1e-9 * s.condition);
            }
        }
    }
}

#[test]
fn phi_identities_exactly_singular() {
    let a = Mat::from_row_slice(3, 3, &[0.0, 1.0, -0.5, -1.0, 0.0, 0.3, 0.5, -0.3, 0.0]);
    assert!(matops::det(&a).abs() < 1e-15);
    let nil = Mat::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    for m in [a, nil] {
        for t in [-1.7, 0.4, 2.5] {
            let p = phi_functions(&m, t).unwrap();
            let id = Mat::identity(m.nrows(), m.nrows());
            assert!((&m * &p.phi1 - (&p.exp - &id)).amax() <= 1e-11);
            assert!((&m * &m * &p.phi2 - (&p.exp - &id - &m * t)).amax() <= 1e-11);
        }
    }
}

//! Inverse-function and Jacobian consistency of every initial-data family.

mod common;

use common::{random_data, rng};
use hodograph_core::{InitialData, Mat, Vect};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn random_m(r: &mut ChaCha8Rng, data: &InitialData) -> Vect {
    let (lo, hi) = data.m_box();
    loop {
        let m = Vect::from_fn(lo.len(), |i, _| {
            let (a, b) = (lo[i].min(hi[i]), lo[i].max(hi[i]));
            if a == b {
                a
            } else {
                let w = b - a;
                r.random_range(a + 0.05 * w..b - 0.05 * w)
            }
        });
        if data.in_domain(m.as_slice()) {
            return m;
        }
    }
}

fn fd_jacobian(f: &dyn Fn(&Vect) -> Vect, x: &Vect, h: f64) -> Mat {
    let n = x.len();
    let mut j = Mat::zeros(f(x).len(), n);
    for k in 0..n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        let hk = h * x[k].abs().max(1.0);
        xp[k] += hk;
        xm[k] -= hk;
        j.set_column(k, &((f(&xp) - f(&xm)) / (2.0 * hk)));
    }
    j
}

#[test]
fn phi_jacobian_inverts_u0_jacobian() {
    let mut r = rng(42);
    for n in 1..=3 {
        for _ in 0..20 {
            let data = random_data(&mut r, n);
            let free = data.free_indices();
            for _ in 0..50 {
                let m = random_m(&mut r, &data);
                let x = data.phi_eval(&m).unwrap();
                let ju = fd_jacobian(&|x| data.u0_eval(x).unwrap(), &x, 1e-6);
                let jp = data.phi_jacobian(&m).unwrap();
                let prod = &jp * &ju;
                for &i in &free {
                    for &j in &free {
                        let want = if i == j { 1.0 } else { 0.0 };
                        assert!(
                            (prod[(i, j)] - want).abs() <= 1e-8,
                            "{:?} at {m}: {prod}",
                            data.family()
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn phi_jacobian_matches_differences() {
    let mut r = rng(43);
    for n in 1..=3 {
        for _ in 0..20 {
            let data = random_data(&mut r, n);
            for _ in 0..10 {
                let m = random_m(&mut r, &data);
                let jp = data.phi_jacobian(&m).unwrap();
                let fd = fd_jacobian(&|m| data.phi_eval(m).unwrap(), &m, 1e-6);
                for &i in &data.free_indices() {
                    for &j in &data.free_indices() {
                        let scale = jp[(i, j)].abs().max(1.0);
                        assert!((jp[(i, j)] - fd[(i, j)]).abs() <= 1e-6 * scale, "{:?}: {jp} vs {fd}", data.family());
                    }
                }
            }
        }
    }
}

#[test]
fn phi_inverts_u0() {
    let mut r = rng(44);
    for n in 1..=3 {
        for _ in 0..20 {
            let data = random_data(&mut r, n);
            for _ in 0..20 {
                let m = random_m(&mut r, &data);
                let x = data.phi_eval(&m).unwrap();
                let back = data.u0_eval(&x).unwrap();
                assert!((back - &m).amax() <= 1e-9 * m.amax().max(1.0), "{:?}", data.family());
            }
        }
    }
}

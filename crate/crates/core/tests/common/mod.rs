//! Random problem generation shared by the integration tests.
#![allow(dead_code)]

use hodograph_core::{Branch, ForceSpec, HodographProblem, InitialData, Mat, Pipeline, Vect};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn v(x: &[f64]) -> Vect {
    Vect::from_column_slice(x)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn signed(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let m = rng.random_range(lo..hi);
    if rng.random_bool(0.5) {
        m
    } else {
        -m
    }
}

pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Mat {
    Mat::from_fn(n, n, |_, _| rng.random_range(-scale..scale))
}

fn branch(rng: &mut ChaCha8Rng) -> Branch {
    if rng.random_bool(0.5) {
        Branch::Plus
    } else {
        Branch::Minus
    }
}

pub fn random_data(rng: &mut ChaCha8Rng, n: usize) -> InitialData {
    match n {
        1 => match rng.random_range(0..2) {
            0 => InitialData::tanh_1d(signed(rng, 0.5, 2.0), signed(rng, 0.3, 2.0)).unwrap(),
            _ => InitialData::gauss_1d(rng.random_range(0.5..2.0), rng.random_range(0.5..2.0), branch(rng)).unwrap(),
        },
        2 => match rng.random_range(0..4) {
            0 => InitialData::tanh_2d(signed(rng, 0.1, 0.8)).unwrap(),
            1 => InitialData::gauss_2d_coriolis(rng.random_range(0.1..1.0), [branch(rng), branch(rng)]).unwrap(),
            2 => {
                let r = Mat::identity(2, 2) * signed(rng, 0.8, 1.5) + random_matrix(rng, 2, 0.3);
                InitialData::linear(r).unwrap()
            }
            _ => InitialData::blocks(vec![random_data(rng, 1), random_data(rng, 1)]).unwrap(),
        },
        _ => match rng.random_range(0..2) {
            0 => InitialData::blocks(vec![random_data(rng, 2), random_data(rng, 1)]).unwrap(),
            _ => {
                let r = Mat::identity(3, 3) * signed(rng, 0.8, 1.5) + random_matrix(rng, 3, 0.3);
                InitialData::linear(r).unwrap()
            }
        },
    }
}

/// Largest |t| for which `‖φ1(A,t)‖·‖∂u⁰/∂x‖ < 0.8`, so the flow map stays a
/// bijection and the hodograph root is unique.
pub fn safe_time(a: &Mat, gradient_bound: f64) -> f64 {
    let na = a.norm();
    let target = 0.8 / gradient_bound.max(1e-12);
    if na < 1e-12 {
        target
    } else {
        (1.0 + na * target).ln() / na
    }
}

/// A generic (nondegenerate) random problem with a point `x⁰` and a
/// pre-blow-up time.
pub struct Case {
    pub problem: HodographProblem,
    pub x0: Vect,
    pub t: f64,
}

pub fn random_case(rng: &mut ChaCha8Rng) -> Case {
    loop {
        let n = rng.random_range(1..=3);
        let a = if rng.random_bool(0.1) {
            Mat::zeros(n, n)
        } else {
            random_matrix(rng, n, 1.0)
        };
        let g = Vect::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let spec = ForceSpec::new(a.clone(), g).unwrap();
        if spec.pipeline() != Pipeline::Generic {
            continue;
        }
        let data = random_data(rng, n);
        let (lo, hi) = data.x_box();
        let x0 = Vect::from_fn(n, |i, _| rng.random_range(lo[i]..=hi[i]));
        let t_lim = safe_time(&a, data.gradient_bound()).min(2.0);
        let t = rng.random_range(0.05 * t_lim..0.95 * t_lim);
        let problem = HodographProblem::new(spec, data).unwrap();
        return Case { problem, x0, t };
    }
}

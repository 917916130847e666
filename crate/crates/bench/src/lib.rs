//! Fixed problems shared by the criterion benchmarks in `benches/`.

use hodograph_core::{Branch, ForceSpec, HodographProblem, InitialData, Mat, Vect};

/// Tanh profile under gravity with A = 1: blows up at t = ln 2.
pub fn tanh_1d() -> HodographProblem {
    HodographProblem::new(ForceSpec::scalar(1.0, 1.0).unwrap(), InitialData::tanh_1d(1.0, 1.0).unwrap()).unwrap()
}

/// Gaussian data under the ω = 1 Coriolis force.
pub fn coriolis_2d() -> HodographProblem {
    let data = InitialData::gauss_2d_coriolis(1.0, [Branch::Plus, Branch::Plus]).unwrap();
    HodographProblem::new(ForceSpec::coriolis_2d(1.0, Vect::zeros(2)).unwrap(), data).unwrap()
}

/// A dense nonsymmetric matrix with complex eigenvalues.
pub fn dense(n: usize) -> Mat {
    Mat::from_fn(n, n, |i, j| ((i * n + j) as f64 * 0.37).sin() * 0.8)
}

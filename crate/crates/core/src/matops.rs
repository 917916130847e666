//! Dense small-dimension linear algebra: matrix exponential, φ-functions,
//! determinants, solves, spectra and numerical rank.

pub use nalgebra::Complex;
use nalgebra::{DMatrix, DVector, Schur, SVD};

use crate::error::{Error, Result};

/// Real square matrix (n ≤ 8 in practice).
pub type Mat = DMatrix<f64>;
/// Real column vector.
pub type Vect = DVector<f64>;
/// Complex square matrix, used for eigenvectors.
pub type CMat = DMatrix<Complex<f64>>;

/// Default relative threshold for [`rank`].
pub const RANK_TOL: f64 = 1e-10;

/// Arguments with `||tA||_1` below this use the Taylor series directly.
const SERIES_RADIUS: f64 = 0.25;
const SERIES_REL_TOL: f64 = 1e-17;
const SERIES_MAX_TERMS: usize = 60;

/// Maximum absolute column sum.
pub fn norm1(a: &Mat) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest absolute entry.
pub fn max_abs(a: &Mat) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

fn check_finite(a: &Mat, what: &'static str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

fn check_square(a: &Mat) -> Result<()> {
    if a.is_square() {
        Ok(())
    } else {
        Err(Error::Dimension {
            expected: a.nrows(),
            got: a.ncols(),
        })
    }
}

/// The triple `(e^{tA}, φ1(A,t), φ2(A,t))` evaluated together.
///
/// `phi1 = ∫_0^t e^{sA} ds` and `phi2 = ∫_0^t phi1(A,s) ds`, so that
/// `A·phi1 = e^{tA} - I` and `A²·phi2 = e^{tA} - I - tA` for every A.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiSet {
    pub exp: Mat,
    pub phi1: Mat,
    pub phi2: Mat,
}

/// Evaluates `e^{tA}`, `φ1(A,t)` and `φ2(A,t)` by scaling and squaring with a
/// Taylor core.
///
/// The argument is halved until `||τA||_1 < 0.25`, the three series are summed
/// there, and the doubling relations
/// `E(2τ) = E²`, `Φ1(2τ) = (I+E)Φ1`, `Φ2(2τ) = (I+E)Φ2 + τΦ1`
/// restore the full time step. `E - I` is carried through the doublings
/// (`F(2τ) = F(F + 2I)`) so that small arguments keep full relative accuracy.
pub fn phi_functions(a: &Mat, t: f64) -> Result<PhiSet> {
    check_square(a)?;
    check_finite(a, "matrix")?;
    if !t.is_finite() {
        return Err(Error::NonFinite("time"));
    }
    let n = a.nrows();
    let id = Mat::identity(n, n);
    let norm = norm1(a) * t.abs();
    let mut squarings = 0u32;
    if norm >= SERIES_RADIUS {
        squarings = (norm / SERIES_RADIUS).log2().floor() as u32 + 1;
    }
    if squarings > 1100 {
        return Err(Error::Overflow { norm });
    }
    let mut tau = t / 2f64.powi(squarings as i32);
    let x = a * tau;

    // term_k = X^k / k!; f carries e^{τA} - I to keep the low-order digits
    let mut term = id.clone();
    let mut f = Mat::zeros(n, n);
    let mut s1 = id.clone();
    let mut s2 = &id * 0.5;
    for k in 1..SERIES_MAX_TERMS {
        term = &term * &x / k as f64;
        let kf = k as f64;
        f += &term;
        s1 += &term / (kf + 1.0);
        s2 += &term / ((kf + 1.0) * (kf + 2.0));
        if max_abs(&term) <= SERIES_REL_TOL * (1.0 + max_abs(&f)) {
            break;
        }
    }
    let mut p1 = s1 * tau;
    let mut p2 = s2 * (tau * tau);

    for _ in 0..squarings {
        let ipe = &f + &id * 2.0;
        p2 = &ipe * &p2 + &p1 * tau;
        p1 = &ipe * &p1;
        f = &f * &ipe;
        tau *= 2.0;
    }
    let e = f + id;

    if !(e.iter().chain(p1.iter()).chain(p2.iter())).all(|v| v.is_finite()) {
        return Err(Error::Overflow { norm });
    }
    Ok(PhiSet {
        exp: e,
        phi1: p1,
        phi2: p2,
    })
}

/// `e^{tA}`.
pub fn mat_exp(a: &Mat, t: f64) -> Result<Mat> {
    Ok(phi_functions(a, t)?.exp)
}

/// `φ1(A,t) = A⁻¹(e^{tA} - I)`, well defined for singular A.
pub fn phi1(a: &Mat, t: f64) -> Result<Mat> {
    Ok(phi_functions(a, t)?.phi1)
}

/// `φ2(A,t) = A⁻²(e^{tA} - I - tA)`, well defined for singular A.
pub fn phi2(a: &Mat, t: f64) -> Result<Mat> {
    Ok(phi_functions(a, t)?.phi2)
}

/// Determinant (1 for the empty matrix).
pub fn det(a: &Mat) -> f64 {
    if a.nrows() == 0 {
        return 1.0;
    }
    a.clone().determinant()
}

/// Pivot ratio below which an LU factorization is declared singular.
const PIVOT_TOL: f64 = 1e-14;

fn lu_checked(a: &Mat) -> Result<nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    check_square(a)?;
    check_finite(a, "matrix")?;
    let lu = a.clone().lu();
    let u = lu.u();
    let diag: Vec<f64> = u.diagonal().iter().map(|v| v.abs()).collect();
    let big = diag.iter().cloned().fold(0.0, f64::max);
    let small = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if a.nrows() > 0 && (big == 0.0 || small <= PIVOT_TOL * big.max(max_abs(a))) {
        return Err(Error::Singular);
    }
    Ok(lu)
}

/// Solves `A x = b` by partial-pivot LU; rejects numerically singular A.
pub fn solve(a: &Mat, b: &Vect) -> Result<Vect> {
    if b.len() != a.nrows() {
        return Err(Error::Dimension {
            expected: a.nrows(),
            got: b.len(),
        });
    }
    if a.nrows() == 0 {
        return Ok(Vect::zeros(0));
    }
    let lu = lu_checked(a)?;
    lu.solve(b).ok_or(Error::Singular)
}

/// Matrix inverse via LU.
pub fn inverse(a: &Mat) -> Result<Mat> {
    if a.nrows() == 0 {
        return Ok(a.clone());
    }
    let lu = lu_checked(a)?;
    lu.try_inverse().ok_or(Error::Singular)
}

/// Singular values in descending order.
pub fn singular_values(a: &Mat) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    SVD::new(a.clone(), false, false)
        .singular_values
        .iter()
        .cloned()
        .collect()
}

/// Numerical rank: number of singular values above `tol·σ_max`.
pub fn rank(a: &Mat, tol: f64) -> usize {
    let sv = singular_values(a);
    let smax = sv.first().cloned().unwrap_or(0.0);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * smax).count()
}

/// Eigen-structure of a real matrix.
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Eigenvalues, conjugate pairs adjacent with the positive imaginary part first.
    pub eigenvalues: Vec<Complex<f64>>,
    pub diagonalizable: bool,
    /// 2-norm condition number of the unit-column eigenvector matrix
    /// (infinite when not diagonalizable).
    pub condition: f64,
    /// Unit eigenvectors as columns, in eigenvalue order. Columns of a
    /// defective cluster are padded with an arbitrary unit vector.
    pub eigenvectors: CMat,
}

const EIG_MAX_ITER: usize = 10_000;

/// Eigenvalues, diagonalizability and eigenvectors.
///
/// Eigenvalues come from a real Schur form; eigenvectors are null vectors of
/// `A - λI` for each eigenvalue cluster.
pub fn eig(a: &Mat) -> Result<Spectrum> {
    check_square(a)?;
    check_finite(a, "matrix")?;
    let n = a.nrows();
    if n == 0 {
        return Ok(Spectrum {
            eigenvalues: vec![],
            diagonalizable: true,
            condition: 1.0,
            eigenvectors: CMat::zeros(0, 0),
        });
    }
    let schur =
        Schur::try_new(a.clone(), f64::EPSILON, EIG_MAX_ITER).ok_or(Error::EigenNoConvergence)?;
    let mut ev: Vec<Complex<f64>> = schur.complex_eigenvalues().iter().cloned().collect();
    let scale = max_abs(a).max(1.0);
    // exact conjugate pairing
    for z in ev.iter_mut() {
        if z.im.abs() <= 1e-14 * scale {
            z.im = 0.0;
        }
    }
    ev.sort_by(|x, y| {
        x.re.partial_cmp(&y.re)
            .unwrap()
            .then(y.im.abs().partial_cmp(&x.im.abs()).unwrap())
            .then(y.im.partial_cmp(&x.im).unwrap())
    });
    let mut i = 0;
    while i < n {
        if ev[i].im != 0.0 && i + 1 < n {
            let re = 0.5 * (ev[i].re + ev[i + 1].re);
            let im = 0.5 * (ev[i].im.abs() + ev[i + 1].im.abs());
            ev[i] = Complex::new(re, im);
            ev[i + 1] = Complex::new(re, -im);
            i += 2;
        } else {
            i += 1;
        }
    }

    // cluster nearby eigenvalues and extract null vectors per cluster
    let cluster_tol = 1e-7 * scale;
    let null_tol = 1e-8 * scale;
    let ac: CMat = a.map(|v| Complex::new(v, 0.0));
    let mut vectors = CMat::zeros(n, n);
    let mut diagonalizable = true;
    let mut assigned = vec![false; n];
    for i in 0..n {
        if assigned[i] {
            continue;
        }
        let members: Vec<usize> = (i..n)
            .filter(|&j| !assigned[j] && (ev[j] - ev[i]).norm() <= cluster_tol)
            .collect();
        let center = members.iter().map(|&j| ev[j]).sum::<Complex<f64>>() / members.len() as f64;
        let shifted = &ac - CMat::identity(n, n) * center;
        let svd = SVD::new(shifted, false, true);
        let vt = svd.v_t.expect("requested right singular vectors");
        let sv = &svd.singular_values;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&p, &q| sv[p].partial_cmp(&sv[q]).unwrap());
        let geometric = order.iter().filter(|&&k| sv[k] <= null_tol).count().max(1);
        if geometric < members.len() {
            diagonalizable = false;
        }
        for (slot, &j) in members.iter().enumerate() {
            let row = order[slot.min(n - 1)];
            for r in 0..n {
                vectors[(r, j)] = vt[(row, r)].conj();
            }
            assigned[j] = true;
        }
    }
    let condition = if diagonalizable {
        let sv = SVD::new(vectors.clone(), false, false).singular_values;
        let smax = sv.iter().cloned().fold(0.0, f64::max);
        let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        if smin > 0.0 {
            smax / smin
        } else {
            f64::INFINITY
        }
    } else {
        f64::INFINITY
    };
    Ok(Spectrum {
        eigenvalues: ev,
        diagonalizable,
        condition,
        eigenvectors: vectors,
    })
}

/// Coefficients `c_0..c_n` (low to high, monic) of `det(τI - B)`, by the
/// Faddeev–LeVerrier recursion.
pub fn char_poly(b: &Mat) -> Vec<f64> {
    let n = b.nrows();
    let id = Mat::identity(n, n);
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    let mut m = Mat::zeros(n, n);
    for k in 1..=n {
        m = b * &m + &id * c[n - k + 1];
        c[n - k] = -(b * &m).trace() / k as f64;
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn coriolis(w: f64) -> Mat {
        dmatrix![0.0, w; -w, 0.0]
    }

    fn close(a: &Mat, b: &Mat, tol: f64) -> bool {
        (a - b).iter().all(|v| v.abs() <= tol)
    }

    #[test]
    fn exp_of_zero_is_identity() {
        for n in 1..5 {
            let e = mat_exp(&Mat::zeros(n, n), 5.0).unwrap();
            assert_eq!(e, Mat::identity(n, n));
        }
    }

    #[test]
    fn exp_of_rotation_generator() {
        let w = 1.7;
        for &t in &[0.1, 1.0, 4.0, -2.5] {
            let e = mat_exp(&coriolis(w), t).unwrap();
            let (s, c) = (w * t).sin_cos();
            assert!(close(&e, &dmatrix![c, s; -s, c], 1e-14));
        }
    }

    #[test]
    fn phi_scalar_values() {
        let one = dmatrix![1.0];
        assert!((phi1(&one, 1.0).unwrap()[(0, 0)] - (std::f64::consts::E - 1.0)).abs() < 1e-14);
        assert!((phi2(&one, 1.0).unwrap()[(0, 0)] - (std::f64::consts::E - 2.0)).abs() < 1e-14);
    }

    #[test]
    fn phi_at_zero_matrix() {
        let z = Mat::zeros(3, 3);
        assert_eq!(phi1(&z, 2.0).unwrap(), Mat::identity(3, 3) * 2.0);
        assert_eq!(phi2(&z, 2.0).unwrap(), Mat::identity(3, 3) * 2.0);
    }

    #[test]
    fn phi1_of_rotation_generator() {
        let w: f64 = 0.8;
        let t = 2.3;
        let (s, c) = (w * t).sin_cos();
        let expected = dmatrix![s, 1.0 - c; c - 1.0, s] / w;
        assert!(close(&phi1(&coriolis(w), t).unwrap(), &expected, 1e-14));
    }

    #[test]
    fn overflow_is_reported() {
        let a = dmatrix![1.0];
        assert!(matches!(mat_exp(&a, 800.0), Err(Error::Overflow { .. })));
        assert!(mat_exp(&a, 700.0).is_ok());
    }

    #[test]
    fn non_finite_inputs_rejected() {
        let a = dmatrix![f64::NAN];
        assert_eq!(mat_exp(&a, 1.0), Err(Error::NonFinite("matrix")));
        assert_eq!(mat_exp(&dmatrix![1.0], f64::INFINITY), Err(Error::NonFinite("time")));
    }

    #[test]
    fn det_and_solve_basics() {
        assert_eq!(det(&dmatrix![2.0, 0.0; 0.0, 3.0]), 6.0);
        let b = DVector::from_vec(vec![1.0, -2.0, 3.0]);
        assert_eq!(solve(&Mat::identity(3, 3), &b).unwrap(), b);
        assert_eq!(
            solve(&dmatrix![1.0, 2.0; 2.0, 4.0], &DVector::from_vec(vec![1.0, 1.0])),
            Err(Error::Singular)
        );
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank(&Mat::zeros(3, 3), RANK_TOL), 0);
        assert_eq!(rank(&Mat::identity(3, 3), RANK_TOL), 3);
        let w = [0.3, -1.1, 0.7];
        let a = dmatrix![0.0, w[2], -w[1]; -w[2], 0.0, w[0]; w[1], -w[0], 0.0];
        assert_eq!(rank(&a, RANK_TOL), 2);
        assert!(det(&a).abs() < 1e-15);
    }

    #[test]
    fn eig_examples() {
        let s = eig(&coriolis(2.0)).unwrap();
        assert_eq!(s.eigenvalues, vec![Complex::new(0.0, 2.0), Complex::new(0.0, -2.0)]);
        assert!(s.diagonalizable);

        let s = eig(&dmatrix![3.0, 0.0; 0.0, -1.0]).unwrap();
        assert_eq!(s.eigenvalues, vec![Complex::new(-1.0, 0.0), Complex::new(3.0, 0.0)]);

        let w: [f64; 3] = [0.3, -1.1, 0.7];
        let wn = w[0] * w[0] + w[1] * w[1] + w[2] * w[2];
        let a = dmatrix![0.0, w[2], -w[1]; -w[2], 0.0, w[0]; w[1], -w[0], 0.0];
        let s = eig(&a).unwrap();
        let mut ims: Vec<f64> = s.eigenvalues.iter().map(|z| z.im).collect();
        ims.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((ims[0] + wn.sqrt()).abs() < 1e-12);
        assert!(ims[1].abs() < 1e-12);
        assert!((ims[2] - wn.sqrt()).abs() < 1e-12);
        assert!(s.eigenvalues.iter().all(|z| z.re.abs() < 1e-12));
    }

    #[test]
    fn jordan_block_is_not_diagonalizable() {
        let s = eig(&dmatrix![1.0, 1.0; 0.0, 1.0]).unwrap();
        assert!(!s.diagonalizable);
        assert!(s.condition.is_infinite());
        assert!(eig(&Mat::identity(3, 3)).unwrap().diagonalizable);
    }

    #[test]
    fn char_poly_of_small_matrices() {
        // det(τI - B) for B = [[1,2],[3,4]]: τ² - 5τ - 2
        assert_eq!(char_poly(&dmatrix![1.0, 2.0; 3.0, 4.0]), vec![-2.0, -5.0, 1.0]);
        let c = char_poly(&Mat::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0])));
        assert_eq!(c, vec![-6.0, 11.0, -6.0, 1.0]);
    }
}

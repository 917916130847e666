//! Rank-deficient force matrices.
//!
//! With `rank A = r < n`, rows `L⁽¹⁾..L⁽ⁿ⁻ʳ⁾` span the left kernel of A and
//! the remaining rows complete an orthonormal basis. In the rotated variables
//! `y = Lx`, `v = Lu`, `f = Lg` the kernel components move freely
//! (`dv_α/dt = f_α`) while the others see `B = L A P` with `P = L⁻¹`.
//! The integrals M and N are rebuilt from `I1`, `I2`, `C(t) = L e^{-tA} P`,
//! `D(t) = L A e^{-tA} P` and the invertible block `B̃ = B[β, β]`.
//!
//! Initial data stays in original coordinates: `φ_rot(M) = L φ(P M)`.

use crate::error::{Error, Result};
use crate::hodograph::{
    solve_system, sweep_system, AffineHodograph, HodographSolution, HodographSystem,
    IntegralValues,
};
use crate::matops::{self, Mat, Vect, RANK_TOL};
use crate::model::{ForceSpec, HodographProblem};

/// Entry bound for the row-kernel and inverse identities of a basis.
pub const BASIS_TOL: f64 = 1e-12;

/// Left-kernel basis of a degenerate A with its dual and the reduced matrix B.
#[derive(Debug, Clone, PartialEq)]
pub struct DegenerateBasis {
    rank: usize,
    a: Mat,
    l: Mat,
    p: Mat,
    b: Mat,
    b_tilde_inv: Mat,
}

impl DegenerateBasis {
    /// `r = rank A`.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Number of kernel rows, `n - r`.
    pub fn kernel_dim(&self) -> usize {
        self.a.nrows() - self.rank
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Rows are `L⁽¹⁾..L⁽ⁿ⁾`, kernel rows first.
    pub fn l(&self) -> &Mat {
        &self.l
    }

    /// `P = L⁻¹`; row i is `P⁽ⁱ⁾`.
    pub fn p(&self) -> &Mat {
        &self.p
    }

    /// `B = L A P`; its kernel rows vanish.
    pub fn b(&self) -> &Mat {
        &self.b
    }

    /// The r×r block of B on the complement indices.
    pub fn b_tilde(&self) -> Mat {
        let k = self.kernel_dim();
        self.b.view((k, k), (self.rank, self.rank)).into_owned()
    }

    pub fn matrix(&self) -> &Mat {
        &self.a
    }
}

fn sign_normalize(row: &mut [f64]) {
    if let Some(&first) = row.iter().find(|v| v.abs() > 1e-12) {
        if first < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
        }
    }
}

/// Left-kernel basis from the singular vectors of A: columns of U with zero
/// singular value become the kernel rows, the others the complement. Each row
/// is signed so that its first nonzero entry is positive.
pub fn build_basis(a: &Mat) -> Result<DegenerateBasis> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension {
            expected: n,
            got: a.ncols(),
        });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix"));
    }
    let r = matops::rank(a, RANK_TOL);
    if r == 0 {
        return Err(Error::Unsupported(
            "A = 0 has no reduced dynamics; use the generic pipeline".into(),
        ));
    }
    if r == n {
        return Err(Error::Unsupported("A has full rank; use the generic pipeline".into()));
    }
    let svd = nalgebra::SVD::new(a.clone(), true, false);
    let u = svd.u.ok_or(Error::EigenNoConvergence)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].partial_cmp(&svd.singular_values[j]).unwrap());
    // smallest n - r singular values first: kernel, then complement
    let kernel: Vec<usize> = order[..n - r].to_vec();
    let mut complement: Vec<usize> = order[n - r..].to_vec();
    complement.sort_unstable();
    let mut l = Mat::zeros(n, n);
    for (row, &c) in kernel.iter().chain(complement.iter()).enumerate() {
        let mut vals: Vec<f64> = u.column(c).iter().cloned().collect();
        sign_normalize(&mut vals);
        for (k, v) in vals.into_iter().enumerate() {
            l[(row, k)] = v;
        }
    }
    basis_from_rows(a, l, n - r)
}

/// Validates a user-chosen basis: the first `kernel_dim` rows of `l` must
/// annihilate A from the left, and `B̃` must be invertible.
pub fn basis_from_rows(a: &Mat, l: Mat, kernel_dim: usize) -> Result<DegenerateBasis> {
    let n = a.nrows();
    if l.nrows() != n || l.ncols() != n {
        return Err(Error::Dimension {
            expected: n,
            got: l.nrows(),
        });
    }
    if kernel_dim == 0 || kernel_dim >= n {
        return Err(Error::InvalidParameter(format!(
            "kernel dimension must be in 1..{n}, got {kernel_dim}"
        )));
    }
    let scale = matops::max_abs(a).max(1.0);
    let la = &l * a;
    for i in 0..kernel_dim {
        let worst = la.row(i).amax();
        if worst > BASIS_TOL * scale * 10.0 {
            return Err(Error::InvalidParameter(format!(
                "row {i} of L is not in the left kernel of A (|L A| = {worst:e})"
            )));
        }
    }
    let p = matops::inverse(&l)?;
    let b = &l * a * &p;
    let r = n - kernel_dim;
    let b_tilde = b.view((kernel_dim, kernel_dim), (r, r)).into_owned();
    let d = matops::det(&b_tilde);
    if !(d.abs() > 1e-10 * matops::max_abs(&b_tilde).max(f64::MIN_POSITIVE).powi(r as i32)) {
        return Err(Error::InvalidParameter(format!(
            "reduced block B̃ is singular (det = {d:e}); A has a nilpotent part on its range"
        )));
    }
    let b_tilde_inv = matops::inverse(&b_tilde)?;
    Ok(DegenerateBasis {
        rank: r,
        a: a.clone(),
        l,
        p,
        b,
        b_tilde_inv,
    })
}

/// The matrix of `u ↦ -ω × u`.
pub fn coriolis3d_matrix(omega: [f64; 3]) -> Mat {
    let [w1, w2, w3] = omega;
    #[rustfmt::skip]
    let a = Mat::from_row_slice(3, 3, &[
        0.0,  w3, -w2,
        -w3, 0.0,  w1,
         w2, -w1, 0.0,
    ]);
    a
}

/// Force for a 3D Coriolis term `-ω × u` and constant g.
pub fn coriolis3d_spec(omega: [f64; 3], g: Vect) -> Result<ForceSpec> {
    ForceSpec::new(coriolis3d_matrix(omega), g)
}

/// `L⁽¹⁾ = ω/|ω|`, `L⁽²⁾ ∝ (0, ω3, -ω2)`, `L⁽³⁾ ∝ (ω2²+ω3², -ω1ω2, -ω1ω3)`.
/// Needs `ω2² + ω3² > 0`.
pub fn coriolis3d_basis(omega: [f64; 3]) -> Result<DegenerateBasis> {
    let [w1, w2, w3] = omega;
    let s = (w2 * w2 + w3 * w3).sqrt();
    let w = (w1 * w1 + s * s).sqrt();
    if !(s > 0.0) || !w.is_finite() {
        return Err(Error::InvalidParameter(
            "this basis needs ω2² + ω3² > 0; use build_basis for ω along the first axis".into(),
        ));
    }
    #[rustfmt::skip]
    let l = Mat::from_row_slice(3, 3, &[
        w1 / w, w2 / w, w3 / w,
        0.0, w3 / s, -w2 / s,
        s / w, -w1 * w2 / (w * s), -w1 * w3 / (w * s),
    ]);
    basis_from_rows(&coriolis3d_matrix(omega), l, 1)
}

/// `A = ω[[0,1,0],[-1,0,0],[0,0,0]]` with `L = P` the order-reversing
/// permutation, so `(y1, y2, y3) = (z, y, x)` and `(v1, v2, v3) = (w, v, u)`.
pub fn zaxis_basis(omega: f64) -> Result<DegenerateBasis> {
    if !(omega.is_finite() && omega != 0.0) {
        return Err(Error::InvalidParameter("omega must be finite and nonzero".into()));
    }
    let l = Mat::from_fn(3, 3, |i, j| if i + j == 2 { 1.0 } else { 0.0 });
    basis_from_rows(&coriolis3d_matrix([0.0, 0.0, omega]), l, 1)
}

/// `C(t) = L e^{-tA} P` and `D(t) = L A e^{-tA} P`. Kernel rows of C are unit
/// rows and those of D vanish; `C(0) = I`, `D(0) = B`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeMatrices {
    pub c: Mat,
    pub d: Mat,
}

pub fn time_matrices(basis: &DegenerateBasis, t: f64) -> Result<TimeMatrices> {
    let e = matops::mat_exp(&basis.a, -t)?;
    let c = &basis.l * &e * &basis.p;
    let d = &basis.l * &basis.a * e * &basis.p;
    Ok(TimeMatrices { c, d })
}

fn check_len(basis: &DegenerateBasis, v: &Vect) -> Result<()> {
    if v.len() == basis.dim() {
        Ok(())
    } else {
        Err(Error::Dimension {
            expected: basis.dim(),
            got: v.len(),
        })
    }
}

fn rotated_integrals(basis: &DegenerateBasis, tm: &TimeMatrices, f: &Vect, t: f64, y: &Vect, v: &Vect) -> IntegralValues {
    let n = basis.dim();
    let k = basis.kernel_dim();
    let b = &basis.b;
    let i1 = v - f * t - b * y;
    let i2 = &tm.c * f + &tm.d * v;

    let mut m = Vect::zeros(n);
    let mut nn = Vect::zeros(n);
    for a in 0..k {
        m[a] = v[a] - f[a] * t;
        nn[a] = y[a] - v[a] * t + 0.5 * f[a] * t * t;
    }
    let r = basis.rank;
    let mut rhs_m = Vect::zeros(r);
    for (gi, g) in (k..n).enumerate() {
        let mut s = i2[g] - f[g];
        for a in 0..k {
            s -= b[(g, a)] * (v[a] - f[a] * t);
        }
        rhs_m[gi] = s;
    }
    let mb = &basis.b_tilde_inv * rhs_m;
    let mut rhs_n = Vect::zeros(r);
    for (gi, g) in (k..n).enumerate() {
        m[g] = mb[gi];
        let mut s = mb[gi] - v[g] + f[g] * t;
        for a in 0..k {
            s += b[(g, a)] * (v[a] * t - 0.5 * f[a] * t * t);
        }
        rhs_n[gi] = s;
    }
    let nb = &basis.b_tilde_inv * rhs_n;
    for (gi, g) in (k..n).enumerate() {
        nn[g] = y[g] + nb[gi];
    }
    IntegralValues { i1, i2, m, n: nn }
}

/// Integrals in rotated coordinates at `(t, y = Lx, v = Lu)`. M and N reduce
/// to v and y at t = 0 and are constant along characteristics.
pub fn degenerate_integrals(spec: &ForceSpec, basis: &DegenerateBasis, t: f64, y: &Vect, v: &Vect) -> Result<IntegralValues> {
    check_len(basis, y)?;
    check_len(basis, v)?;
    check_spec(spec, basis)?;
    let tm = time_matrices(basis, t)?;
    let f = &basis.l * spec.g();
    Ok(rotated_integrals(basis, &tm, &f, t, y, v))
}

fn check_spec(spec: &ForceSpec, basis: &DegenerateBasis) -> Result<()> {
    if spec.dim() != basis.dim() {
        return Err(Error::Dimension {
            expected: basis.dim(),
            got: spec.dim(),
        });
    }
    let diff = matops::max_abs(&(spec.a() - &basis.a));
    if diff > 1e-14 * matops::max_abs(&basis.a).max(1.0) {
        return Err(Error::InvalidParameter("basis was built for a different force matrix".into()));
    }
    Ok(())
}

/// Affine structure of the rotated integrals at time t:
/// `M = Q v + m0` and `N = y + R v + n0`.
struct AffineIntegrals {
    q_inv: Mat,
    m0: Vect,
    r: Mat,
    n0: Vect,
}

fn affine_integrals(spec: &ForceSpec, basis: &DegenerateBasis, t: f64) -> Result<AffineIntegrals> {
    let n = basis.dim();
    let tm = time_matrices(basis, t)?;
    let f = &basis.l * spec.g();
    let zero = Vect::zeros(n);
    let base = rotated_integrals(basis, &tm, &f, t, &zero, &zero);
    let mut q = Mat::zeros(n, n);
    let mut r = Mat::zeros(n, n);
    for j in 0..n {
        let mut e = Vect::zeros(n);
        e[j] = 1.0;
        let iv = rotated_integrals(basis, &tm, &f, t, &zero, &e);
        q.set_column(j, &(iv.m - &base.m));
        r.set_column(j, &(iv.n - &base.n));
    }
    Ok(AffineIntegrals {
        q_inv: matops::inverse(&q)?,
        m0: base.m,
        r,
        n0: base.n,
    })
}

struct DegenerateSystem<'a> {
    spec: &'a ForceSpec,
    basis: &'a DegenerateBasis,
}

impl HodographSystem for DegenerateSystem<'_> {
    /// From `y + R Q⁻¹ (M_rot - m0) + n0 = L φ(P M_rot)`, multiplied by P.
    fn affine(&self, t: f64, x: &Vect) -> Result<AffineHodograph> {
        let ai = affine_integrals(self.spec, self.basis, t)?;
        let rq = &ai.r * &ai.q_inv;
        let p = &self.basis.p;
        Ok(AffineHodograph {
            coeff: p * &rq * &self.basis.l,
            offset: x + p * (&ai.n0 - &rq * &ai.m0),
        })
    }

    fn velocity(&self, t: f64, m: &Vect) -> Result<Vect> {
        let ai = affine_integrals(self.spec, self.basis, t)?;
        Ok(&self.basis.p * (&ai.q_inv * (&self.basis.l * m - &ai.m0)))
    }
}

/// The degenerate hodograph equation as `offset + coeff·M - φ(M) = 0` in
/// original coordinates (coeff coincides with `-φ1(A,t)`).
pub fn degenerate_affine(problem: &HodographProblem, basis: &DegenerateBasis, t: f64, x: &Vect) -> Result<(Mat, Vect)> {
    check_spec(problem.spec(), basis)?;
    check_len(basis, x)?;
    let aff = DegenerateSystem {
        spec: problem.spec(),
        basis,
    }
    .affine(t, x)?;
    Ok((aff.coeff, aff.offset))
}

/// Solves the degenerate hodograph system at `(t, x)`. The returned M is in
/// original coordinates (the initial velocity); u is in original coordinates.
pub fn degenerate_solve(
    problem: &HodographProblem,
    basis: &DegenerateBasis,
    t: f64,
    x: &Vect,
    guess_m: Option<&Vect>,
) -> Result<HodographSolution> {
    check_spec(problem.spec(), basis)?;
    let sys = DegenerateSystem {
        spec: problem.spec(),
        basis,
    };
    solve_system(problem, &sys, t, x, guess_m)
}

/// Time continuation of [`degenerate_solve`] at fixed x, with the same
/// stickiness and Γ-crossing guard as the generic sweep.
pub fn degenerate_sweep(
    problem: &HodographProblem,
    basis: &DegenerateBasis,
    x: &Vect,
    times: &[f64],
) -> Vec<Result<HodographSolution>> {
    if let Err(e) = check_spec(problem.spec(), basis) {
        return vec![Err(e); times.len()];
    }
    let sys = DegenerateSystem {
        spec: problem.spec(),
        basis,
    };
    sweep_system(problem, &sys, x, times)
}

fn zaxis_rate(spec: &ForceSpec) -> Result<f64> {
    let a = spec.a();
    let omega = if a.nrows() == 3 { a[(0, 1)] } else { 0.0 };
    if a.nrows() != 3 || omega == 0.0 || *a != coriolis3d_matrix([0.0, 0.0, omega]) {
        return Err(Error::Unsupported("needs the z-axis Coriolis matrix ω[[0,1,0],[-1,0,0],[0,0,0]]".into()));
    }
    Ok(omega)
}

/// `𝓛(t)` for the z-axis preset: rows are the original (x, y, z) equations,
/// columns the rotated `(M1, M2, M3) = (w⁰, v⁰, u⁰)`.
pub fn coriolis3d_script_l(omega: f64, t: f64) -> Mat {
    let s = (omega * t).sin();
    // 1 - cos ωt without cancellation
    let omc = 2.0 * (0.5 * omega * t).sin().powi(2);
    #[rustfmt::skip]
    let l = Mat::from_row_slice(3, 3, &[
        0.0, -omc / omega, -s / omega,
        0.0, -s / omega, omc / omega,
        -t, 0.0, 0.0,
    ]);
    l
}

/// `𝓛` to first order in ωt.
pub fn coriolis3d_script_l_small(t: f64) -> Mat {
    #[rustfmt::skip]
    let l = Mat::from_row_slice(3, 3, &[
        0.0, 0.0, -t,
        0.0, -t, 0.0,
        -t, 0.0, 0.0,
    ]);
    l
}

fn coriolis3d_det(problem: &HodographProblem, m_rot: &Vect, script_l: &Mat) -> Result<f64> {
    if m_rot.len() != 3 {
        return Err(Error::Dimension { expected: 3, got: m_rot.len() });
    }
    let p = Mat::from_fn(3, 3, |i, j| if i + j == 2 { 1.0 } else { 0.0 });
    let j = problem.data().phi_jacobian(&(&p * m_rot))?;
    Ok(matops::det(&(j * p - script_l)))
}

/// `det(∂φ_i/∂M_k - 𝓛_ik)` for the z-axis preset, M in rotated coordinates.
/// Equals `-det(φ1(A,t) + ∂φ/∂M)` since `det P = -1`.
pub fn coriolis3d_blowup_residual(problem: &HodographProblem, t: f64, m_rot: &Vect) -> Result<f64> {
    let omega = zaxis_rate(problem.spec())?;
    coriolis3d_det(problem, m_rot, &coriolis3d_script_l(omega, t))
}

/// The cubic small-ωt approximation of [`coriolis3d_blowup_residual`].
pub fn coriolis3d_blowup_residual_small(problem: &HodographProblem, t: f64, m_rot: &Vect) -> Result<f64> {
    zaxis_rate(problem.spec())?;
    coriolis3d_det(problem, m_rot, &coriolis3d_script_l_small(t))
}

/// A point where `u(t + T, x) ≠ u(t, x)` although `e^{TA} = I`.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodWitness {
    pub t: f64,
    pub x: Vect,
    pub u_t: Vect,
    pub u_t_plus_period: Vect,
    pub difference: f64,
}

/// Threshold for a non-periodicity witness.
pub const WITNESS_THRESHOLD: f64 = 1e-3;

/// Searches the samples for a point with `‖u(t+T, x) - u(t, x)‖∞ > 1e-3`,
/// continuing each solution in time from t = 0. Points whose continuation
/// fails are skipped. Needs g = 0.
pub fn non_periodicity_witness(
    problem: &HodographProblem,
    basis: &DegenerateBasis,
    period: f64,
    samples: &[(f64, Vect)],
) -> Result<Option<PeriodWitness>> {
    if problem.spec().g().iter().any(|&v| v != 0.0) {
        return Err(Error::InvalidParameter("non-periodicity witness needs g = 0".into()));
    }
    check_spec(problem.spec(), basis)?;
    let mut best: Option<PeriodWitness> = None;
    for (t, x) in samples {
        let res = degenerate_sweep(problem, basis, x, &[*t, *t + period]);
        if let (Ok(a), Ok(b)) = (&res[0], &res[1]) {
            let difference = (&a.sample.u - &b.sample.u).amax();
            if difference > WITNESS_THRESHOLD && best.as_ref().is_none_or(|w| difference > w.difference) {
                best = Some(PeriodWitness {
                    t: *t,
                    x: x.clone(),
                    u_t: a.sample.u.clone(),
                    u_t_plus_period: b.sample.u.clone(),
                    difference,
                });
            }
        }
    }
    Ok(best)
}

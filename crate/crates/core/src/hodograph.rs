//! Integrals of motion, the M-form hodograph equation and its Newton solve,
//! closed-form solution families and the map to homogeneous variables.
//!
//! Along characteristics `dx/dt = u`, `du/dt = g + A·u` the quantities
//!
//! ```text
//! I1 = u - g t - A x
//! I2 = e^{-tA} (g + A u)
//! M  = e^{-tA} u + φ1(A,-t) g          (the initial velocity)
//! N  = x + φ1(A,-t) u + φ2(A,-t) g     (the initial position)
//! ```
//!
//! are constant. Imposing `N = φ(M)` with `φ = (u⁰)⁻¹` gives the hodograph
//! equation `x - φ1(A,t) M - φ2(A,t) g - φ(M) = 0`, solved here for M.

use crate::error::{Error, Result};
use crate::matops::{self, Mat, Vect};
use crate::model::{ForceSpec, HodographProblem, InitialData, Pipeline, SolverOptions};

/// A point `(t, x, u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSample {
    pub t: f64,
    pub x: Vect,
    pub u: Vect,
}

impl StateSample {
    pub fn new(t: f64, x: Vect, u: Vect) -> Result<Self> {
        if x.len() != u.len() {
            return Err(Error::Dimension {
                expected: x.len(),
                got: u.len(),
            });
        }
        if !t.is_finite() || x.iter().chain(u.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("state sample"));
        }
        Ok(Self { t, x, u })
    }
}

/// The four families of integrals of motion at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralValues {
    pub i1: Vect,
    pub i2: Vect,
    pub m: Vect,
    pub n: Vect,
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}

fn require_generic(spec: &ForceSpec) -> Result<()> {
    match spec.pipeline() {
        Pipeline::Generic => Ok(()),
        Pipeline::Degenerate => Err(Error::Degenerate {
            rank: spec.rank(),
            n: spec.dim(),
        }),
    }
}

/// Integrals of motion at `s`. Rejects degenerate force matrices.
pub fn integrals(spec: &ForceSpec, s: &StateSample) -> Result<IntegralValues> {
    require_generic(spec)?;
    integrals_any(spec, s)
}

/// Integrals of motion for any A (the φ-function forms hold for singular A).
pub(crate) fn integrals_any(spec: &ForceSpec, s: &StateSample) -> Result<IntegralValues> {
    check_dim(spec.dim(), s.x.len())?;
    check_dim(spec.dim(), s.u.len())?;
    let a = spec.a();
    let g = spec.g();
    let back = matops::phi_functions(a, -s.t)?;
    Ok(IntegralValues {
        i1: &s.u - g * s.t - a * &s.x,
        i2: &back.exp * spec.force(&s.u),
        m: &back.exp * &s.u + &back.phi1 * g,
        n: &s.x + &back.phi1 * &s.u + &back.phi2 * g,
    })
}

/// Velocity with M-value `m` at time t: `u = e^{tA} M + φ1(A,t) g`.
pub fn u_from_m(spec: &ForceSpec, t: f64, m: &Vect) -> Result<Vect> {
    require_generic(spec)?;
    u_from_m_any(spec, t, m)
}

pub(crate) fn u_from_m_any(spec: &ForceSpec, t: f64, m: &Vect) -> Result<Vect> {
    check_dim(spec.dim(), m.len())?;
    let p = matops::phi_functions(spec.a(), t)?;
    Ok(&p.exp * m + &p.phi1 * spec.g())
}

/// Position on the characteristic through `φ(M)` at time t:
/// `x = φ(M) + φ1(A,t) M + φ2(A,t) g`. Frozen components of φ read as zero.
pub(crate) fn x_from_m(problem: &HodographProblem, t: f64, m: &Vect) -> Result<Vect> {
    let spec = problem.spec();
    let p = matops::phi_functions(spec.a(), t)?;
    Ok(problem.data().phi_partial(m)? + &p.phi1 * m + &p.phi2 * spec.g())
}

/// Left-hand side of the M-form hodograph equation,
/// `x - φ1(A,t) M - φ2(A,t) g - φ(M)`.
pub fn residual_m(problem: &HodographProblem, t: f64, x: &Vect, m: &Vect) -> Result<Vect> {
    check_dim(problem.dim(), x.len())?;
    check_dim(problem.dim(), m.len())?;
    let aff = generic_affine(problem.spec(), t, x)?;
    aff.residual(problem.data(), m)
}

/// The hodograph equation written as `offset + coeff·M - φ(M) = 0`.
///
/// The generic pipeline has `coeff = -φ1(A,t)`; the degenerate pipeline
/// builds its own affine part from the rotated integrals.
#[derive(Debug, Clone)]
pub(crate) struct AffineHodograph {
    pub coeff: Mat,
    pub offset: Vect,
}

impl AffineHodograph {
    pub fn residual(&self, data: &InitialData, m: &Vect) -> Result<Vect> {
        Ok(&self.offset + &self.coeff * m - data.phi_partial(m)?)
    }
}

pub(crate) fn generic_affine(spec: &ForceSpec, t: f64, x: &Vect) -> Result<AffineHodograph> {
    let p = matops::phi_functions(spec.a(), t)?;
    Ok(AffineHodograph {
        coeff: -p.phi1,
        offset: x - p.phi2 * spec.g(),
    })
}

fn restrict(v: &Vect, idx: &[usize]) -> Vect {
    Vect::from_iterator(idx.len(), idx.iter().map(|&i| v[i]))
}

fn restrict_mat(a: &Mat, idx: &[usize]) -> Mat {
    Mat::from_fn(idx.len(), idx.len(), |r, c| a[(idx[r], idx[c])])
}

/// Relative Newton step below which the iteration has converged in M.
const NEWTON_STEP_FLOOR: f64 = 1e-14;

/// Damped Newton iteration on `offset + coeff·M - φ(M) = 0` over the free
/// components of M. Frozen components are pinned to their constants.
///
/// Returns the root and the number of Newton steps taken.
pub(crate) fn newton_affine(
    data: &InitialData,
    aff: &AffineHodograph,
    guess: &Vect,
    opts: &SolverOptions,
) -> Result<(Vect, usize)> {
    let free = data.free_indices();
    let mut m = data.clip_to_domain(guess);
    let eval = |m: &Vect| -> Result<f64> { Ok(restrict(&aff.residual(data, m)?, &free).norm()) };
    let mut f = restrict(&aff.residual(data, &m)?, &free);
    let mut norm = f.norm();
    let mut retried = false;
    for it in 0..opts.newton_max_iter {
        if norm <= opts.newton_tol {
            return Ok((m, it));
        }
        let jac = restrict_mat(&(&aff.coeff - data.phi_jacobian(&m)?), &free);
        let step = matops::solve(&jac, &(-&f)).map_err(|_| Error::JacobianSingular {
            m: m.iter().cloned().collect(),
        })?;
        let mut full = Vect::zeros(m.len());
        for (k, &i) in free.iter().enumerate() {
            full[i] = step[k];
        }
        // near the domain edge φ' is large and the residual floor is
        // |φ'|·ulp(M); a rounding-level step means M is as good as it gets
        if full.amax() <= NEWTON_STEP_FLOOR * (1.0 + m.amax()) {
            let cand = &m + &full;
            return Ok((if data.in_domain(cand.as_slice()) { cand } else { m }, it + 1));
        }

        let mut lambda = 1.0;
        let mut best: Option<(Vect, f64)> = None;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let cand = &m + &full * lambda;
            if data.in_domain(cand.as_slice()) {
                let cn = eval(&cand)?;
                if cn < norm {
                    accepted = Some((cand, cn));
                    break;
                }
                if best.as_ref().is_none_or(|(_, bn)| cn < *bn) {
                    best = Some((cand, cn));
                }
            }
            lambda *= 0.5;
        }
        match accepted.or(best) {
            Some((cand, _)) => m = cand,
            None => {
                if retried {
                    return Err(Error::DomainExit {
                        m: m.iter().cloned().collect(),
                    });
                }
                retried = true;
                m = data.clip_to_domain(&(&m + &full * lambda));
            }
        }
        f = restrict(&aff.residual(data, &m)?, &free);
        norm = f.norm();
    }
    if norm <= opts.newton_tol {
        Ok((m, opts.newton_max_iter))
    } else {
        Err(Error::NoConvergence {
            iterations: opts.newton_max_iter,
            residual: norm,
        })
    }
}

/// Newton on the initial position ξ of the characteristic through x:
/// `ξ - offset - coeff·u⁰(ξ) = 0`, returning `M = u⁰(ξ)`.
///
/// Fallback for roots next to the edge of the M-domain, where φ has a
/// square-root branch point and Newton in M steps out of the domain. The
/// Jacobian `I - coeff·∂u⁰/∂ξ` stays regular up to blow-up. Frozen
/// components of ξ are held at 0, where φ maps them.
fn newton_position(data: &InitialData, aff: &AffineHodograph, x: &Vect, opts: &SolverOptions) -> Result<(Vect, usize)> {
    let free = data.free_indices();
    let n = x.len();
    let pin = |xi: &Vect| Vect::from_fn(n, |i, _| if free.contains(&i) { xi[i] } else { 0.0 });
    let eval = |xi: &Vect| -> Result<Vect> {
        let u = data.u0_eval(xi)?;
        Ok(restrict(&(xi - &aff.offset - &aff.coeff * u), &free))
    };
    // x mirrored into the half-spaces of the data's branches, fewest flips first
    let mut flips: Vec<usize> = (0..1usize << n).collect();
    flips.sort_by_key(|k| k.count_ones());
    let mut xi = flips
        .iter()
        .map(|k| pin(&Vect::from_fn(n, |i, _| if k >> i & 1 == 1 { -x[i] } else { x[i] })))
        .find(|c| data.u0_eval(c).is_ok())
        .ok_or_else(|| Error::Domain("no start for the position-space Newton".into()))?;
    let mut f = eval(&xi)?;
    for it in 0..opts.newton_max_iter {
        let norm = f.norm();
        if norm <= opts.newton_tol {
            return finish_position(data, &xi, it);
        }
        let jac = restrict_mat(&(Mat::identity(n, n) - &aff.coeff * data.u0_jacobian(&xi)?), &free);
        let step = matops::solve(&jac, &(-&f))?;
        let mut full = Vect::zeros(n);
        for (k, &i) in free.iter().enumerate() {
            full[i] = step[k];
        }
        if full.amax() <= NEWTON_STEP_FLOOR * (1.0 + xi.amax()) {
            return finish_position(data, &(&xi + &full), it + 1);
        }
        let mut lambda = 1.0;
        let mut next = None;
        for _ in 0..=opts.max_halvings {
            let cand = &xi + &full * lambda;
            if let Ok(cf) = eval(&cand) {
                if cf.norm() < norm {
                    next = Some((cand, cf));
                    break;
                }
            }
            lambda *= 0.5;
        }
        let Some((cand, cf)) = next else {
            return Err(Error::NoConvergence { iterations: it + 1, residual: norm });
        };
        xi = cand;
        f = cf;
    }
    Err(Error::NoConvergence {
        iterations: opts.newton_max_iter,
        residual: f.norm(),
    })
}

fn finish_position(data: &InitialData, xi: &Vect, iterations: usize) -> Result<(Vect, usize)> {
    let m = data.u0_eval(xi)?;
    if data.in_domain(m.as_slice()) {
        Ok((m, iterations))
    } else {
        Err(Error::DomainExit {
            m: m.iter().cloned().collect(),
        })
    }
}

/// Result of a hodograph solve.
#[derive(Debug, Clone, PartialEq)]
pub struct HodographSolution {
    pub sample: StateSample,
    /// The root M (the initial velocity of the characteristic through x).
    pub m: Vect,
    pub iterations: usize,
}

/// Default Newton guess: `u⁰(x)` projected into the M-domain. Positions
/// outside a branch's half-space are reflected onto it first.
pub fn default_guess(data: &InitialData, x: &Vect) -> Vect {
    let u = data.u0_eval(x).or_else(|_| data.u0_eval(&x.abs()));
    match u {
        Ok(u) => data.clip_to_domain(&u),
        Err(_) => {
            let (lo, hi) = data.m_box();
            data.clip_to_domain(&((lo + hi) * 0.5))
        }
    }
}

/// A hodograph system in M-form: the affine part at `(t, x)` and the map
/// from a root M back to the velocity.
pub(crate) trait HodographSystem {
    fn affine(&self, t: f64, x: &Vect) -> Result<AffineHodograph>;
    fn velocity(&self, t: f64, m: &Vect) -> Result<Vect>;
}

struct GenericSystem<'a>(&'a ForceSpec);

impl HodographSystem for GenericSystem<'_> {
    fn affine(&self, t: f64, x: &Vect) -> Result<AffineHodograph> {
        generic_affine(self.0, t, x)
    }

    fn velocity(&self, t: f64, m: &Vect) -> Result<Vect> {
        u_from_m_any(self.0, t, m)
    }
}

pub(crate) fn solve_system(
    problem: &HodographProblem,
    system: &dyn HodographSystem,
    t: f64,
    x: &Vect,
    guess_m: Option<&Vect>,
) -> Result<HodographSolution> {
    check_dim(problem.dim(), x.len())?;
    if !t.is_finite() || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("(t, x)"));
    }
    let aff = system.affine(t, x)?;
    let (m, iterations) = match guess_m {
        Some(g) => {
            check_dim(problem.dim(), g.len())?;
            newton_affine(problem.data(), &aff, g, problem.options())?
        }
        None => {
            let first = newton_affine(problem.data(), &aff, &default_guess(problem.data(), x), problem.options());
            match first {
                Err(Error::DomainExit { .. } | Error::NoConvergence { .. }) => {
                    newton_position(problem.data(), &aff, x, problem.options()).map_err(|_| first.unwrap_err())?
                }
                other => other?,
            }
        }
    };
    let u = system.velocity(t, &m)?;
    Ok(HodographSolution {
        sample: StateSample {
            t,
            x: x.clone(),
            u,
        },
        m,
        iterations,
    })
}

/// Solves the hodograph equation at `(t, x)` and returns `u(t, x)`.
pub fn solve_u(
    problem: &HodographProblem,
    t: f64,
    x: &Vect,
    guess_m: Option<&Vect>,
) -> Result<HodographSolution> {
    require_generic(problem.spec())?;
    solve_system(problem, &GenericSystem(problem.spec()), t, x, guess_m)
}

/// Continuation in time at fixed x: solves at every requested time, marching
/// from t = 0 in steps of at most `sweep_dt` and reusing the previous root as
/// the guess. Once a sweep direction fails, later times in that direction
/// report the same error instead of hopping to another branch.
///
/// Results are returned in the order of `times`.
pub fn sweep_u(
    problem: &HodographProblem,
    x: &Vect,
    times: &[f64],
) -> Vec<Result<HodographSolution>> {
    if let Err(e) = require_generic(problem.spec()) {
        return vec![Err(e); times.len()];
    }
    sweep_system(problem, &GenericSystem(problem.spec()), x, times)
}

pub(crate) fn sweep_system(
    problem: &HodographProblem,
    system: &dyn HodographSystem,
    x: &Vect,
    times: &[f64],
) -> Vec<Result<HodographSolution>> {
    let mut out: Vec<Option<Result<HodographSolution>>> = vec![None; times.len()];
    let mut forward: Vec<usize> = (0..times.len()).filter(|&i| times[i] >= 0.0).collect();
    forward.sort_by(|&a, &b| times[a].partial_cmp(&times[b]).unwrap());
    let mut backward: Vec<usize> = (0..times.len()).filter(|&i| times[i] < 0.0).collect();
    backward.sort_by(|&a, &b| times[b].partial_cmp(&times[a]).unwrap());

    for order in [forward, backward] {
        let mut t_prev = 0.0;
        let mut state: Result<Vect> = solve_system(problem, system, 0.0, x, None).map(|s| s.m);
        for idx in order {
            let target = times[idx];
            if let Ok(mut m) = state.clone() {
                let span = target - t_prev;
                let steps = (span.abs() / problem.options().sweep_dt).ceil().max(1.0) as usize;
                let mut last = None;
                for k in 1..=steps {
                    let tk = if k == steps { target } else { t_prev + span * k as f64 / steps as f64 };
                    let step = solve_system(problem, system, tk, x, Some(&m)).and_then(|sol| {
                        if same_side_of_gamma(problem, system, &sol)? {
                            Ok(sol)
                        } else {
                            Err(Error::JacobianSingular {
                                m: sol.m.iter().cloned().collect(),
                            })
                        }
                    });
                    match step {
                        Ok(sol) => {
                            m = sol.m.clone();
                            last = Some(Ok(sol));
                        }
                        Err(e) => {
                            last = Some(Err(e));
                            break;
                        }
                    }
                }
                let res = last.expect("at least one step");
                state = res.as_ref().map(|s| s.m.clone()).map_err(|e| e.clone());
                t_prev = target;
                out[idx] = Some(res);
            } else {
                out[idx] = Some(Err(state.clone().unwrap_err()));
            }
        }
    }
    out.into_iter().map(|r| r.expect("every time visited")).collect()
}

/// Whether `det(∂φ/∂M - coeff)` at the root (`det(φ1(A,t) + ∂φ/∂M)` in the
/// generic case) still has the sign of `det(∂φ/∂M)`, i.e. the root has not
/// been continued across Γ.
fn same_side_of_gamma(
    problem: &HodographProblem,
    system: &dyn HodographSystem,
    sol: &HodographSolution,
) -> Result<bool> {
    let free = problem.data().free_indices();
    let j = problem.data().phi_jacobian(&sol.m)?;
    let coeff = system.affine(sol.sample.t, &sol.sample.x)?.coeff;
    let d0 = matops::det(&restrict_mat(&j, &free));
    let dt = matops::det(&restrict_mat(&(j - coeff), &free));
    Ok(d0 * dt > 0.0)
}

/// Degenerate closed-form solutions obtained by freezing one family of integrals.
#[derive(Debug, Clone, PartialEq)]
pub enum ClosedForm {
    /// `I1 = α`: `u = g t + A x + α`.
    ConstI1(Vect),
    /// `I2 = β`: `u = A⁻¹(e^{tA} β - g)`.
    ConstI2(Vect),
    /// `M = γ`: `u = e^{tA} γ + φ1(A,t) g`.
    ConstM(Vect),
    /// `N = δ`: `u = φ1(A,-t)⁻¹(δ - x - φ2(A,-t) g)`.
    ConstN(Vect),
}

/// Evaluates a closed-form solution at `(t, x)`.
pub fn closed_form(kind: &ClosedForm, spec: &ForceSpec, t: f64, x: &Vect) -> Result<Vect> {
    let n = spec.dim();
    check_dim(n, x.len())?;
    let a = spec.a();
    let g = spec.g();
    match kind {
        ClosedForm::ConstI1(alpha) => {
            check_dim(n, alpha.len())?;
            Ok(g * t + a * x + alpha)
        }
        ClosedForm::ConstI2(beta) => {
            check_dim(n, beta.len())?;
            let e = matops::mat_exp(a, t)?;
            matops::solve(a, &(e * beta - g))
        }
        ClosedForm::ConstM(gamma) => {
            check_dim(n, gamma.len())?;
            u_from_m_any(spec, t, gamma)
        }
        ClosedForm::ConstN(delta) => {
            check_dim(n, delta.len())?;
            let back = matops::phi_functions(a, -t)?;
            matops::solve(&back.phi1, &(delta - x - back.phi2 * g))
        }
    }
}

/// Maps `(t, x, u)` to `(t̄, x̄, ū) = (φ1(a,t), x - φ2(a,t) g, M)` for `A = a·I`.
///
/// The image satisfies the homogeneous hodograph equation `x̄ - ū t̄ = φ(ū)`.
pub fn to_bar_variables(spec: &ForceSpec, s: &StateSample) -> Result<StateSample> {
    let a = spec.scalar_multiple_of_identity().ok_or_else(|| {
        Error::Unsupported("bar variables need A scalar or a multiple of the identity".into())
    })?;
    check_dim(spec.dim(), s.x.len())?;
    let n = spec.dim();
    let scalar = Mat::from_element(1, 1, a);
    let p = matops::phi_functions(&scalar, s.t)?;
    let (tb, p2) = (p.phi1[(0, 0)], p.phi2[(0, 0)]);
    let m = integrals_any(spec, s)?.m;
    let xb = &s.x - spec.g() * p2;
    debug_assert_eq!(xb.len(), n);
    Ok(StateSample { t: tb, x: xb, u: m })
}

/// Solves at `(t, x)` through the homogeneous equation `x̄ - ū t̄ = φ(ū)` and
/// maps back with `u = u_from_m(t, ū)`. Requires `A = a·I`.
pub fn solve_u_bar(problem: &HodographProblem, t: f64, x: &Vect) -> Result<HodographSolution> {
    let spec = problem.spec();
    let n = spec.dim();
    let bar = to_bar_variables(
        spec,
        &StateSample {
            t,
            x: x.clone(),
            u: Vect::zeros(n),
        },
    )?;
    let aff = AffineHodograph {
        coeff: Mat::identity(n, n) * (-bar.t),
        offset: bar.x.clone(),
    };
    let guess = default_guess(problem.data(), x);
    let (m, iterations) = newton_affine(problem.data(), &aff, &guess, problem.options())?;
    let u = u_from_m_any(spec, t, &m)?;
    Ok(HodographSolution {
        sample: StateSample { t, x: x.clone(), u },
        m,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Branch;

    fn v(x: &[f64]) -> Vect {
        Vect::from_column_slice(x)
    }

    fn tanh_problem(a: f64, g: f64) -> HodographProblem {
        HodographProblem::new(
            ForceSpec::scalar(a, g).unwrap(),
            InitialData::tanh_1d(1.0, 1.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn integrals_at_time_zero() {
        let spec = ForceSpec::coriolis_2d(1.3, v(&[0.2, -0.4])).unwrap();
        let s = StateSample::new(0.0, v(&[1.0, 2.0]), v(&[-0.5, 0.7])).unwrap();
        let iv = integrals(&spec, &s).unwrap();
        assert_eq!(iv.m, s.u);
        assert_eq!(iv.n, s.x);
    }

    #[test]
    fn integrals_small_a_limit() {
        let eps = 1e-12;
        let spec = ForceSpec::diagonal(&[eps, eps], v(&[0.3, -1.0])).unwrap();
        let t = 1.7;
        let s = StateSample::new(t, v(&[0.4, 0.1]), v(&[1.0, 2.0])).unwrap();
        let iv = integrals(&spec, &s).unwrap();
        let m = &s.u - spec.g() * t;
        let n = &s.x - &s.u * t + spec.g() * (0.5 * t * t);
        assert!((iv.m - m).amax() < 1e-10);
        assert!((iv.n - n).amax() < 1e-10);
    }

    #[test]
    fn coriolis_m_is_rotated_velocity() {
        let w = 0.9;
        let t = 1.1;
        let spec = ForceSpec::coriolis_2d(w, v(&[0.0, 0.0])).unwrap();
        let u = v(&[0.3, -0.8]);
        let iv = integrals(&spec, &StateSample::new(t, v(&[0.0, 0.0]), u.clone()).unwrap()).unwrap();
        let (s, c) = (w * t).sin_cos();
        let rot = v(&[c * u[0] - s * u[1], s * u[0] + c * u[1]]);
        assert!((iv.m - rot).amax() < 1e-14);
    }

    #[test]
    fn u_from_m_examples() {
        let spec = ForceSpec::coriolis_2d(0.7, v(&[1.0, 2.0])).unwrap();
        let m = v(&[0.5, -0.2]);
        assert_eq!(u_from_m(&spec, 0.0, &m).unwrap(), m);
        let t = 0.8;
        let expect = matops::phi1(spec.a(), t).unwrap() * spec.g();
        assert!((u_from_m(&spec, t, &v(&[0.0, 0.0])).unwrap() - expect).amax() < 1e-15);
    }

    #[test]
    fn degenerate_spec_is_routed_away() {
        let a = Mat::from_row_slice(3, 3, &[0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let spec = ForceSpec::new(a, Vect::zeros(3)).unwrap();
        let s = StateSample::new(0.1, Vect::zeros(3), Vect::zeros(3)).unwrap();
        assert!(matches!(integrals(&spec, &s), Err(Error::Degenerate { rank: 2, n: 3 })));
        assert!(matches!(u_from_m(&spec, 0.1, &Vect::zeros(3)), Err(Error::Degenerate { .. })));
    }

    #[test]
    fn residual_matches_gravity_form() {
        let p = tanh_problem(0.0, 1.0);
        let (t, x, m) = (0.6, 0.35, 0.8);
        let phi = (1.0_f64 - m).atanh();
        let want = x - m * t - 0.5 * t * t - phi;
        let r = residual_m(&p, t, &v(&[x]), &v(&[m])).unwrap()[0];
        assert!((r - want).abs() < 1e-15);
        let r0 = residual_m(&p, 0.0, &v(&[phi]), &v(&[m])).unwrap()[0];
        assert!(r0.abs() < 1e-15);
    }

    #[test]
    fn solve_at_time_zero_is_initial_data() {
        let p = tanh_problem(0.4, 1.0);
        let sol = solve_u(&p, 0.0, &v(&[0.7]), None).unwrap();
        assert!(sol.iterations <= 1);
        assert!((sol.sample.u[0] - (1.0 - 0.7_f64.tanh())).abs() < 1e-12);
    }

    #[test]
    fn solve_matches_characteristic_for_tanh_with_gravity() {
        let p = tanh_problem(0.0, 1.0);
        let (x0, t) = (0.3_f64, 0.5);
        let u0 = 1.0 - x0.tanh();
        let x = x0 + u0 * t + 0.5 * t * t;
        let sol = solve_u(&p, t, &v(&[x]), None).unwrap();
        assert!((sol.sample.u[0] - (u0 + t)).abs() < 1e-9);
    }

    #[test]
    fn constant_data_gives_const_m_solution() {
        let spec = ForceSpec::coriolis_2d(1.2, v(&[0.1, 0.3])).unwrap();
        let c = v(&[0.4, -0.6]);
        let p = HodographProblem::new(spec.clone(), InitialData::constant(c.clone()).unwrap()).unwrap();
        let t = 0.9;
        let sol = solve_u(&p, t, &v(&[5.0, -2.0]), None).unwrap();
        let want = closed_form(&ClosedForm::ConstM(c), &spec, t, &v(&[0.0, 0.0])).unwrap();
        assert!((sol.sample.u - want).amax() < 1e-15);
    }

    #[test]
    fn jacobian_singular_reported_with_m() {
        // Tanh1D, A = g = 0: at t = 1 the Jacobian -t - φ'(M) vanishes exactly at M = 1.
        let p = tanh_problem(0.0, 0.0);
        let err = solve_u(&p, 1.0, &v(&[1.001]), Some(&v(&[1.0]))).unwrap_err();
        match err {
            Error::JacobianSingular { m } => assert_eq!(m, vec![1.0]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn closed_form_examples() {
        let a = Mat::from_row_slice(2, 2, &[0.3, 1.0, -0.5, 0.2]);
        let spec = ForceSpec::new(a.clone(), v(&[0.5, -1.0])).unwrap();
        let x = v(&[0.2, 0.7]);
        let t = 0.4;
        let u = closed_form(&ClosedForm::ConstI1(Vect::zeros(2)), &spec, t, &x).unwrap();
        assert!((u - (spec.g() * t + &a * &x)).amax() < 1e-15);
        let beta = v(&[1.0, 2.0]);
        let u = closed_form(&ClosedForm::ConstI2(beta.clone()), &spec, 0.0, &x).unwrap();
        let want = matops::solve(&a, &(&beta - spec.g())).unwrap();
        assert!((u - want).amax() < 1e-14);
        assert!(matches!(
            closed_form(&ClosedForm::ConstN(beta), &spec, 0.0, &x),
            Err(Error::Singular)
        ));
        let tiny = ForceSpec::diagonal(&[1e-13, 1e-13], v(&[0.5, -1.0])).unwrap();
        let gamma = v(&[0.1, 0.2]);
        let u = closed_form(&ClosedForm::ConstM(gamma.clone()), &tiny, t, &x).unwrap();
        assert!((u - (gamma + tiny.g() * t)).amax() < 1e-12);
    }

    #[test]
    fn bar_variables_examples() {
        let spec = ForceSpec::scalar(1.0, 0.5).unwrap();
        let s0 = StateSample::new(0.0, v(&[0.3]), v(&[0.2])).unwrap();
        let b0 = to_bar_variables(&spec, &s0).unwrap();
        assert_eq!((b0.t, b0.x[0], b0.u[0]), (0.0, 0.3, 0.2));
        let s = StateSample::new(2f64.ln(), v(&[0.3]), v(&[0.2])).unwrap();
        assert!((to_bar_variables(&spec, &s).unwrap().t - 1.0).abs() < 1e-15);
        let rot = ForceSpec::coriolis_2d(1.0, Vect::zeros(2)).unwrap();
        let s2 = StateSample::new(0.1, Vect::zeros(2), Vect::zeros(2)).unwrap();
        assert!(matches!(to_bar_variables(&rot, &s2), Err(Error::Unsupported(_))));
    }

    #[test]
    fn bar_limit_small_a() {
        let spec = ForceSpec::scalar(1e-12, 2.0).unwrap();
        let (t, x, u) = (0.7, 0.4, 1.1);
        let b = to_bar_variables(&spec, &StateSample::new(t, v(&[x]), v(&[u])).unwrap()).unwrap();
        assert!((b.t - t).abs() < 1e-10);
        assert!((b.x[0] - (x - t * t)).abs() < 1e-10);
        assert!((b.u[0] - (u - 2.0 * t)).abs() < 1e-10);
    }

    #[test]
    fn gauss_branch_guess_reflects() {
        let d = InitialData::gauss_1d(1.0, 1.0, Branch::Plus).unwrap();
        let g = default_guess(&d, &v(&[-0.5]));
        assert!((g[0] - (-0.25f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn sweep_matches_direct_solves_before_blowup() {
        let p = tanh_problem(0.3, 1.0);
        let x = v(&[0.4]);
        let times = [0.6, -0.3, 0.2, 0.0];
        let res = sweep_u(&p, &x, &times);
        for (t, r) in times.iter().zip(&res) {
            let direct = solve_u(&p, *t, &x, None).unwrap();
            assert!((r.as_ref().unwrap().sample.u[0] - direct.sample.u[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn sweep_failure_is_sticky() {
        let opts = SolverOptions {
            newton_max_iter: 1,
            sweep_dt: 10.0,
            ..SolverOptions::default()
        };
        let p = tanh_problem(0.0, 0.0).with_options(opts).unwrap();
        let res = sweep_u(&p, &v(&[0.5]), &[0.9, 0.95]);
        assert!(matches!(res[0], Err(Error::NoConvergence { .. })));
        assert_eq!(res[0], res[1]);
    }
}

//! Ground truth from characteristics: `dx/dt = u`, `du/dt = F(t, x, u)`.
//!
//! For the linear force the flow is explicit,
//! `u(t) = e^{tA} u⁰ + φ1(A,t) g` and `x(t) = x⁰ + φ1(A,t) u⁰ + φ2(A,t) g`,
//! and the flow map folds where `det(I + φ1(A,t) ∂u⁰/∂x) = 0`.

use crate::blowup::{bisect, bisection_roots};
use crate::error::{Error, Result};
use crate::matops::{self, Mat, Vect};
use crate::model::{ForceSpec, InitialData};

/// Largest step count accepted by [`rk4_flow`].
pub const MAX_RK4_STEPS: f64 = 1e8;

/// End point of one characteristic.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowResult {
    pub t: f64,
    pub x: Vect,
    pub u: Vect,
    /// `det(∂x(t)/∂x⁰)` when the initial data is known.
    pub jacobian_det: Option<f64>,
}

fn check_pair(n: usize, x0: &Vect, u0: &Vect) -> Result<()> {
    for v in [x0, u0] {
        if v.len() != n {
            return Err(Error::Dimension {
                expected: n,
                got: v.len(),
            });
        }
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("initial state"));
        }
    }
    Ok(())
}

/// Exact characteristic through `(x⁰, u⁰)` at time t, for any A.
pub fn exact_flow(spec: &ForceSpec, x0: &Vect, u0: &Vect, t: f64) -> Result<FlowResult> {
    check_pair(spec.dim(), x0, u0)?;
    let p = matops::phi_functions(spec.a(), t)?;
    let g = spec.g();
    Ok(FlowResult {
        t,
        x: x0 + &p.phi1 * u0 + &p.phi2 * g,
        u: &p.exp * u0 + &p.phi1 * g,
        jacobian_det: None,
    })
}

/// Exact flow of the characteristic starting at `x⁰` with `u⁰ = data(x⁰)`,
/// including the flow-map determinant.
pub fn exact_flow_from(spec: &ForceSpec, data: &InitialData, x0: &Vect, t: f64) -> Result<FlowResult> {
    let u0 = data.u0_eval(x0)?;
    let mut r = exact_flow(spec, x0, &u0, t)?;
    r.jacobian_det = Some(flow_jacobian_det(spec, data, x0, t)?);
    Ok(r)
}

/// The linear force `g + A u` as a callback.
pub fn linear_force(spec: &ForceSpec) -> impl Fn(f64, &Vect, &Vect) -> Vect + '_ {
    move |_t, _x, u| spec.force(u)
}

/// Classical fixed-step RK4 on the characteristic system. The last step is
/// shortened to land on t; negative t integrates backwards.
pub fn rk4_flow(
    force: &dyn Fn(f64, &Vect, &Vect) -> Vect,
    x0: &Vect,
    u0: &Vect,
    t: f64,
    dt: f64,
) -> Result<FlowResult> {
    rk4_flow_observed(force, x0, u0, t, dt, &mut |_, _, _| {})
}

/// [`rk4_flow`] calling `observe(t, x, u)` after every step.
pub fn rk4_flow_observed(
    force: &dyn Fn(f64, &Vect, &Vect) -> Vect,
    x0: &Vect,
    u0: &Vect,
    t: f64,
    dt: f64,
    observe: &mut dyn FnMut(f64, &Vect, &Vect),
) -> Result<FlowResult> {
    check_pair(x0.len(), x0, u0)?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    if !t.is_finite() {
        return Err(Error::NonFinite("time"));
    }
    let steps_f = (t.abs() / dt).ceil();
    if steps_f > MAX_RK4_STEPS {
        return Err(Error::TooManySteps { steps: steps_f });
    }
    let steps = steps_f as usize;
    let dir = t.signum();
    let (mut x, mut u) = (x0.clone(), u0.clone());
    let mut s = 0.0;
    for k in 0..steps {
        let h = if k + 1 == steps { t - s } else { dir * dt };
        let k1x = u.clone();
        let k1u = force(s, &x, &u);
        let (x2, u2) = (&x + &k1x * (0.5 * h), &u + &k1u * (0.5 * h));
        let k2x = u2.clone();
        let k2u = force(s + 0.5 * h, &x2, &u2);
        let (x3, u3) = (&x + &k2x * (0.5 * h), &u + &k2u * (0.5 * h));
        let k3x = u3.clone();
        let k3u = force(s + 0.5 * h, &x3, &u3);
        let (x4, u4) = (&x + &k3x * h, &u + &k3u * h);
        let k4x = u4.clone();
        let k4u = force(s + h, &x4, &u4);
        x += (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (h / 6.0);
        u += (k1u + k2u * 2.0 + k3u * 2.0 + k4u) * (h / 6.0);
        s = if k + 1 == steps { t } else { s + h };
        if x.iter().chain(u.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("rk4 state"));
        }
        observe(s, &x, &u);
    }
    Ok(FlowResult {
        t,
        x,
        u,
        jacobian_det: None,
    })
}

/// `det(∂x(t)/∂x⁰) = det(I + φ1(A,t) ∂u⁰/∂x(x⁰))`.
pub fn flow_jacobian_det(spec: &ForceSpec, data: &InitialData, x0: &Vect, t: f64) -> Result<f64> {
    if data.dim() != spec.dim() {
        return Err(Error::Dimension {
            expected: spec.dim(),
            got: data.dim(),
        });
    }
    let ju = data.u0_jacobian(x0)?;
    let p1 = matops::phi1(spec.a(), t)?;
    let n = spec.dim();
    Ok(matops::det(&(Mat::identity(n, n) + p1 * ju)))
}

/// First `t ∈ (0, t_max]` where the flow map through `x⁰` folds, bracketed on
/// a grid of step `dt` and refined by bisection.
pub fn first_fold_time(spec: &ForceSpec, data: &InitialData, x0: &Vect, t_max: f64, dt: f64) -> Result<Option<f64>> {
    flow_jacobian_det(spec, data, x0, 0.0)?;
    let f = |t: f64| flow_jacobian_det(spec, data, x0, t).unwrap_or(f64::NAN);
    let roots = bisection_roots(&f, t_max, dt);
    Ok(roots.first().map(|&t0| {
        // polish across the bracket found by the scan
        let (a, b) = ((t0 - dt).max(0.0), (t0 + dt).min(t_max));
        let (fa, fb) = (f(a), f(b));
        if fa.signum() != fb.signum() && fa != 0.0 {
            bisect(&f, a, b, fa)
        } else {
            t0
        }
    }))
}

/// Max-norm of the central-difference residual `u_t + (u·∇)u - g - A u` of a
/// velocity field at `(t, x)` with step h.
pub fn pde_residual(
    field: &dyn Fn(f64, &Vect) -> Result<Vect>,
    spec: &ForceSpec,
    t: f64,
    x: &Vect,
    h: f64,
) -> Result<f64> {
    let n = spec.dim();
    if x.len() != n {
        return Err(Error::Dimension { expected: n, got: x.len() });
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidParameter(format!("stencil step must be positive, got {h}")));
    }
    let u = field(t, x)?;
    let ut = (field(t + h, x)? - field(t - h, x)?) / (2.0 * h);
    let mut conv = Vect::zeros(n);
    for k in 0..n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[k] += h;
        xm[k] -= h;
        let du = (field(t, &xp)? - field(t, &xm)?) / (2.0 * h);
        conv += du * u[k];
    }
    Ok((ut + conv - spec.force(&u)).amax())
}

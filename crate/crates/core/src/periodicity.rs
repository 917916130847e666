//! Time-periodicity of `e^{tA}` and of the g = 0 solutions it generates.
//!
//! `e^{TA} = I` for a diagonalizable A whose eigenvalues are `±iλ·p_k/q_k`;
//! the fundamental period is then `2π·lcm(q_k)/λ` when λ is the smallest
//! frequency.

use nalgebra::Complex;

use crate::error::{Error, Result};
use crate::hodograph::sweep_u;
use crate::matops::{self, Mat, Vect};
use crate::model::HodographProblem;

/// Default tolerance for eigenvalue tests and rational reconstruction.
pub const RATIONAL_TOL: f64 = 1e-9;
/// Default largest denominator in rational reconstruction.
pub const MAX_DENOMINATOR: i64 = 64;
/// Bound on `‖e^{TA} - I‖` for an accepted period.
pub const PERIOD_CHECK_TOL: f64 = 1e-8;

/// Best rational approximation `p/q` of `x` with `1 ≤ q ≤ max_den` and
/// `|x - p/q| ≤ tol·max(1, |x|)`, by continued fractions.
pub fn rational_approx(x: f64, max_den: i64, tol: f64) -> Option<(i64, i64)> {
    if !x.is_finite() || max_den < 1 {
        return None;
    }
    let target = tol * x.abs().max(1.0);
    let (mut h0, mut h1) = (0i64, 1i64);
    let (mut k0, mut k1) = (1i64, 0i64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a.abs() > 1e15 {
            return None;
        }
        let a = a as i64;
        let h2 = a.checked_mul(h1)?.checked_add(h0)?;
        let k2 = a.checked_mul(k1)?.checked_add(k0)?;
        if k2 > max_den {
            return None;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if (x - h1 as f64 / k1 as f64).abs() <= target {
            return Some((h1, k1));
        }
        let frac = r - a as f64;
        if frac == 0.0 {
            return None;
        }
        r = 1.0 / frac;
    }
    None
}

/// Why `e^{tA}` is not periodic.
#[derive(Debug, Clone, PartialEq)]
pub enum NonPeriodicReason {
    NonFinite,
    /// An eigenvalue with a real part beyond tolerance.
    RealPart { eigenvalue: Complex<f64> },
    /// A zero eigenvalue (`det A = 0`).
    ZeroEigenvalue,
    /// Repeated imaginary eigenvalues without a full eigenbasis.
    NotDiagonalizable,
    /// A frequency ratio with no small-denominator rational approximation.
    IrrationalRatio { ratio: f64 },
    /// The reconstructed T fails `‖e^{TA} - I‖ ≤ 1e-8`.
    VerificationFailed { period: f64, residual: f64 },
}

/// Outcome of [`check_periodic`].
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicityReport {
    pub periodic: bool,
    /// Fundamental period, present iff periodic.
    pub period: Option<f64>,
    pub eigenvalues: Vec<Complex<f64>>,
    /// Smallest positive frequency λ.
    pub base_rate: Option<f64>,
    /// `(p_k, q_k)` with `|Im ν_k| = λ·p_k/q_k`, one per eigenvalue.
    pub multipliers: Vec<(i64, i64)>,
    pub reason: Option<NonPeriodicReason>,
}

impl PeriodicityReport {
    fn fail(eigenvalues: Vec<Complex<f64>>, reason: NonPeriodicReason) -> Self {
        Self {
            periodic: false,
            period: None,
            eigenvalues,
            base_rate: None,
            multipliers: Vec::new(),
            reason: Some(reason),
        }
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn period_residual(a: &Mat, t: f64) -> f64 {
    match matops::mat_exp(a, t) {
        Ok(e) => matops::max_abs(&(e - Mat::identity(a.nrows(), a.ncols()))),
        Err(_) => f64::INFINITY,
    }
}

/// Decides whether `e^{tA}` is periodic and returns its fundamental period.
///
/// The candidate `(2π/λ)·Π q_k` is reduced by the largest integer divisor d
/// for which `e^{TA/d} = I` still holds.
pub fn check_periodic(a: &Mat, rational_tol: f64, max_denominator: i64) -> Result<PeriodicityReport> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension {
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Ok(PeriodicityReport::fail(Vec::new(), NonPeriodicReason::NonFinite));
    }
    let spec = matops::eig(a)?;
    let ev = spec.eigenvalues.clone();
    let scale = matops::norm1(a).max(f64::MIN_POSITIVE);
    let eig_tol = rational_tol * scale;
    if let Some(z) = ev.iter().find(|z| z.norm() <= eig_tol) {
        let _ = z;
        return Ok(PeriodicityReport::fail(ev, NonPeriodicReason::ZeroEigenvalue));
    }
    if let Some(z) = ev.iter().find(|z| z.re.abs() > eig_tol) {
        let z = *z;
        return Ok(PeriodicityReport::fail(ev, NonPeriodicReason::RealPart { eigenvalue: z }));
    }
    if !spec.diagonalizable {
        return Ok(PeriodicityReport::fail(ev, NonPeriodicReason::NotDiagonalizable));
    }
    let lambda = ev.iter().map(|z| z.im.abs()).fold(f64::INFINITY, f64::min);
    let mut multipliers = Vec::with_capacity(ev.len());
    for z in &ev {
        let ratio = z.im.abs() / lambda;
        match rational_approx(ratio, max_denominator, rational_tol) {
            Some(pq) => multipliers.push(pq),
            None => return Ok(PeriodicityReport::fail(ev, NonPeriodicReason::IrrationalRatio { ratio })),
        }
    }
    let mut dens: Vec<i64> = multipliers.iter().map(|&(_, q)| q).collect();
    dens.sort_unstable();
    dens.dedup();
    let product = dens.iter().try_fold(1i64, |acc, &q| acc.checked_mul(q));
    let product = match product {
        Some(p) if p <= 1 << 40 => p,
        _ => dens.iter().fold(1i64, |l, &q| l / gcd(l, q) * q),
    };
    let base = 2.0 * std::f64::consts::PI / lambda;
    let full = base * product as f64;

    let mut divisors: Vec<i64> = (1..=((product as f64).sqrt() as i64))
        .filter(|d| product % d == 0)
        .flat_map(|d| [d, product / d])
        .collect();
    divisors.sort_unstable_by(|x, y| y.cmp(x));
    divisors.dedup();
    let mut period = None;
    for d in divisors {
        let t = full / d as f64;
        if period_residual(a, t) <= PERIOD_CHECK_TOL {
            period = Some(t);
            break;
        }
    }
    let Some(period) = period else {
        let residual = period_residual(a, full);
        return Ok(PeriodicityReport::fail(
            ev,
            NonPeriodicReason::VerificationFailed { period: full, residual },
        ));
    };
    Ok(PeriodicityReport {
        periodic: true,
        period: Some(period),
        eigenvalues: ev,
        base_rate: Some(lambda),
        multipliers,
        reason: None,
    })
}

/// `λ·[[A11, A12], [A21, -A11]]` with `A11² + A12·A21 + 1 = 0`, so `A² = -λ²I`.
pub fn make_periodic_2d(lambda: f64, a11: f64, a12: f64) -> Result<Mat> {
    if a12 == 0.0 {
        return Err(Error::InvalidParameter("A12 must be nonzero".into()));
    }
    if !(lambda.is_finite() && a11.is_finite() && a12.is_finite()) {
        return Err(Error::NonFinite("periodic matrix parameters"));
    }
    let a21 = -(1.0 + a11 * a11) / a12;
    Ok(Mat::from_row_slice(2, 2, &[a11, a12, a21, -a11]) * lambda)
}

/// `λ` times two decoupled 2×2 rotation generators.
pub fn periodic_4d_blocks(lambda: f64) -> Mat {
    #[rustfmt::skip]
    let m = Mat::from_row_slice(4, 4, &[
         0.0, 1.0, 0.0, 0.0,
        -1.0, 0.0, 0.0, 0.0,
         0.0, 0.0, 0.0, 1.0,
         0.0, 0.0,-1.0, 0.0,
    ]);
    m * lambda
}

/// `λ·[[0, I], [-I, 0]]` on `R² ⊕ R²`.
pub fn periodic_4d_swap(lambda: f64) -> Mat {
    #[rustfmt::skip]
    let m = Mat::from_row_slice(4, 4, &[
         0.0, 0.0, 1.0, 0.0,
         0.0, 0.0, 0.0, 1.0,
        -1.0, 0.0, 0.0, 0.0,
         0.0,-1.0, 0.0, 0.0,
    ]);
    m * lambda
}

/// Per-point outcome of [`verify_solution_period`].
#[derive(Debug, Clone, PartialEq)]
pub enum PeriodPointOutcome {
    /// `‖u(t+T, x) - u(t, x)‖∞`.
    Compared { difference: f64 },
    /// The continuation from 0 to t or t + T failed (Γ crossed or Newton lost).
    BlowupOnPath { error: Error },
}

/// Outcome of [`verify_solution_period`].
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodVerification {
    pub tol: f64,
    pub points: Vec<PeriodPointOutcome>,
}

impl PeriodVerification {
    /// Every point was compared and agreed within tolerance.
    pub fn passed(&self) -> bool {
        self.points
            .iter()
            .all(|p| matches!(p, PeriodPointOutcome::Compared { difference } if *difference <= self.tol))
    }

    pub fn max_difference(&self) -> Option<f64> {
        self.points
            .iter()
            .filter_map(|p| match p {
                PeriodPointOutcome::Compared { difference } => Some(*difference),
                PeriodPointOutcome::BlowupOnPath { .. } => None,
            })
            .reduce(f64::max)
    }
}

/// Checks `u(t+T, x) = u(t, x)` at the sample points by time continuation
/// at fixed x, which also detects crossings of Γ.
pub fn verify_solution_period(
    problem: &HodographProblem,
    period: f64,
    samples: &[(f64, Vect)],
    tol: f64,
) -> Result<PeriodVerification> {
    if problem.spec().g().iter().any(|&v| v != 0.0) {
        return Err(Error::InvalidParameter("solution periodicity needs g = 0".into()));
    }
    if !(period.is_finite() && period > 0.0) {
        return Err(Error::InvalidParameter("period must be positive".into()));
    }
    use rayon::prelude::*;
    let points = samples
        .par_iter()
        .map(|(t, x)| {
            let res = sweep_u(problem, x, &[*t, *t + period]);
            match (&res[0], &res[1]) {
                (Ok(a), Ok(b)) => PeriodPointOutcome::Compared {
                    difference: (&a.sample.u - &b.sample.u).amax(),
                },
                (Err(e), _) | (_, Err(e)) => PeriodPointOutcome::BlowupOnPath { error: e.clone() },
            }
        })
        .collect();
    Ok(PeriodVerification { tol, points })
}

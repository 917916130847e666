//! The blow-up hypersurface Γ: `det(φ1(A,t) + ∂φ/∂M) = 0` in `(t, M)`.
//!
//! Each sheet is a branch `t = f_k(M)` sampled on an M-grid. Closed forms are
//! used where the structure of A allows them:
//!
//! - n = 1: `t = log(1 - A φ'(M)) / A`;
//! - `A = a·I`: roots τ of `det(τI + ∂φ/∂M)`, then `t = log(1 + aτ) / a`;
//! - `A = ω[[0,1],[-1,0]]`: `a sin ωt + b cos ωt + c = 0`;
//! - `A = diag(a1, a2)`: an exponential polynomial in t, a true polynomial
//!   when `a1/a2` is rational;
//!
//! and a sign scan in t otherwise.

use std::ops::RangeInclusive;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hodograph::{u_from_m_any, x_from_m};
use crate::matops::{self, Mat, Vect};
use crate::model::{HodographProblem, InitialData};
use crate::optimize;
use crate::periodicity::rational_approx;
use crate::poly;

fn free_block(data: &InitialData, a: &Mat) -> Mat {
    let idx = data.free_indices();
    Mat::from_fn(idx.len(), idx.len(), |r, c| a[(idx[r], idx[c])])
}

fn check_m(problem: &HodographProblem, m: &Vect) -> Result<()> {
    if m.len() != problem.dim() {
        return Err(Error::Dimension {
            expected: problem.dim(),
            got: m.len(),
        });
    }
    Ok(())
}

/// `det(φ1(A,t) + ∂φ/∂M)` over the free components of M.
pub fn blowup_residual(problem: &HodographProblem, t: f64, m: &Vect) -> Result<f64> {
    check_m(problem, m)?;
    let j = problem.data().phi_jacobian(m)?;
    let p1 = matops::phi1(problem.spec().a(), t)?;
    Ok(matops::det(&free_block(problem.data(), &(p1 + j))))
}

/// The u-space matrix `K = -φ1(A,-t) + (∂φ/∂M)·e^{-tA}`, whose inverse is `∂u/∂x`.
///
/// `K·e^{tA} = φ1(A,t) + ∂φ/∂M`, so `det K` vanishes exactly on Γ.
pub fn k_matrix(problem: &HodographProblem, t: f64, m: &Vect) -> Result<Mat> {
    check_m(problem, m)?;
    let j = problem.data().phi_jacobian(m)?;
    let back = matops::phi_functions(problem.spec().a(), -t)?;
    Ok(j * back.exp - back.phi1)
}

/// Time at which `φ1(a, t) = τ` for scalar a, or `None` when `aτ ≤ -1`.
pub fn time_from_tau(a: f64, tau: f64) -> Option<f64> {
    if a == 0.0 {
        return Some(tau);
    }
    let z = a * tau;
    if z <= -1.0 {
        None
    } else {
        Some(z.ln_1p() / a)
    }
}

/// Why a sheet has no value at a grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Absence {
    /// `1 + A·τ ≤ 0`: the logarithm has no real value (`a_tau` = A·τ).
    LogArgument { a_tau: f64 },
    /// The branch root is complex at this M.
    NoRealRoot,
    /// No root in the scanned time window.
    NoRootInWindow,
}

/// Sheet value at one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SheetValue {
    Time(f64),
    Absent(Absence),
}

impl SheetValue {
    pub fn time(&self) -> Option<f64> {
        match self {
            SheetValue::Time(t) => Some(*t),
            SheetValue::Absent(_) => None,
        }
    }
}

/// Root family of `a sin θ + b cos θ + c = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RootFamily {
    Plus,
    Minus,
}

/// Label of a sheet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SheetKind {
    /// The single branch in one dimension.
    OneD,
    /// `index`-th real root (ascending) of `det(τI + ∂φ/∂M)` for `A = a·I`.
    Diag { index: usize },
    /// Coriolis family and period index k (k = 0 covers `[0, 2π/|ω|)`).
    Coriolis { family: RootFamily, k: i64 },
    /// `index`-th real root (ascending in t) for `A = diag(a1, a2)`.
    Diag2 { index: usize },
    /// `index`-th positive root found by the time scan.
    Scan { index: usize },
}

/// How the `diag(a1, a2)` equation is solved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Diag2Method {
    /// Polynomial when `a1/a2` is rational with small degree, else bisection.
    Auto,
    /// Always bisection on t over `[0, t_max]`.
    Bisection,
}

/// The closed form or scan used to evaluate sheets.
#[derive(Debug, Clone, PartialEq)]
pub enum SheetEngine {
    OneD { a: f64 },
    Diag { a: f64 },
    Coriolis { omega: f64, k_range: (i64, i64) },
    Diag2 { a1: f64, a2: f64, method: Diag2Method, t_max: f64 },
    Scan { t_max: f64, dt: f64 },
}

/// Largest exponent-polynomial degree handed to the companion solver.
const MAX_POLY_DEGREE: usize = 6;
/// Scan step for bisection brackets.
pub const SCAN_DT: f64 = 1e-2;
/// Default scan horizon.
pub const T_MAX: f64 = 50.0;

impl SheetEngine {
    /// Picks the most specific engine for the problem's force matrix.
    pub fn for_problem(problem: &HodographProblem) -> Self {
        let spec = problem.spec();
        if spec.dim() == 1 {
            return SheetEngine::OneD { a: spec.a()[(0, 0)] };
        }
        if let Some(a) = spec.scalar_multiple_of_identity() {
            return SheetEngine::Diag { a };
        }
        if let Some(omega) = spec.coriolis_2d_rate() {
            return SheetEngine::Coriolis { omega, k_range: (0, 0) };
        }
        if spec.dim() == 2 {
            if let Some(d) = spec.diagonal_entries() {
                return SheetEngine::Diag2 {
                    a1: d[0],
                    a2: d[1],
                    method: Diag2Method::Auto,
                    t_max: T_MAX,
                };
            }
        }
        SheetEngine::Scan { t_max: 20.0, dt: SCAN_DT }
    }

    /// Values of every branch at M, labelled.
    pub fn evaluate(&self, problem: &HodographProblem, m: &Vect) -> Result<Vec<(SheetKind, SheetValue)>> {
        let data = problem.data();
        match self {
            SheetEngine::OneD { a } => {
                let dphi = data.phi_jacobian(m)?[(0, 0)];
                let v = match time_from_tau(*a, -dphi) {
                    Some(t) => SheetValue::Time(t),
                    None => SheetValue::Absent(Absence::LogArgument { a_tau: -a * dphi }),
                };
                Ok(vec![(SheetKind::OneD, v)])
            }
            SheetEngine::Diag { a } => {
                let j = free_block(data, &data.phi_jacobian(m)?);
                let n = j.nrows();
                let roots = poly::real_roots(&matops::char_poly(&(-&j)))?;
                Ok((0..n)
                    .map(|k| {
                        let v = match roots.get(k) {
                            None => SheetValue::Absent(Absence::NoRealRoot),
                            Some(&tau) => match time_from_tau(*a, tau) {
                                Some(t) => SheetValue::Time(t),
                                None => SheetValue::Absent(Absence::LogArgument { a_tau: a * tau }),
                            },
                        };
                        (SheetKind::Diag { index: k }, v)
                    })
                    .collect())
            }
            SheetEngine::Coriolis { omega, k_range } => {
                let abc = coriolis2d_abc(problem, m)?;
                let times = coriolis2d_times(&abc, *omega, k_range.0..=k_range.1)?;
                let mut out = Vec::new();
                for family in [RootFamily::Plus, RootFamily::Minus] {
                    for k in k_range.0..=k_range.1 {
                        let v = match &times {
                            CoriolisTimes::Absent => SheetValue::Absent(Absence::NoRealRoot),
                            CoriolisTimes::Times(ts) => ts
                                .iter()
                                .find(|c| c.family == family && c.k == k)
                                .map(|c| SheetValue::Time(c.t))
                                .unwrap_or(SheetValue::Absent(Absence::NoRealRoot)),
                        };
                        out.push((SheetKind::Coriolis { family, k }, v));
                    }
                }
                Ok(out)
            }
            SheetEngine::Diag2 { a1, a2, method, t_max } => {
                let j = data.phi_jacobian(m)?;
                let roots = diag2_roots(*a1, *a2, &j, *method, *t_max)?;
                Ok((0..roots.slots)
                    .map(|k| {
                        let v = match roots.times.get(k) {
                            Some(&t) => SheetValue::Time(t),
                            None => SheetValue::Absent(roots.absence),
                        };
                        (SheetKind::Diag2 { index: k }, v)
                    })
                    .collect())
            }
            SheetEngine::Scan { t_max, dt } => {
                let roots = scan_roots(problem, m, *t_max, *dt)?;
                let slots = free_block(data, &Mat::zeros(problem.dim(), problem.dim())).nrows().max(1);
                Ok((0..slots.max(roots.len()))
                    .map(|k| {
                        let v = roots
                            .get(k)
                            .map(|&t| SheetValue::Time(t))
                            .unwrap_or(SheetValue::Absent(Absence::NoRootInWindow));
                        (SheetKind::Scan { index: k }, v)
                    })
                    .collect())
            }
        }
    }

    /// Value of one branch at M.
    pub fn value(&self, problem: &HodographProblem, kind: SheetKind, m: &Vect) -> Option<f64> {
        if !problem.data().in_domain(m.as_slice()) {
            return None;
        }
        self.evaluate(problem, m)
            .ok()?
            .into_iter()
            .find(|(k, _)| *k == kind)
            .and_then(|(_, v)| v.time())
    }
}

/// Interior tensor grid on a box: `points` per dimension, endpoints excluded.
/// Dimensions with `lo = hi` contribute their single value.
#[derive(Debug, Clone, PartialEq)]
pub struct MGrid {
    pub lo: Vect,
    pub hi: Vect,
    pub points: usize,
}

impl MGrid {
    pub fn new(lo: Vect, hi: Vect, points: usize) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::Dimension {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if points == 0 || lo.iter().zip(hi.iter()).any(|(a, b)| !(a <= b) || !a.is_finite() || !b.is_finite()) {
            return Err(Error::InvalidParameter("grid needs finite lo <= hi and points >= 1".into()));
        }
        Ok(Self { lo, hi, points })
    }

    /// The problem's M-domain box at the problem's grid resolution.
    pub fn for_problem(problem: &HodographProblem) -> Self {
        let (lo, hi) = problem.data().m_box();
        Self {
            lo,
            hi,
            points: problem.grid(),
        }
    }

    /// Spacing per dimension (zero for collapsed dimensions).
    pub fn spacing(&self) -> Vect {
        (&self.hi - &self.lo) / (self.points as f64 + 1.0)
    }

    fn axis(&self, i: usize) -> Vec<f64> {
        if self.lo[i] == self.hi[i] {
            return vec![self.lo[i]];
        }
        let h = (self.hi[i] - self.lo[i]) / (self.points as f64 + 1.0);
        (1..=self.points).map(|k| self.lo[i] + h * k as f64).collect()
    }

    /// All grid points, last coordinate fastest.
    pub fn points(&self) -> Vec<Vect> {
        let n = self.lo.len();
        let axes: Vec<Vec<f64>> = (0..n).map(|i| self.axis(i)).collect();
        let mut out = vec![Vect::zeros(n)];
        for (i, ax) in axes.iter().enumerate() {
            let mut next = Vec::with_capacity(out.len() * ax.len());
            for p in &out {
                for &v in ax {
                    let mut q = p.clone();
                    q[i] = v;
                    next.push(q);
                }
            }
            out = next;
        }
        out
    }
}

/// Whether an extremum is a minimum or a maximum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtremumKind {
    Min,
    Max,
}

/// Extremum of a sheet over its window.
#[derive(Debug, Clone, PartialEq)]
pub struct SheetExtremum {
    pub kind: ExtremumKind,
    pub m: Vect,
    pub t: f64,
    /// The optimum sits at the edge of the sampled window, so the true
    /// extremum over the open domain may be an unattained infimum/supremum.
    pub on_boundary: bool,
}

/// One sampled grid point of a sheet.
#[derive(Debug, Clone, PartialEq)]
pub struct SheetSample {
    pub m: Vect,
    pub value: SheetValue,
}

/// A sampled branch `t = f_k(M)` of Γ.
#[derive(Debug, Clone, PartialEq)]
pub struct BlowupSheet {
    pub kind: SheetKind,
    pub engine: SheetEngine,
    pub samples: Vec<SheetSample>,
    pub min: Option<SheetExtremum>,
    pub max: Option<SheetExtremum>,
    pub window: (Vect, Vect),
}

impl BlowupSheet {
    /// Whether every sample is absent.
    pub fn is_absent(&self) -> bool {
        self.samples.iter().all(|s| s.value.time().is_none())
    }
}

fn refine_extremum(
    problem: &HodographProblem,
    engine: &SheetEngine,
    kind: SheetKind,
    grid: &MGrid,
    start: &Vect,
    which: ExtremumKind,
    positive_only: bool,
) -> SheetExtremum {
    let sign = match which {
        ExtremumKind::Min => 1.0,
        ExtremumKind::Max => -1.0,
    };
    // refinement stays inside the sampled hull; beyond it φ' is unbounded
    // near the domain edge and the sheet value is cancellation noise
    let h = grid.spacing();
    let (lo, hi) = (&grid.lo + &h * (1.0 - 1e-9), &grid.hi - &h * (1.0 - 1e-9));
    let (lo, hi) = (&lo, &hi);
    let objective = |m: &Vect| -> Option<f64> {
        if m.iter().zip(lo.iter().zip(hi.iter())).any(|(v, (a, b))| *v < *a || *v > *b) {
            return None;
        }
        let t = engine.value(problem, kind, m)?;
        if positive_only && t <= 0.0 {
            return None;
        }
        Some(sign * t)
    };
    let (m, f) = optimize::minimize(&objective, start, &h);
    let near_edge = (0..m.len()).any(|i| {
        h[i] > 0.0 && ((m[i] - lo[i]).abs() <= 0.5 * h[i] || (hi[i] - m[i]).abs() <= 0.5 * h[i])
    });
    SheetExtremum {
        kind: which,
        m,
        t: sign * f,
        on_boundary: near_edge,
    }
}

/// Samples every branch of `engine` over `grid`, with refined extrema.
pub fn sample_sheets(
    problem: &HodographProblem,
    engine: &SheetEngine,
    grid: &MGrid,
) -> Result<Vec<BlowupSheet>> {
    if grid.lo.len() != problem.dim() {
        return Err(Error::Dimension {
            expected: problem.dim(),
            got: grid.lo.len(),
        });
    }
    let data = problem.data();
    let points: Vec<Vect> = grid
        .points()
        .into_iter()
        .filter(|m| data.in_domain(m.as_slice()))
        .collect();
    let evaluated: Vec<Vec<(SheetKind, SheetValue)>> = points
        .par_iter()
        .map(|m| engine.evaluate(problem, m))
        .collect::<Result<_>>()?;

    let mut kinds: Vec<SheetKind> = evaluated.iter().flatten().map(|(k, _)| *k).collect();
    kinds.sort();
    kinds.dedup();

    let mut sheets = Vec::with_capacity(kinds.len());
    for kind in kinds {
        let samples: Vec<SheetSample> = points
            .iter()
            .zip(&evaluated)
            .map(|(m, vals)| SheetSample {
                m: m.clone(),
                value: vals
                    .iter()
                    .find(|(k, _)| *k == kind)
                    .map(|(_, v)| *v)
                    .unwrap_or(SheetValue::Absent(Absence::NoRealRoot)),
            })
            .collect();
        let best = |which: ExtremumKind| {
            samples
                .iter()
                .filter_map(|s| s.value.time().map(|t| (s, t)))
                .min_by(|(_, a), (_, b)| match which {
                    ExtremumKind::Min => a.partial_cmp(b).unwrap(),
                    ExtremumKind::Max => b.partial_cmp(a).unwrap(),
                })
                .map(|(s, _)| s.m.clone())
        };
        let min = best(ExtremumKind::Min)
            .map(|m| refine_extremum(problem, engine, kind, grid, &m, ExtremumKind::Min, false));
        let max = best(ExtremumKind::Max)
            .map(|m| refine_extremum(problem, engine, kind, grid, &m, ExtremumKind::Max, false));
        sheets.push(BlowupSheet {
            kind,
            engine: engine.clone(),
            samples,
            min,
            max,
            window: (grid.lo.clone(), grid.hi.clone()),
        });
    }
    Ok(sheets)
}

/// Sheets with the engine chosen from the structure of A, on the default grid.
pub fn auto_sheets(problem: &HodographProblem) -> Result<Vec<BlowupSheet>> {
    sample_sheets(problem, &SheetEngine::for_problem(problem), &MGrid::for_problem(problem))
}

/// The one-dimensional blow-up curve `t = log(1 - Aφ'(M)) / A`.
pub fn sheet_1d(problem: &HodographProblem, grid: &MGrid) -> Result<BlowupSheet> {
    if problem.dim() != 1 {
        return Err(Error::Unsupported("sheet_1d needs a scalar problem".into()));
    }
    let a = problem.spec().a()[(0, 0)];
    let mut sheets = sample_sheets(problem, &SheetEngine::OneD { a }, grid)?;
    Ok(sheets.remove(0))
}

/// Sheets for `A = a·I` from the real roots of `det(τI + ∂φ/∂M)`.
pub fn sheets_diag(problem: &HodographProblem, grid: &MGrid) -> Result<Vec<BlowupSheet>> {
    let a = problem
        .spec()
        .scalar_multiple_of_identity()
        .ok_or_else(|| Error::Unsupported("sheets_diag needs A = a·I".into()))?;
    sample_sheets(problem, &SheetEngine::Diag { a }, grid)
}

/// Sheets for `A = diag(a1, a2)`.
pub fn sheets_diag2(problem: &HodographProblem, grid: &MGrid, method: Diag2Method) -> Result<Vec<BlowupSheet>> {
    let d = problem
        .spec()
        .diagonal_entries()
        .filter(|d| d.len() == 2)
        .ok_or_else(|| Error::Unsupported("sheets_diag2 needs a diagonal 2×2 A".into()))?;
    if d[0] == d[1] && method == Diag2Method::Auto {
        return sheets_diag(problem, grid);
    }
    sample_sheets(
        problem,
        &SheetEngine::Diag2 {
            a1: d[0],
            a2: d[1],
            method,
            t_max: T_MAX,
        },
        grid,
    )
}

/// Sheets for the two-dimensional Coriolis matrix over the given periods.
pub fn sheets_coriolis2d(problem: &HodographProblem, grid: &MGrid, k_range: RangeInclusive<i64>) -> Result<Vec<BlowupSheet>> {
    let omega = problem
        .spec()
        .coriolis_2d_rate()
        .ok_or_else(|| Error::Unsupported("sheets_coriolis2d needs A = ω[[0,1],[-1,0]]".into()))?;
    sample_sheets(
        problem,
        &SheetEngine::Coriolis {
            omega,
            k_range: (*k_range.start(), *k_range.end()),
        },
        grid,
    )
}

/// Coefficients of `a sin ωt + b cos ωt + c = 0`, which equals
/// `ω² det(φ1(A,t) + ∂φ/∂M)` for `A = ω[[0,1],[-1,0]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoriolisABC {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// `a = ω(φ1,1 + φ2,2)`, `b = ω(φ2,1 - φ1,2) - 2`, `c = -b + ω² det ∂φ/∂M`.
pub fn coriolis2d_abc(problem: &HodographProblem, m: &Vect) -> Result<CoriolisABC> {
    let omega = problem
        .spec()
        .coriolis_2d_rate()
        .ok_or_else(|| Error::Unsupported("coriolis2d_abc needs A = ω[[0,1],[-1,0]]".into()))?;
    let j = problem.data().phi_jacobian(m)?;
    let a = omega * (j[(0, 0)] + j[(1, 1)]);
    let b = omega * (j[(1, 0)] - j[(0, 1)]) - 2.0;
    let c = -b + omega * omega * (j[(0, 0)] * j[(1, 1)] - j[(0, 1)] * j[(1, 0)]);
    Ok(CoriolisABC { a, b, c })
}

/// One root of the Coriolis blow-up equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoriolisTime {
    pub family: RootFamily,
    pub k: i64,
    pub t: f64,
}

/// Roots of `a sin ωt + b cos ωt + c = 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum CoriolisTimes {
    /// `a² + b² ≤ c²`.
    Absent,
    Times(Vec<CoriolisTime>),
}

/// Solves `a sin θ + b cos θ + c = 0` with `θ = ωt`.
///
/// The sines of the two roots are `(-ac ± |b|√(a²+b²-c²))/(a²+b²)`. For each,
/// the angles `arcsin s` and `π - arcsin s` are tested and the one with the
/// smaller residual kept. Family k = 0 lies in `[0, 2π/|ω|)`; each k adds
/// `2πk/|ω|`.
pub fn coriolis2d_times(abc: &CoriolisABC, omega: f64, k_range: RangeInclusive<i64>) -> Result<CoriolisTimes> {
    let CoriolisABC { a, b, c } = *abc;
    let r2 = a * a + b * b;
    if r2 == 0.0 {
        return Err(Error::InvalidParameter("a = b = 0: the Coriolis blow-up equation is degenerate".into()));
    }
    if !(omega.is_finite() && omega != 0.0) {
        return Err(Error::InvalidParameter("omega must be finite and nonzero".into()));
    }
    let disc = r2 - c * c;
    if disc <= 0.0 {
        return Ok(CoriolisTimes::Absent);
    }
    let root = b.abs() * disc.sqrt();
    let resid = |th: f64| a * th.sin() + b * th.cos() + c;
    let scale = a.abs() + b.abs() + c.abs();
    let two_pi = 2.0 * std::f64::consts::PI;
    let period = two_pi / omega.abs();

    let mut theta = [0.0_f64; 2];
    for (slot, pm) in [1.0, -1.0].into_iter().enumerate() {
        let s = ((-a * c + pm * root) / r2).clamp(-1.0, 1.0);
        let t1 = s.asin();
        let t2 = std::f64::consts::PI - t1;
        theta[slot] = if resid(t1).abs() <= resid(t2).abs() { t1 } else { t2 };
    }
    if b == 0.0 {
        // both sines coincide; the two roots are arcsin s and π - arcsin s
        let s = (-c / a).clamp(-1.0, 1.0);
        theta = [s.asin(), std::f64::consts::PI - s.asin()];
    }

    let mut out = Vec::new();
    for (slot, family) in [RootFamily::Plus, RootFamily::Minus].into_iter().enumerate() {
        // polish with Newton on the angle
        let mut th = theta[slot];
        for _ in 0..3 {
            let d = a * th.cos() - b * th.sin();
            if d == 0.0 {
                break;
            }
            th -= resid(th) / d;
        }
        if resid(th).abs() > 1e-10 * scale.max(1.0) {
            return Err(Error::NoConvergence {
                iterations: 3,
                residual: resid(th).abs(),
            });
        }
        let th0 = if omega > 0.0 { th.rem_euclid(two_pi) } else { -(-th).rem_euclid(two_pi) };
        for k in k_range.clone() {
            out.push(CoriolisTime {
                family,
                k,
                t: th0 / omega + period * k as f64,
            });
        }
    }
    Ok(CoriolisTimes::Times(out))
}

struct Diag2Roots {
    times: Vec<f64>,
    slots: usize,
    absence: Absence,
}

/// Real blow-up times for `A = diag(a1, a2)`.
///
/// With nonzero entries, `a1 a2 det(φ1 + J)` equals
/// `e^{(a1+a2)t} + K1 e^{a1 t} + K2 e^{a2 t} + K3` where
/// `K1 = a2 J22 - 1`, `K2 = a1 J11 - 1`, `K3 = 1 - a1 J11 - a2 J22 + a1 a2 det J`.
/// For `a1/a2 = p/q` this is a polynomial in `τ = e^{t a2/q}`.
fn diag2_roots(a1: f64, a2: f64, j: &Mat, method: Diag2Method, t_max: f64) -> Result<Diag2Roots> {
    let det_j = j[(0, 0)] * j[(1, 1)] - j[(0, 1)] * j[(1, 0)];
    let direct = |t: f64| {
        let p1 = if a1 == 0.0 { t } else { (a1 * t).exp_m1() / a1 };
        let p2 = if a2 == 0.0 { t } else { (a2 * t).exp_m1() / a2 };
        (p1 + j[(0, 0)]) * (p2 + j[(1, 1)]) - j[(0, 1)] * j[(1, 0)]
    };
    if method == Diag2Method::Auto && a1 != 0.0 && a2 != 0.0 {
        if let Some((p, q)) = rational_approx(a1 / a2, 12, 1e-12) {
            let k1 = a2 * j[(1, 1)] - 1.0;
            let k2 = a1 * j[(0, 0)] - 1.0;
            let k3 = 1.0 - a1 * j[(0, 0)] - a2 * j[(1, 1)] + a1 * a2 * det_j;
            let exps = [p + q, p, q, 0];
            let coefs = [1.0, k1, k2, k3];
            let shift = -exps.iter().cloned().min().unwrap().min(0);
            let degree = (exps.iter().cloned().max().unwrap() + shift) as usize;
            if degree <= MAX_POLY_DEGREE {
                let mut poly_c = vec![0.0; degree + 1];
                for (e, c) in exps.iter().zip(coefs) {
                    poly_c[(e + shift) as usize] += c;
                }
                let taus = poly::real_roots(&poly_c)?;
                let mut times: Vec<f64> = taus
                    .into_iter()
                    .filter(|&tau| tau > 0.0)
                    .map(|tau| q as f64 / a2 * tau.ln())
                    .collect();
                times.sort_by(|a, b| a.partial_cmp(b).unwrap());
                return Ok(Diag2Roots {
                    times,
                    slots: degree,
                    absence: Absence::NoRealRoot,
                });
            }
        }
    }
    let times = bisection_roots(&direct, t_max, SCAN_DT);
    Ok(Diag2Roots {
        times,
        slots: 2,
        absence: Absence::NoRootInWindow,
    })
}

/// Roots of `f` on `(0, t_max]`, bracketed by a sign scan with step `dt` and
/// refined by bisection.
pub(crate) fn bisection_roots(f: &dyn Fn(f64) -> f64, t_max: f64, dt: f64) -> Vec<f64> {
    let steps = (t_max / dt).ceil() as usize;
    let mut out = Vec::new();
    let mut t0 = 0.0;
    let mut f0 = f(t0);
    for k in 1..=steps {
        let t1 = (k as f64 * dt).min(t_max);
        let f1 = f(t1);
        if f1 == 0.0 {
            out.push(t1);
        } else if f0 != 0.0 && f0.signum() != f1.signum() && f0.is_finite() && f1.is_finite() {
            out.push(bisect(f, t0, t1, f0));
        }
        t0 = t1;
        f0 = f1;
    }
    out
}

pub(crate) fn bisect(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Positive roots in t of `blowup_residual(t, M)` on `(0, t_max]`.
fn scan_roots(problem: &HodographProblem, m: &Vect, t_max: f64, dt: f64) -> Result<Vec<f64>> {
    let j = problem.data().phi_jacobian(m)?;
    let data = problem.data();
    let a = problem.spec().a().clone();
    let f = |t: f64| match matops::phi1(&a, t) {
        Ok(p) => matops::det(&free_block(data, &(p + &j))),
        Err(_) => f64::NAN,
    };
    Ok(bisection_roots(&f, t_max, dt))
}

/// The first gradient catastrophe.
#[derive(Debug, Clone, PartialEq)]
pub struct BlowupPoint {
    pub t: f64,
    pub m: Vect,
    pub x: Vect,
    pub u: Vect,
    pub sheet: SheetKind,
}

/// Outcome of a minimal-time search.
#[derive(Debug, Clone, PartialEq)]
pub enum MinBlowup {
    Found(BlowupPoint),
    /// No sheet has a positive time anywhere on the grid.
    NoBlowup,
}

/// Smallest positive blow-up time over all sheets, refined from the best grid
/// samples; x* comes from the hodograph equation and u* from `u_from_m`.
pub fn min_blowup_time(problem: &HodographProblem, sheets: &[BlowupSheet]) -> Result<MinBlowup> {
    let mut best: Option<(f64, Vect, SheetKind)> = None;
    for sheet in sheets {
        let (lo, hi) = &sheet.window;
        let mut candidates: Vec<(f64, &Vect)> = sheet
            .samples
            .iter()
            .filter_map(|s| s.value.time().filter(|&t| t > 0.0).map(|t| (t, &s.m)))
            .collect();
        if candidates.is_empty() {
            continue;
        }
        candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let n_pts = sheet.samples.len().max(1);
        let dim_free = (0..lo.len()).filter(|&i| hi[i] > lo[i]).count().max(1);
        let per_dim = (n_pts as f64).powf(1.0 / dim_free as f64).round().max(1.0) as usize;
        let grid = MGrid {
            lo: lo.clone(),
            hi: hi.clone(),
            points: per_dim,
        };
        // a few distinct starts guard against a wrong basin
        let mut starts: Vec<&Vect> = Vec::new();
        let h = grid.spacing();
        for (_, m) in &candidates {
            if starts.len() >= 3 {
                break;
            }
            let far = starts.iter().all(|s| {
                (0..m.len()).any(|i| h[i] > 0.0 && (m[i] - s[i]).abs() > 3.0 * h[i])
            });
            if far {
                starts.push(m);
            }
        }
        for start in starts {
            let ext = refine_extremum(problem, &sheet.engine, sheet.kind, &grid, start, ExtremumKind::Min, true);
            if ext.t.is_finite() && ext.t > 0.0 && best.as_ref().is_none_or(|(bt, _, _)| ext.t < *bt) {
                best = Some((ext.t, ext.m, sheet.kind));
            }
        }
    }
    let Some((t, m, sheet)) = best else {
        return Ok(MinBlowup::NoBlowup);
    };
    let x = x_from_m(problem, t, &m)?;
    let u = u_from_m_any(problem.spec(), t, &m)?;
    Ok(MinBlowup::Found(BlowupPoint { t, m, x, u, sheet }))
}

/// Result of a blow-up-absence test.
#[derive(Debug, Clone, PartialEq)]
pub enum Certificate {
    /// The reality condition is violated everywhere on the domain; `margin` is
    /// the extreme value of the tested quantity and `at` where it occurs.
    Certified { margin: f64, at: Vect },
    /// The condition holds at `worst`, where the tested quantity is `value`.
    NotCertified { worst: Vect, value: f64 },
}

impl Certificate {
    pub fn is_certified(&self) -> bool {
        matches!(self, Certificate::Certified { .. })
    }
}

/// Certifies absence of blow-up in one dimension: no real t solves
/// `φ1(A,t) + φ'(M) = 0` iff `A·φ'(M) > 1` on the whole M-domain.
///
/// The minimum of `A·φ'` is taken over a dense grid, refined by golden
/// section, with extra probes approaching both domain ends.
pub fn certify_no_blowup_1d(problem: &HodographProblem) -> Result<Certificate> {
    if problem.dim() != 1 {
        return Err(Error::Unsupported("certify_no_blowup_1d needs a scalar problem".into()));
    }
    let a = problem.spec().a()[(0, 0)];
    let data = problem.data();
    let (lo, hi) = data.m_box();
    let (lo, hi) = (lo[0], hi[0]);
    let g = |m: f64| -> f64 {
        data.phi_jacobian(&Vect::from_element(1, m))
            .map(|j| a * j[(0, 0)])
            .unwrap_or(f64::INFINITY)
    };
    let n = problem.grid().max(1001);
    let h = (hi - lo) / (n as f64 + 1.0);
    let mut pts: Vec<f64> = (1..=n).map(|k| lo + h * k as f64).collect();
    for e in 3..=12 {
        let d = (hi - lo) * 10f64.powi(-e);
        pts.push(lo + d);
        pts.push(hi - d);
    }
    let (mut m_best, mut v_best) = pts
        .iter()
        .map(|&m| (m, g(m)))
        .min_by(|x, y| x.1.partial_cmp(&y.1).unwrap())
        .expect("non-empty grid");
    let (ref_lo, ref_hi) = ((m_best - h).max(lo + 1e-14 * (hi - lo)), (m_best + h).min(hi - 1e-14 * (hi - lo)));
    let (m_ref, v_ref) = optimize::golden(&g, ref_lo, ref_hi, 1e-13 * (hi - lo));
    if v_ref < v_best {
        m_best = m_ref;
        v_best = v_ref;
    }
    let at = Vect::from_element(1, m_best);
    Ok(if v_best > 1.0 {
        Certificate::Certified { margin: v_best, at }
    } else {
        Certificate::NotCertified { worst: at, value: v_best }
    })
}

/// Certifies that branch `index` of `det(τI + ∂φ/∂M) = 0` (`A = a·I`) has no
/// real time anywhere on the domain: `a·τ_index(M) ≤ -1` for all M.
/// Points where that root is complex count as absent.
pub fn certify_branch_absent_diag(problem: &HodographProblem, index: usize) -> Result<Certificate> {
    let a = problem
        .spec()
        .scalar_multiple_of_identity()
        .ok_or_else(|| Error::Unsupported("certify_branch_absent_diag needs A = a·I".into()))?;
    let data = problem.data();
    let a_tau = |m: &Vect| -> Option<f64> {
        if !data.in_domain(m.as_slice()) {
            return None;
        }
        let j = free_block(data, &data.phi_jacobian(m).ok()?);
        let roots = poly::real_roots(&matops::char_poly(&(-&j))).ok()?;
        roots.get(index).map(|tau| a * tau)
    };
    let grid = MGrid::for_problem(problem);
    let mut worst: Option<(Vect, f64)> = None;
    for m in grid.points() {
        if let Some(v) = a_tau(&m) {
            if worst.as_ref().is_none_or(|(_, w)| v > *w) {
                worst = Some((m, v));
            }
        }
    }
    let Some((m0, _)) = worst else {
        return Ok(Certificate::Certified {
            margin: f64::NEG_INFINITY,
            at: Vect::zeros(problem.dim()),
        });
    };
    let neg = |m: &Vect| a_tau(m).map(|v| -v);
    let (m, f) = optimize::minimize(&neg, &m0, &grid.spacing());
    let v = -f;
    Ok(if v < -1.0 {
        Certificate::Certified { margin: v, at: m }
    } else {
        Certificate::NotCertified { worst: m, value: v }
    })
}

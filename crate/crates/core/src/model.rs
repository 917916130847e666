//! Force specification, registered initial-data families and the problem
//! object that solves and blow-up scans operate on.

use crate::error::{Error, Result};
use crate::matops::{self, Mat, Vect, RANK_TOL};

/// Which pipeline a force matrix is routed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pipeline {
    /// `rank(A) = n`, or `A = 0`.
    Generic,
    /// `0 < rank(A) < n`.
    Degenerate,
}

/// The force `F/ρ = g + A·u`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceSpec {
    a: Mat,
    g: Vect,
    rank: usize,
}

impl ForceSpec {
    pub fn new(a: Mat, g: Vect) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Dimension {
                expected: a.nrows(),
                got: a.ncols(),
            });
        }
        if a.nrows() == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        if g.len() != a.nrows() {
            return Err(Error::Dimension {
                expected: a.nrows(),
                got: g.len(),
            });
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("force matrix"));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("force vector g"));
        }
        let rank = matops::rank(&a, RANK_TOL);
        Ok(Self { a, g, rank })
    }

    /// Scalar force `g + a·u` in one dimension.
    pub fn scalar(a: f64, g: f64) -> Result<Self> {
        Self::new(Mat::from_element(1, 1, a), Vect::from_element(1, g))
    }

    /// `A = diag(entries)`.
    pub fn diagonal(entries: &[f64], g: Vect) -> Result<Self> {
        Self::new(Mat::from_diagonal(&Vect::from_column_slice(entries)), g)
    }

    /// `A = ω·[[0,1],[-1,0]]`, the two-dimensional Coriolis generator.
    pub fn coriolis_2d(omega: f64, g: Vect) -> Result<Self> {
        Self::new(coriolis_2d_matrix(omega), g)
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }

    pub fn g(&self) -> &Vect {
        &self.g
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// `rank(A) < n`.
    pub fn is_degenerate(&self) -> bool {
        self.rank < self.dim()
    }

    pub fn pipeline(&self) -> Pipeline {
        if self.rank == self.dim() || self.rank == 0 {
            Pipeline::Generic
        } else {
            Pipeline::Degenerate
        }
    }

    /// `Λ = g + A·u`.
    pub fn force(&self, u: &Vect) -> Vect {
        &self.g + &self.a * u
    }

    /// `A = a·I` for some scalar a (including n = 1).
    pub fn scalar_multiple_of_identity(&self) -> Option<f64> {
        let n = self.dim();
        let a0 = self.a[(0, 0)];
        let scale = matops::max_abs(&self.a).max(f64::MIN_POSITIVE);
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { a0 } else { 0.0 };
                if (self.a[(i, j)] - want).abs() > 1e-14 * scale {
                    return None;
                }
            }
        }
        Some(a0)
    }

    /// Diagonal entries when A is diagonal.
    pub fn diagonal_entries(&self) -> Option<Vec<f64>> {
        let n = self.dim();
        let scale = matops::max_abs(&self.a).max(f64::MIN_POSITIVE);
        for i in 0..n {
            for j in 0..n {
                if i != j && self.a[(i, j)].abs() > 1e-14 * scale {
                    return None;
                }
            }
        }
        Some((0..n).map(|i| self.a[(i, i)]).collect())
    }

    /// ω when `A = ω·[[0,1],[-1,0]]` with ω ≠ 0.
    pub fn coriolis_2d_rate(&self) -> Option<f64> {
        if self.dim() != 2 {
            return None;
        }
        let w = self.a[(0, 1)];
        let tol = 1e-14 * w.abs();
        if w != 0.0
            && self.a[(0, 0)].abs() <= tol
            && self.a[(1, 1)].abs() <= tol
            && (self.a[(1, 0)] + w).abs() <= tol
        {
            Some(w)
        } else {
            None
        }
    }
}

/// `ω·[[0,1],[-1,0]]`.
pub fn coriolis_2d_matrix(omega: f64) -> Mat {
    Mat::from_row_slice(2, 2, &[0.0, omega, -omega, 0.0])
}

/// Sign choice for multi-branch inverses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    pub fn from_sign(s: f64) -> Result<Self> {
        if s == 1.0 {
            Ok(Branch::Plus)
        } else if s == -1.0 {
            Ok(Branch::Minus)
        } else {
            Err(Error::InvalidParameter(format!("branch sign must be +1 or -1, got {s}")))
        }
    }
}

/// Registered initial-velocity families.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// `u⁰ = μ(1 - tanh κx)`.
    Tanh1D { mu: f64, kappa: f64 },
    /// `u⁰ = η exp(-κ²x²)` restricted to `sign(x) = ε`.
    Gauss1D { eta: f64, kappa: f64, branch: Branch },
    /// `u⁰ = (-tanh(x₁+εx₂), -tanh(εx₁+x₂))`, `ε² ≠ 1`.
    Tanh2D { epsilon: f64 },
    /// `u⁰ = α(exp(-(x²+y²)), exp(-(x²+2y²)))` on the quadrant `(sign x, sign y) = branch`.
    Gauss2DCoriolis { amplitude: f64, branch: [Branch; 2] },
    /// `u⁰ = R⁻¹x`, so `φ(M) = R·M`.
    LinearR { r: Mat },
    /// `u⁰ ≡ c`; these components carry no inverse map and stay frozen in M.
    Constant { c: Vect },
    /// Direct sum of families acting on consecutive coordinate blocks.
    Blocks(Vec<InitialData>),
}

/// An initial-data family together with its inverse map φ = (u⁰)⁻¹ and the
/// analytic Jacobian ∂φ/∂M.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    family: Family,
    dim: usize,
    r_inv: Option<Mat>,
}

fn positive_finite(v: f64, name: &str) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
    }
}

fn out_of_domain(family: &str, m: &[f64]) -> Error {
    Error::Domain(format!("M = {m:?} outside the {family} M-domain"))
}

fn sech2(s: f64) -> f64 {
    let c = s.cosh();
    if c.is_finite() {
        1.0 / (c * c)
    } else {
        0.0
    }
}

impl InitialData {
    pub fn tanh_1d(mu: f64, kappa: f64) -> Result<Self> {
        if !(mu.is_finite() && mu != 0.0) {
            return Err(Error::InvalidParameter(format!("mu must be finite and nonzero, got {mu}")));
        }
        if !(kappa.is_finite() && kappa != 0.0) {
            return Err(Error::InvalidParameter(format!(
                "kappa must be finite and nonzero, got {kappa}"
            )));
        }
        Ok(Self::leaf(Family::Tanh1D { mu, kappa }, 1))
    }

    pub fn gauss_1d(eta: f64, kappa: f64, branch: Branch) -> Result<Self> {
        positive_finite(eta, "eta")?;
        positive_finite(kappa, "kappa")?;
        Ok(Self::leaf(Family::Gauss1D { eta, kappa, branch }, 1))
    }

    pub fn tanh_2d(epsilon: f64) -> Result<Self> {
        if !epsilon.is_finite() || (epsilon * epsilon - 1.0).abs() < 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be finite with epsilon^2 != 1, got {epsilon}"
            )));
        }
        Ok(Self::leaf(Family::Tanh2D { epsilon }, 2))
    }

    pub fn gauss_2d_coriolis(amplitude: f64, branch: [Branch; 2]) -> Result<Self> {
        positive_finite(amplitude, "amplitude")?;
        Ok(Self::leaf(Family::Gauss2DCoriolis { amplitude, branch }, 2))
    }

    pub fn linear(r: Mat) -> Result<Self> {
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("R matrix"));
        }
        let r_inv = matops::inverse(&r)
            .map_err(|_| Error::InvalidParameter("R must be invertible".into()))?;
        let n = r.nrows();
        Ok(Self {
            family: Family::LinearR { r },
            dim: n,
            r_inv: Some(r_inv),
        })
    }

    pub fn constant(c: Vect) -> Result<Self> {
        if c.is_empty() {
            return Err(Error::InvalidParameter("constant data needs dimension >= 1".into()));
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("constant velocity"));
        }
        let n = c.len();
        Ok(Self::leaf(Family::Constant { c }, n))
    }

    pub fn blocks(parts: Vec<InitialData>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidParameter("blocks need at least one part".into()));
        }
        let n = parts.iter().map(|p| p.dim).sum();
        Ok(Self::leaf(Family::Blocks(parts), n))
    }

    fn leaf(family: Family, dim: usize) -> Self {
        Self {
            family,
            dim,
            r_inv: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() == self.dim {
            Ok(())
        } else {
            Err(Error::Dimension {
                expected: self.dim,
                got: v.len(),
            })
        }
    }

    /// `true` for components with an inverse map, `false` for constant ones.
    pub fn free_mask(&self) -> Vec<bool> {
        match &self.family {
            Family::Constant { .. } => vec![false; self.dim],
            Family::Blocks(parts) => parts.iter().flat_map(|p| p.free_mask()).collect(),
            _ => vec![true; self.dim],
        }
    }

    /// Indices of invertible components.
    pub fn free_indices(&self) -> Vec<usize> {
        self.free_mask()
            .iter()
            .enumerate()
            .filter_map(|(i, &f)| f.then_some(i))
            .collect()
    }

    /// Values of the frozen components (zero at free indices).
    pub fn fixed_values(&self) -> Vect {
        match &self.family {
            Family::Constant { c } => c.clone(),
            Family::Blocks(parts) => {
                Vect::from_iterator(self.dim, parts.iter().flat_map(|p| p.fixed_values().data.as_vec().clone()))
            }
            _ => Vect::zeros(self.dim),
        }
    }

    /// The initial velocity `u⁰(x)`.
    pub fn u0_eval(&self, x: &Vect) -> Result<Vect> {
        self.check_len(x.as_slice())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("position"));
        }
        match &self.family {
            Family::Tanh1D { mu, kappa } => Ok(Vect::from_element(1, mu * (1.0 - (kappa * x[0]).tanh()))),
            Family::Gauss1D { eta, kappa, branch } => {
                if x[0] * branch.sign() < 0.0 {
                    return Err(Error::Domain(format!(
                        "x = {} is not on the {:?} branch of the Gaussian data",
                        x[0], branch
                    )));
                }
                Ok(Vect::from_element(1, eta * (-(kappa * x[0]).powi(2)).exp()))
            }
            Family::Tanh2D { epsilon } => Ok(Vect::from_vec(vec![
                -(x[0] + epsilon * x[1]).tanh(),
                -(epsilon * x[0] + x[1]).tanh(),
            ])),
            Family::Gauss2DCoriolis { amplitude, branch } => {
                if x[0] * branch[0].sign() < 0.0 || x[1] * branch[1].sign() < 0.0 {
                    return Err(Error::Domain(format!(
                        "x = ({}, {}) is not in the {:?} quadrant of the Gaussian data",
                        x[0], x[1], branch
                    )));
                }
                let (x1, x2) = (x[0] * x[0], x[1] * x[1]);
                Ok(Vect::from_vec(vec![
                    amplitude * (-(x1 + x2)).exp(),
                    amplitude * (-(x1 + 2.0 * x2)).exp(),
                ]))
            }
            Family::LinearR { .. } => Ok(self.r_inv.as_ref().expect("linear data stores R^-1") * x),
            Family::Constant { c } => Ok(c.clone()),
            Family::Blocks(parts) => {
                let mut out = Vect::zeros(self.dim);
                let mut off = 0;
                for p in parts {
                    let sub = Vect::from_column_slice(&x.as_slice()[off..off + p.dim]);
                    out.rows_mut(off, p.dim).copy_from(&p.u0_eval(&sub)?);
                    off += p.dim;
                }
                Ok(out)
            }
        }
    }

    /// Analytic Jacobian `∂u⁰/∂x`.
    pub fn u0_jacobian(&self, x: &Vect) -> Result<Mat> {
        self.check_len(x.as_slice())?;
        match &self.family {
            Family::Tanh1D { mu, kappa } => Ok(Mat::from_element(1, 1, -mu * kappa * sech2(kappa * x[0]))),
            Family::Gauss1D { kappa, .. } => {
                let u = self.u0_eval(x)?[0];
                Ok(Mat::from_element(1, 1, -2.0 * kappa * kappa * x[0] * u))
            }
            Family::Tanh2D { epsilon } => {
                let s1 = sech2(x[0] + epsilon * x[1]);
                let s2 = sech2(epsilon * x[0] + x[1]);
                Ok(Mat::from_row_slice(2, 2, &[-s1, -epsilon * s1, -epsilon * s2, -s2]))
            }
            Family::Gauss2DCoriolis { .. } => {
                let u = self.u0_eval(x)?;
                Ok(Mat::from_row_slice(
                    2,
                    2,
                    &[
                        -2.0 * x[0] * u[0],
                        -2.0 * x[1] * u[0],
                        -2.0 * x[0] * u[1],
                        -4.0 * x[1] * u[1],
                    ],
                ))
            }
            Family::LinearR { .. } => Ok(self.r_inv.clone().expect("linear data stores R^-1")),
            Family::Constant { c } => Ok(Mat::zeros(c.len(), c.len())),
            Family::Blocks(parts) => {
                let mut out = Mat::zeros(self.dim, self.dim);
                let mut off = 0;
                for p in parts {
                    let sub = Vect::from_column_slice(&x.as_slice()[off..off + p.dim]);
                    out.view_mut((off, off), (p.dim, p.dim)).copy_from(&p.u0_jacobian(&sub)?);
                    off += p.dim;
                }
                Ok(out)
            }
        }
    }

    /// Whether M lies strictly inside the M-domain (frozen components ignored).
    pub fn in_domain(&self, m: &[f64]) -> bool {
        if m.len() != self.dim || m.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match &self.family {
            Family::Tanh1D { mu, .. } => {
                let z = 1.0 - m[0] / mu;
                z.abs() < 1.0
            }
            Family::Gauss1D { eta, .. } => m[0] > 0.0 && m[0] < *eta,
            Family::Tanh2D { .. } => m[0].abs() < 1.0 && m[1].abs() < 1.0,
            Family::Gauss2DCoriolis { amplitude, .. } => {
                let (m1, m2) = (m[0], m[1]);
                m1 > 0.0 && m2 > 0.0 && m1 < *amplitude && m2 < m1 && m1 * m1 < amplitude * m2
            }
            Family::LinearR { .. } | Family::Constant { .. } => true,
            Family::Blocks(parts) => {
                let mut off = 0;
                parts.iter().all(|p| {
                    let ok = p.in_domain(&m[off..off + p.dim]);
                    off += p.dim;
                    ok
                })
            }
        }
    }

    /// Bounding box of the M-domain, used as the window for sheet scans.
    /// Unbounded families report `[-1, 1]` per component; frozen components
    /// report the degenerate interval `[c, c]`.
    pub fn m_box(&self) -> (Vect, Vect) {
        let n = self.dim;
        match &self.family {
            Family::Tanh1D { mu, .. } => {
                let (a, b) = if *mu > 0.0 { (0.0, 2.0 * mu) } else { (2.0 * mu, 0.0) };
                (Vect::from_element(1, a), Vect::from_element(1, b))
            }
            Family::Gauss1D { eta, .. } => (Vect::from_element(1, 0.0), Vect::from_element(1, *eta)),
            Family::Tanh2D { .. } => (Vect::from_element(2, -1.0), Vect::from_element(2, 1.0)),
            Family::Gauss2DCoriolis { amplitude, .. } => {
                (Vect::from_element(2, 0.0), Vect::from_element(2, *amplitude))
            }
            Family::LinearR { .. } => (Vect::from_element(n, -1.0), Vect::from_element(n, 1.0)),
            Family::Constant { c } => (c.clone(), c.clone()),
            Family::Blocks(parts) => {
                let mut lo = Vect::zeros(n);
                let mut hi = Vect::zeros(n);
                let mut off = 0;
                for p in parts {
                    let (l, h) = p.m_box();
                    lo.rows_mut(off, p.dim).copy_from(&l);
                    hi.rows_mut(off, p.dim).copy_from(&h);
                    off += p.dim;
                }
                (lo, hi)
            }
        }
    }

    /// Projects M into the open M-domain; frozen components are set to their constants.
    pub fn clip_to_domain(&self, m: &Vect) -> Vect {
        let margin = 1e-9;
        let mut out = m.clone();
        match &self.family {
            Family::Tanh1D { .. } | Family::Gauss1D { .. } | Family::Tanh2D { .. } => {
                let (lo, hi) = self.m_box();
                for i in 0..self.dim {
                    let w = hi[i] - lo[i];
                    let v = if out[i].is_finite() { out[i] } else { 0.5 * (lo[i] + hi[i]) };
                    out[i] = v.clamp(lo[i] + margin * w, hi[i] - margin * w);
                }
            }
            Family::Gauss2DCoriolis { amplitude, .. } => {
                let a = *amplitude;
                let m1 = if out[0].is_finite() { out[0] } else { 0.5 * a };
                let m1 = m1.clamp(margin * a, a * (1.0 - margin));
                let lo = m1 * m1 / a;
                let m2 = if out[1].is_finite() { out[1] } else { 0.5 * (lo + m1) };
                let w = m1 - lo;
                out[0] = m1;
                out[1] = m2.clamp(lo + margin * w, m1 - margin * w);
            }
            Family::LinearR { .. } => {}
            Family::Constant { c } => out = c.clone(),
            Family::Blocks(parts) => {
                let mut off = 0;
                for p in parts {
                    let sub = Vect::from_column_slice(&m.as_slice()[off..off + p.dim]);
                    out.rows_mut(off, p.dim).copy_from(&p.clip_to_domain(&sub));
                    off += p.dim;
                }
            }
        }
        out
    }

    /// Inverse map `x = φ(M)` with `u⁰(φ(M)) = M`.
    ///
    /// Errors for data with frozen (constant) components, which have no inverse.
    pub fn phi_eval(&self, m: &Vect) -> Result<Vect> {
        if self.free_mask().iter().any(|f| !f) {
            return Err(Error::Unsupported("constant initial data has no inverse map".into()));
        }
        self.phi_partial(m)
    }

    /// φ on free components, zero on frozen ones.
    pub(crate) fn phi_partial(&self, m: &Vect) -> Result<Vect> {
        self.check_len(m.as_slice())?;
        match &self.family {
            Family::Tanh1D { mu, kappa } => {
                if !self.in_domain(m.as_slice()) {
                    return Err(out_of_domain("Tanh1D", m.as_slice()));
                }
                Ok(Vect::from_element(1, (1.0 - m[0] / mu).atanh() / kappa))
            }
            Family::Gauss1D { eta, kappa, branch } => {
                if !self.in_domain(m.as_slice()) {
                    return Err(out_of_domain("Gauss1D", m.as_slice()));
                }
                Ok(Vect::from_element(1, branch.sign() * (eta / m[0]).ln().sqrt() / kappa))
            }
            Family::Tanh2D { epsilon } => {
                if !self.in_domain(m.as_slice()) {
                    return Err(out_of_domain("Tanh2D", m.as_slice()));
                }
                let (a1, a2) = (m[0].atanh(), m[1].atanh());
                let d = epsilon * epsilon - 1.0;
                Ok(Vect::from_vec(vec![(a1 - epsilon * a2) / d, (-epsilon * a1 + a2) / d]))
            }
            Family::Gauss2DCoriolis { amplitude, branch } => {
                if !self.in_domain(m.as_slice()) {
                    return Err(out_of_domain("Gauss2DCoriolis", m.as_slice()));
                }
                let l1 = (amplitude * m[1] / (m[0] * m[0])).ln();
                let l2 = (m[0] / m[1]).ln();
                Ok(Vect::from_vec(vec![branch[0].sign() * l1.sqrt(), branch[1].sign() * l2.sqrt()]))
            }
            Family::LinearR { r } => Ok(r * m),
            Family::Constant { c } => Ok(Vect::zeros(c.len())),
            Family::Blocks(parts) => {
                let mut out = Vect::zeros(self.dim);
                let mut off = 0;
                for p in parts {
                    let sub = Vect::from_column_slice(&m.as_slice()[off..off + p.dim]);
                    out.rows_mut(off, p.dim).copy_from(&p.phi_partial(&sub)?);
                    off += p.dim;
                }
                Ok(out)
            }
        }
    }

    /// Analytic `∂φ_i/∂M_m`. Rows and columns of frozen components are zero.
    pub fn phi_jacobian(&self, m: &Vect) -> Result<Mat> {
        self.check_len(m.as_slice())?;
        match &self.family {
            Family::Tanh1D { mu, kappa } => {
                if !self.in_domain(m.as_slice()) {
                    return Err(out_of_domain("Tanh1D", m.as_slice()));
                }
                let v = m[0];
                Ok(Mat::from_element(1, 1, -mu / (kappa * v * (2.0 * mu - v))))
            }
            Family::Gauss1D { eta, kappa, branch } => {
                if !self.in_domain(m.as_slice()) {
                    return Err(out_of_domain("Gauss1D", m.as_slice()));
                }
                let v = m[0];
                Ok(Mat::from_element(
                    1,
                    1,
                    -branch.sign() / (2.0 * kappa * v * (eta / v).ln().sqrt()),
                ))
            }
            Family::Tanh2D { epsilon } => {
                if !self.in_domain(m.as_slice()) {
                    return Err(out_of_domain("Tanh2D", m.as_slice()));
                }
                let d = epsilon * epsilon - 1.0;
                let q1 = 1.0 / (1.0 - m[0] * m[0]);
                let q2 = 1.0 / (1.0 - m[1] * m[1]);
                Ok(Mat::from_row_slice(
                    2,
                    2,
                    &[q1 / d, -epsilon * q2 / d, -epsilon * q1 / d, q2 / d],
                ))
            }
            Family::Gauss2DCoriolis { amplitude, branch } => {
                if !self.in_domain(m.as_slice()) {
                    return Err(out_of_domain("Gauss2DCoriolis", m.as_slice()));
                }
                let (m1, m2) = (m[0], m[1]);
                let r1 = (amplitude * m2 / (m1 * m1)).ln().sqrt();
                let r2 = (m1 / m2).ln().sqrt();
                let (sx, sy) = (branch[0].sign(), branch[1].sign());
                Ok(Mat::from_row_slice(
                    2,
                    2,
                    &[
                        -sx / (m1 * r1),
                        sx / (2.0 * m2 * r1),
                        sy / (2.0 * m1 * r2),
                        -sy / (2.0 * m2 * r2),
                    ],
                ))
            }
            Family::LinearR { r } => Ok(r.clone()),
            Family::Constant { c } => Ok(Mat::zeros(c.len(), c.len())),
            Family::Blocks(parts) => {
                let mut out = Mat::zeros(self.dim, self.dim);
                let mut off = 0;
                for p in parts {
                    let sub = Vect::from_column_slice(&m.as_slice()[off..off + p.dim]);
                    out.view_mut((off, off), (p.dim, p.dim)).copy_from(&p.phi_jacobian(&sub)?);
                    off += p.dim;
                }
                Ok(out)
            }
        }
    }

    /// A spatial box on which `u⁰` is defined, used for random sampling.
    pub fn x_box(&self) -> (Vect, Vect) {
        let n = self.dim;
        match &self.family {
            Family::Tanh1D { kappa, .. } => {
                let w = 3.0 / kappa.abs();
                (Vect::from_element(1, -w), Vect::from_element(1, w))
            }
            Family::Gauss1D { kappa, branch, .. } => {
                let (a, b) = (0.05 / kappa, 2.0 / kappa);
                match branch {
                    Branch::Plus => (Vect::from_element(1, a), Vect::from_element(1, b)),
                    Branch::Minus => (Vect::from_element(1, -b), Vect::from_element(1, -a)),
                }
            }
            Family::Tanh2D { .. } => (Vect::from_element(2, -1.5), Vect::from_element(2, 1.5)),
            Family::Gauss2DCoriolis { branch, .. } => {
                let mut lo = Vect::zeros(2);
                let mut hi = Vect::zeros(2);
                for i in 0..2 {
                    let (a, b) = (0.05, 1.5);
                    match branch[i] {
                        Branch::Plus => {
                            lo[i] = a;
                            hi[i] = b;
                        }
                        Branch::Minus => {
                            lo[i] = -b;
                            hi[i] = -a;
                        }
                    }
                }
                (lo, hi)
            }
            Family::LinearR { .. } | Family::Constant { .. } => {
                (Vect::from_element(n, -1.0), Vect::from_element(n, 1.0))
            }
            Family::Blocks(parts) => {
                let mut lo = Vect::zeros(n);
                let mut hi = Vect::zeros(n);
                let mut off = 0;
                for p in parts {
                    let (l, h) = p.x_box();
                    lo.rows_mut(off, p.dim).copy_from(&l);
                    hi.rows_mut(off, p.dim).copy_from(&h);
                    off += p.dim;
                }
                (lo, hi)
            }
        }
    }

    /// Upper bound on the Frobenius norm of `∂u⁰/∂x` over the spatial domain.
    pub fn gradient_bound(&self) -> f64 {
        match &self.family {
            Family::Tanh1D { mu, kappa } => (mu * kappa).abs(),
            Family::Gauss1D { eta, kappa, .. } => eta * kappa * (2.0 / std::f64::consts::E).sqrt(),
            Family::Tanh2D { epsilon } => (2.0 * (1.0 + epsilon * epsilon)).sqrt(),
            Family::Gauss2DCoriolis { amplitude, .. } => {
                amplitude * (10.0 / std::f64::consts::E).sqrt()
            }
            Family::LinearR { .. } => self.r_inv.as_ref().map(|m| m.norm()).unwrap_or(0.0),
            Family::Constant { .. } => 0.0,
            Family::Blocks(parts) => parts
                .iter()
                .map(|p| p.gradient_bound().powi(2))
                .sum::<f64>()
                .sqrt(),
        }
    }
}

/// Newton and scan settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Residual norm at which Newton stops.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Step halvings allowed per Newton step.
    pub max_halvings: usize,
    /// Largest time increment of a continuation sweep.
    pub sweep_dt: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            newton_tol: 1e-12,
            newton_max_iter: 50,
            max_halvings: 8,
            sweep_dt: 0.05,
        }
    }
}

/// Default number of grid points per M-dimension in blow-up scans.
pub const DEFAULT_GRID: usize = 201;

/// A force specification and initial data, plus solver settings.
#[derive(Debug, Clone, PartialEq)]
pub struct HodographProblem {
    spec: ForceSpec,
    data: InitialData,
    options: SolverOptions,
    grid: usize,
}

impl HodographProblem {
    pub fn new(spec: ForceSpec, data: InitialData) -> Result<Self> {
        if spec.dim() != data.dim() {
            return Err(Error::Dimension {
                expected: spec.dim(),
                got: data.dim(),
            });
        }
        Ok(Self {
            spec,
            data,
            options: SolverOptions::default(),
            grid: DEFAULT_GRID,
        })
    }

    pub fn with_options(mut self, options: SolverOptions) -> Result<Self> {
        if !(options.newton_tol > 0.0 && options.newton_tol.is_finite()) {
            return Err(Error::InvalidParameter("newton_tol must be positive".into()));
        }
        if options.newton_max_iter < 1 {
            return Err(Error::InvalidParameter("newton_max_iter must be at least 1".into()));
        }
        if !(options.sweep_dt > 0.0 && options.sweep_dt.is_finite()) {
            return Err(Error::InvalidParameter("sweep_dt must be positive".into()));
        }
        self.options = options;
        Ok(self)
    }

    pub fn with_grid(mut self, grid: usize) -> Result<Self> {
        if grid < 3 {
            return Err(Error::InvalidParameter("grid needs at least 3 points".into()));
        }
        self.grid = grid;
        Ok(self)
    }

    pub fn spec(&self) -> &ForceSpec {
        &self.spec
    }

    pub fn data(&self) -> &InitialData {
        &self.data
    }

    pub fn options(&self) -> &SolverOptions {
        &self.options
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }
}

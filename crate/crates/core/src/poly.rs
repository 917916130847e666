//! Real roots of small real polynomials.

use nalgebra::{DMatrix, Schur};

use crate::error::{Error, Result};

/// Imaginary-part tolerance (relative to `max(1, |root|)`) for accepting a
/// companion eigenvalue as a real root.
pub const IMAG_TOL: f64 = 1e-9;

/// Evaluates `Σ c_k x^k` (coefficients low to high) and its derivative.
pub fn eval_with_derivative(c: &[f64], x: f64) -> (f64, f64) {
    let mut p = 0.0;
    let mut dp = 0.0;
    for &ck in c.iter().rev() {
        dp = dp * x + p;
        p = p * x + ck;
    }
    (p, dp)
}

fn trim(c: &[f64]) -> &[f64] {
    let scale = c.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut end = c.len();
    while end > 0 && c[end - 1].abs() <= 1e-14 * scale {
        end -= 1;
    }
    &c[..end]
}

fn polish(c: &[f64], mut x: f64) -> f64 {
    for _ in 0..8 {
        let (p, dp) = eval_with_derivative(c, x);
        if p == 0.0 || dp == 0.0 {
            break;
        }
        let next = x - p / dp;
        if eval_with_derivative(c, next).0.abs() >= p.abs() {
            break;
        }
        x = next;
    }
    x
}

/// Real roots of `c_0 + c_1 x + … + c_d x^d`, ascending, with multiplicity.
///
/// Degrees ≤ 2 use closed forms; higher degrees use the eigenvalues of the
/// companion matrix, keeping those with imaginary part below
/// [`IMAG_TOL`], each polished by Newton steps.
pub fn real_roots(coeffs: &[f64]) -> Result<Vec<f64>> {
    if coeffs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("polynomial coefficients"));
    }
    let c = trim(coeffs);
    let mut roots = match c.len() {
        0 | 1 => vec![],
        2 => vec![-c[0] / c[1]],
        3 => quadratic(c[2], c[1], c[0]),
        len => {
            let d = len - 1;
            let lead = c[d];
            let mut comp = DMatrix::<f64>::zeros(d, d);
            for i in 1..d {
                comp[(i, i - 1)] = 1.0;
            }
            for i in 0..d {
                comp[(i, d - 1)] = -c[i] / lead;
            }
            let schur =
                Schur::try_new(comp, f64::EPSILON, 10_000).ok_or(Error::EigenNoConvergence)?;
            schur
                .complex_eigenvalues()
                .iter()
                .filter(|z| z.im.abs() <= IMAG_TOL * z.re.abs().max(1.0))
                .map(|z| polish(c, z.re))
                .collect()
        }
    };
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(roots)
}

/// Real roots of `a x² + b x + c` (a ≠ 0), cancellation-free.
fn quadratic(a: f64, b: f64, c: f64) -> Vec<f64> {
    let mut disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        if disc >= -1e-14 * (b * b + (4.0 * a * c).abs()) {
            disc = 0.0;
        } else {
            return vec![];
        }
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    if q == 0.0 {
        return vec![0.0, 0.0];
    }
    vec![q / a, c / q]
}

//! Local refinement of grid extrema: golden-section / coordinate descent
//! followed by a Newton polish on finite-difference derivatives.
//!
//! Objectives return `None` where undefined; such points count as +∞.

use crate::matops::{self, Mat, Vect};

const GOLDEN: f64 = 0.618_033_988_749_894_9;

fn value(f: &dyn Fn(&Vect) -> Option<f64>, x: &Vect) -> f64 {
    f(x).filter(|v| v.is_finite()).unwrap_or(f64::INFINITY)
}

/// Golden-section search for a minimum of `g` on `[a, b]`.
pub(crate) fn golden(g: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let mut fc = g(c);
    let mut fd = g(d);
    for _ in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = g(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = g(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Refines a minimum of `f` starting from a grid point `x0` with grid
/// spacing `h` per coordinate. Coordinates with `h = 0` stay fixed.
pub(crate) fn minimize(f: &dyn Fn(&Vect) -> Option<f64>, x0: &Vect, h: &Vect) -> (Vect, f64) {
    let n = x0.len();
    let mut x = x0.clone();
    let mut fx = value(f, &x);
    let mut width = h.clone();
    for _cycle in 0..200 {
        let start = x.clone();
        for i in 0..n {
            if width[i] <= 0.0 {
                continue;
            }
            let line = |s: f64| {
                let mut y = x.clone();
                y[i] = s;
                value(f, &y)
            };
            let tol = 1e-13 * (1.0 + x[i].abs());
            let (s, fs) = golden(&line, x[i] - width[i], x[i] + width[i], tol);
            if fs < fx {
                x[i] = s;
                fx = fs;
            }
        }
        let moved = &x - &start;
        let mut done = true;
        for i in 0..n {
            if width[i] <= 0.0 {
                continue;
            }
            width[i] = (2.0 * moved[i].abs()).max(0.5 * width[i]);
            if width[i] > 1e-11 * (1.0 + x[i].abs()) {
                done = false;
            }
        }
        if done {
            break;
        }
    }
    polish(f, x, fx, h)
}

/// Newton iterations on the finite-difference gradient; accepted only while
/// the objective does not increase.
fn polish(f: &dyn Fn(&Vect) -> Option<f64>, mut x: Vect, mut fx: f64, h: &Vect) -> (Vect, f64) {
    let active: Vec<usize> = (0..x.len()).filter(|&i| h[i] > 0.0).collect();
    let k = active.len();
    if k == 0 || !fx.is_finite() {
        return (x, fx);
    }
    for _ in 0..20 {
        let d: Vec<f64> = active.iter().map(|&i| 1e-5 * h[i].max(1e-3) * 10.0).collect();
        let shifted = |pairs: &[(usize, f64)]| {
            let mut y = x.clone();
            for &(i, s) in pairs {
                y[active[i]] += s;
            }
            value(f, &y)
        };
        let mut grad = Vect::zeros(k);
        let mut hess = Mat::zeros(k, k);
        for a in 0..k {
            let fp = shifted(&[(a, d[a])]);
            let fm = shifted(&[(a, -d[a])]);
            grad[a] = (fp - fm) / (2.0 * d[a]);
            hess[(a, a)] = (fp - 2.0 * fx + fm) / (d[a] * d[a]);
            for b in 0..a {
                let fpp = shifted(&[(a, d[a]), (b, d[b])]);
                let fpm = shifted(&[(a, d[a]), (b, -d[b])]);
                let fmp = shifted(&[(a, -d[a]), (b, d[b])]);
                let fmm = shifted(&[(a, -d[a]), (b, -d[b])]);
                let v = (fpp - fpm - fmp + fmm) / (4.0 * d[a] * d[b]);
                hess[(a, b)] = v;
                hess[(b, a)] = v;
            }
        }
        if grad.iter().chain(hess.iter()).any(|v| !v.is_finite()) {
            break;
        }
        let Ok(step) = matops::solve(&hess, &(-&grad)) else {
            break;
        };
        let mut y = x.clone();
        for (a, &i) in active.iter().enumerate() {
            y[i] += step[a];
        }
        let fy = value(f, &y);
        if fy > fx || !fy.is_finite() {
            break;
        }
        let small = step.amax() <= 1e-14 * (1.0 + x.amax());
        x = y;
        fx = fy;
        if small {
            break;
        }
    }
    (x, fx)
}

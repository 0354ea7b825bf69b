//! Roots of real cubic polynomials.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Roots of `c3 x³ + c2 x² + c1 x + c0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CubicRoots {
    /// One real root and a complex-conjugate pair (positive imaginary part first).
    OneReal { real: f64, complex: [Complex64; 2] },
    /// Three real roots in ascending order (repeated roots appear twice).
    ThreeReal([f64; 3]),
}

impl CubicRoots {
    pub fn real_roots(&self) -> Vec<f64> {
        match *self {
            CubicRoots::OneReal { real, .. } => vec![real],
            CubicRoots::ThreeReal(r) => r.to_vec(),
        }
    }

    pub fn all(&self) -> [Complex64; 3] {
        match *self {
            CubicRoots::OneReal { real, complex } => [Complex64::new(real, 0.0), complex[0], complex[1]],
            CubicRoots::ThreeReal(r) => r.map(|x| Complex64::new(x, 0.0)),
        }
    }
}

fn eval(c: [f64; 4], x: f64) -> (f64, f64) {
    let [c3, c2, c1, c0] = c;
    let p = ((c3 * x + c2) * x + c1) * x + c0;
    let dp = (3.0 * c3 * x + 2.0 * c2) * x + c1;
    (p, dp)
}

fn polish(c: [f64; 4], mut x: f64) -> f64 {
    for _ in 0..4 {
        let (p, dp) = eval(c, x);
        if dp == 0.0 {
            break;
        }
        let step = p / dp;
        let next = x - step;
        if !next.is_finite() || eval(c, next).0.abs() > p.abs() {
            break;
        }
        x = next;
    }
    x
}

/// Solves `c3 x³ + c2 x² + c1 x + c0 = 0`.
///
/// A leading coefficient below `1e-12` times the largest coefficient is
/// reported as [`Error::DegenerateCubic`] rather than silently solved as a
/// quadratic.
pub fn solve_cubic(c3: f64, c2: f64, c1: f64, c0: f64) -> Result<CubicRoots> {
    let coeffs = [c3, c2, c1, c0];
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::DegenerateCubic("non-finite coefficient".into()));
    }
    let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if scale == 0.0 || c3.abs() <= 1e-12 * scale {
        return Err(Error::DegenerateCubic(format!(
            "leading coefficient {c3:e} is negligible against {scale:e}"
        )));
    }
    let (b, c, d) = (c2 / c3, c1 / c3, c0 / c3);
    // x = y − b/3 gives y³ + p y + q = 0
    let shift = b / 3.0;
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);

    if disc > 0.0 {
        let sq = disc.sqrt();
        let u = (-q / 2.0 - q.signum() * sq).cbrt();
        let y = if u == 0.0 { 0.0 } else { u - p / (3.0 * u) };
        let real = polish(coeffs, y - shift);
        // Deflate: x³ + b x² + c x + d = (x − r)(x² + e x + f)
        let e = b + real;
        let f = c + real * e;
        let half = -e / 2.0;
        let im_sq = f - half * half;
        if im_sq <= 0.0 {
            // Discriminant sign flipped by rounding: three real roots.
            let s = (-im_sq).sqrt();
            let mut r = [real, polish(coeffs, half - s), polish(coeffs, half + s)];
            r.sort_by(f64::total_cmp);
            return Ok(CubicRoots::ThreeReal(r));
        }
        let im = im_sq.sqrt();
        Ok(CubicRoots::OneReal {
            real,
            complex: [Complex64::new(half, im), Complex64::new(half, -im)],
        })
    } else {
        // Trigonometric form; p ≤ 0 here.
        let m = 2.0 * (-p / 3.0).max(0.0).sqrt();
        let mut r = if m == 0.0 {
            [-shift; 3]
        } else {
            let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
            let theta = arg.acos() / 3.0;
            [0.0, 1.0, 2.0].map(|k| m * (theta - 2.0 * PI * k / 3.0).cos() - shift)
        };
        for x in r.iter_mut() {
            *x = polish(coeffs, *x);
        }
        r.sort_by(f64::total_cmp);
        Ok(CubicRoots::ThreeReal(r))
    }
}

//! Standard normal density and distribution function.

use libm::{erf, erfc};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Standard normal density φ(x).
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal distribution function Φ(x), accurate in both tails.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// `2Φ(x) − 1`, exactly odd in `x`.
pub fn norm_centered(x: f64) -> f64 {
    erf(x * FRAC_1_SQRT_2)
}

/// (2n − 1)!! with the convention (−1)!! = 1.
pub fn double_factorial_odd(n: u32) -> f64 {
    (1..=n).map(|k| (2 * k - 1) as f64).product()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_symmetry_and_known_values() {
        assert_eq!(norm_cdf(0.0), 0.5);
        for &x in &[0.1, 0.7, 1.96, 4.0, 9.0] {
            assert!((norm_cdf(x) + norm_cdf(-x) - 1.0).abs() < 1e-15);
        }
        assert!((norm_cdf(1.959963984540054) - 0.975).abs() < 1e-15);
        // deep tail keeps relative accuracy
        let t = norm_cdf(-10.0);
        assert!((t / 7.619853024160527e-24 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn double_factorial() {
        assert_eq!(double_factorial_odd(0), 1.0);
        assert_eq!(double_factorial_odd(1), 1.0);
        assert_eq!(double_factorial_odd(2), 3.0);
        assert_eq!(double_factorial_odd(4), 105.0);
    }
}

//! Gaussian expectation formulary and bivariate normal quadrature.

use crate::error::{Error, Result};
use crate::quadrature::{composite_normal_rule, gauss_hermite, hermite_levels, panel_levels, refine, Converged};
use crate::special::{double_factorial_odd, norm_cdf, norm_pdf};
use std::f64::consts::PI;

/// Closed-form values of the one-dimensional identities, for `Z ~ N(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianIdentities {
    /// `⟨Z^{2n} e^{−b²Z²/2}⟩ = (2n − 1)!! (1 + b²)^{−(2n+1)/2}`
    pub gauss_moment: f64,
    /// `⟨φ(a + bZ)⟩ = φ(a/√(1+b²)) / √(1+b²)`
    pub pdf_mean: f64,
    /// `⟨Φ(a + bZ)⟩ = Φ(a/√(1+b²))`
    pub cdf_mean: f64,
    /// `⟨Z φ(a + bZ)⟩ = −ab φ(a/√(1+b²)) / (1+b²)^{3/2}`
    pub z_pdf_mean: f64,
    /// `⟨Z Φ(a + bZ)⟩ = b φ(a/√(1+b²)) / √(1+b²)`
    pub z_cdf_mean: f64,
    /// `⟨Φ(aZ) Φ(bZ)⟩ = arctan(ab/√(1+a²+b²))/(2π) + 1/4`
    pub cdf_product: f64,
}

pub fn gaussian_identity_suite(a: f64, b: f64, n: u32) -> GaussianIdentities {
    let q = 1.0 + b * b;
    let sq = q.sqrt();
    let arg = a / sq;
    GaussianIdentities {
        gauss_moment: double_factorial_odd(n) * q.powf(-(2.0 * n as f64 + 1.0) / 2.0),
        pdf_mean: norm_pdf(arg) / sq,
        cdf_mean: norm_cdf(arg),
        z_pdf_mean: -a * b * norm_pdf(arg) / q.powf(1.5),
        z_cdf_mean: b * norm_pdf(arg) / sq,
        cdf_product: (a * b / (1.0 + a * a + b * b).sqrt()).atan() / (2.0 * PI) + 0.25,
    }
}

/// Change of measure for Gaussian damping factors:
///
/// ```text
/// E[f(Z1, Z2) e^{−a1²Z1²/2} e^{−a2²Z2²/2}] = D^{−1/2} Ê[f(√(D2/D) Z1, √(D1/D) Z2)]
/// ```
///
/// where under `Ê` the pair has correlation `ρ̂ = ρ / √(D1 D2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BivariateReweighting {
    pub d1: f64,
    pub d2: f64,
    pub d: f64,
    pub rho_hat: f64,
    /// `√(D2/D)`, the scale applied to `Z1`.
    pub scale1: f64,
    /// `√(D1/D)`, the scale applied to `Z2`.
    pub scale2: f64,
    /// `D^{−1/2}`
    pub prefactor: f64,
}

pub fn bivariate_reweighting(rho: f64, a1: f64, a2: f64) -> BivariateReweighting {
    let om = 1.0 - rho * rho;
    let d1 = om * a1 * a1 + 1.0;
    let d2 = om * a2 * a2 + 1.0;
    let d = om * a1 * a1 * a2 * a2 + a1 * a1 + a2 * a2 + 1.0;
    BivariateReweighting {
        d1,
        d2,
        d,
        rho_hat: rho / (d1 * d2).sqrt(),
        scale1: (d2 / d).sqrt(),
        scale2: (d1 / d).sqrt(),
        prefactor: d.powf(-0.5),
    }
}

/// `E[f(Z1, Z2)]` for a standard bivariate normal pair with correlation `ρ`,
/// written as `Z1 = ρ Z2 + √(1−ρ²) W`.
///
/// Smooth integrands (no breakpoints) use tensor Gauss–Hermite with node
/// doubling. Otherwise the outer `Z2` integral is split at `breaks_z2` and
/// the inner `W` integral at the points where `Z1` crosses `breaks_z1`.
pub fn bivariate_expectation(
    f: impl Fn(f64, f64) -> f64 + Sync,
    rho: f64,
    breaks_z1: &[f64],
    breaks_z2: &[f64],
    tol: f64,
) -> Result<Converged> {
    if !(rho.abs() < 1.0) {
        return Err(Error::param("rho", format!("|ρ| must be below 1, got {rho}")));
    }
    let s = (1.0 - rho * rho).sqrt();
    if breaks_z1.is_empty() && breaks_z2.is_empty() {
        return refine(hermite_levels(), tol, |n| {
            let rule = gauss_hermite(n);
            rule.integrate(|z2| rule.integrate(|w| f(rho * z2 + s * w, z2)))
        });
    }
    refine(panel_levels(), tol, |panels| {
        let outer = composite_normal_rule(breaks_z2, panels);
        outer.integrate(|z2| {
            let inner_breaks: Vec<f64> = breaks_z1.iter().map(|b| (b - rho * z2) / s).collect();
            composite_normal_rule(&inner_breaks, panels).integrate(|w| f(rho * z2 + s * w, z2))
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::normal_expectation;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn trivial_cases() {
        let g = gaussian_identity_suite(0.0, 0.0, 0);
        assert_eq!(g.cdf_product, 0.25);
        assert_eq!(g.gauss_moment, 1.0);
        let g = gaussian_identity_suite(0.0, 1.0, 2);
        assert!((g.gauss_moment - 3.0 * 2f64.powf(-2.5)).abs() < 1e-15);
        let quad = normal_expectation(|z| z.powi(4) * (-0.5 * z * z).exp(), &[], 1e-14).unwrap();
        assert!((quad.value - g.gauss_moment).abs() < 1e-12);
    }

    #[test]
    fn identities_match_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let a: f64 = rng.random_range(-2.0..2.0);
            let b: f64 = rng.random_range(-2.0..2.0);
            let n = rng.random_range(0..4u32);
            let g = gaussian_identity_suite(a, b, n);
            let e = |f: &dyn Fn(f64) -> f64| normal_expectation(f, &[], 1e-13).unwrap().value;
            assert!((e(&|z| z.powi(2 * n as i32) * (-0.5 * b * b * z * z).exp()) - g.gauss_moment).abs() < 1e-9);
            assert!((e(&|z| norm_pdf(a + b * z)) - g.pdf_mean).abs() < 1e-9);
            assert!((e(&|z| norm_cdf(a + b * z)) - g.cdf_mean).abs() < 1e-9);
            assert!((e(&|z| z * norm_pdf(a + b * z)) - g.z_pdf_mean).abs() < 1e-9);
            assert!((e(&|z| z * norm_cdf(a + b * z)) - g.z_cdf_mean).abs() < 1e-9);
            assert!((e(&|z| norm_cdf(a * z) * norm_cdf(b * z)) - g.cdf_product).abs() < 1e-9);
        }
    }

    #[test]
    fn reweighting_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let rho: f64 = rng.random_range(-0.9..0.9);
            let a1: f64 = rng.random_range(0.0..1.5);
            let a2: f64 = rng.random_range(0.0..1.5);
            let f = |x: f64, y: f64| (x + 0.3).powi(2) * y + norm_cdf(x - y);
            let lhs = bivariate_expectation(
                |x, y| f(x, y) * (-0.5 * a1 * a1 * x * x).exp() * (-0.5 * a2 * a2 * y * y).exp(),
                rho,
                &[],
                &[],
                1e-12,
            )
            .unwrap()
            .value;
            let rw = bivariate_reweighting(rho, a1, a2);
            let rhs = rw.prefactor
                * bivariate_expectation(|x, y| f(rw.scale1 * x, rw.scale2 * y), rw.rho_hat, &[], &[], 1e-12)
                    .unwrap()
                    .value;
            assert!((lhs - rhs).abs() < 1e-9, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn bivariate_orthant_probability() {
        // P(Z1 > 0, Z2 > 0) = 1/4 + arcsin(ρ)/(2π)
        for rho in [-0.8, 0.0, 0.5, 0.95] {
            let p = bivariate_expectation(
                |x, y| if x > 0.0 && y > 0.0 { 1.0 } else { 0.0 },
                rho,
                &[0.0],
                &[0.0],
                1e-11,
            )
            .unwrap()
            .value;
            let exact = 0.25 + f64::asin(rho) / (2.0 * PI);
            assert!((p - exact).abs() < 1e-10);
        }
        assert!(bivariate_expectation(|_, _| 1.0, 1.0, &[], &[], 1e-9).is_err());
    }
}

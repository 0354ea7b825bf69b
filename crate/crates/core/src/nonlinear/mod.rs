//! Nonlinear strategies: the position is `ψ(V_n)` for a normalised signal
//! `V_n` (unit variance) and an odd activation function ψ.
//!
//! The third moment of the P-period return is `3 Σ_{k=1}^{P−1} (P − k) H_k`
//! with the lag terms
//!
//! ```text
//! H_k = 2 a_{k−1} E[ψ(Z1)² ψ(Z2) (Z1 − ρ Z2) / (2(1 − ρ²))],   ρ = R_k
//! ```
//!
//! over a standard bivariate normal pair. Three activation families have
//! closed forms; everything else goes through quadrature of the expression
//! above, which needs no derivative of ψ and so also covers step functions.

mod activation;
mod gaussian;

pub use activation::{compound_cos_delta, compound_sigmoid_make, ActivationKind, ActivationSpec, CustomActivation};
pub use gaussian::{
    bivariate_expectation, bivariate_reweighting, gaussian_identity_suite, BivariateReweighting, GaussianIdentities,
};

use crate::cubic::solve_cubic;
use crate::error::{Error, Result};
use crate::filter::LinearFilter;
use crate::special::{norm_cdf, norm_pdf};
use crate::term::MomentTermStructure;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Convergence tolerance of the H_k quadrature (successive levels).
pub const HK_QUAD_TOL: f64 = 1e-9;

/// Inputs of a single lag term: `a_{k−1}` and `ρ = R_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HkContext {
    pub a_prev: f64,
    pub rho: f64,
}

impl HkContext {
    /// `|ρ| = 1` is an irregular limit and is rejected.
    pub fn new(a_prev: f64, rho: f64) -> Result<Self> {
        if !a_prev.is_finite() {
            return Err(Error::param("a_prev", "must be finite"));
        }
        if !(rho.abs() < 1.0) {
            return Err(Error::param("rho", format!("|ρ| must be strictly below 1, got {rho}")));
        }
        Ok(Self { a_prev, rho })
    }

    /// Context for lag `k ≥ 1` of a normalised filter.
    pub fn for_lag(f: &LinearFilter, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::param("k", "lag must be at least 1"));
        }
        Self::new(f.weight(k - 1), f.autocovariance(k))
    }
}

/// `H_k` in closed form for the linear, simple sigmoid, reverting sigmoid
/// and double-step activations.
pub fn h_k_closed(spec: &ActivationSpec, ctx: HkContext) -> Result<f64> {
    let HkContext { a_prev: a, rho } = ctx;
    let c3 = spec.normalization_constant().powi(3);
    let value = match *spec.kind() {
        ActivationKind::Linear => 2.0 * a * rho,
        ActivationKind::SimpleSigmoid { lambda } => {
            let l2 = lambda * lambda;
            let q = (1.0 + l2).sqrt();
            let inner = (l2 * rho / q) / (1.0 + 3.0 * l2 + 2.0 * (1.0 - rho * rho) * l2 * l2).sqrt();
            2.0 * a * c3 * (2.0 / PI).powf(1.5) * lambda / q * inner.atan()
        }
        ActivationKind::RevertingSigmoid { lambda } => {
            let l4 = lambda.powi(4);
            let om = 1.0 - rho * rho;
            2.0 * a * c3 * rho * (1.0 - om * l4) / (1.0 + 3.0 * lambda * lambda + 2.0 * om * l4).powf(2.5)
        }
        ActivationKind::DoubleStep { epsilon } => {
            if epsilon == 0.0 {
                0.0
            } else {
                let up = epsilon * ((1.0 + rho) / (1.0 - rho)).sqrt();
                let down = epsilon * ((1.0 - rho) / (1.0 + rho)).sqrt();
                2.0 * a * c3 * norm_pdf(epsilon) * (norm_cdf(up) - norm_cdf(down))
            }
        }
        ActivationKind::CompoundSigmoid { .. } | ActivationKind::Custom(_) => {
            return Err(Error::NoClosedForm(spec.label()))
        }
    };
    Ok(value)
}

/// `H_k` by bivariate quadrature of the derivative-free expectation,
/// refined until successive levels agree to `tol`.
pub fn h_k_quadrature(spec: &ActivationSpec, ctx: HkContext, tol: f64) -> Result<f64> {
    let HkContext { a_prev: a, rho } = ctx;
    let denom = 2.0 * (1.0 - rho * rho);
    let breaks = spec.breakpoints();
    let e = bivariate_expectation(
        |z1, z2| {
            let p1 = spec.psi(z1);
            p1 * p1 * spec.psi(z2) * (z1 - rho * z2) / denom
        },
        rho,
        &breaks,
        &breaks,
        tol,
    )?;
    Ok(2.0 * a * e.value)
}

/// `H_k = 2 a_{k−1} E[ψ(Z1) ψ′(Z1) ψ(Z2)]`, the integrated-by-parts form.
/// Only for differentiable ψ.
pub fn h_k_by_parts(spec: &ActivationSpec, ctx: HkContext, tol: f64) -> Result<f64> {
    if spec.derivative(0.0).is_none() || !spec.breakpoints().is_empty() {
        return Err(Error::param("activation", format!("{} is not differentiable", spec.label())));
    }
    let HkContext { a_prev: a, rho } = ctx;
    let e = bivariate_expectation(
        |z1, z2| spec.psi(z1) * spec.derivative(z1).unwrap_or(0.0) * spec.psi(z2),
        rho,
        &[],
        &[],
        tol,
    )?;
    Ok(2.0 * a * e.value)
}

/// Closed form when available, otherwise quadrature at [`HK_QUAD_TOL`].
pub fn h_k(spec: &ActivationSpec, ctx: HkContext) -> Result<f64> {
    match h_k_closed(spec, ctx) {
        Err(Error::NoClosedForm(_)) => h_k_quadrature(spec, ctx, HK_QUAD_TOL),
        other => other,
    }
}

fn require_normalized(f: &LinearFilter) -> Result<()> {
    let r0 = f.autocovariance(0);
    if f.is_normalized() && (r0 - 1.0).abs() < 1e-10 {
        Ok(())
    } else {
        Err(Error::NotNormalized(r0))
    }
}

/// Lag terms `H_1..=H_n`, computed in parallel.
pub fn lag_terms(f: &LinearFilter, spec: &ActivationSpec, n: usize) -> Result<Vec<f64>> {
    require_normalized(f)?;
    let weights = f.weights(n);
    (1..=n)
        .into_par_iter()
        .map(|k| h_k(spec, HkContext::new(weights[k - 1], f.autocovariance(k))?))
        .collect()
}

/// Skewness term structure of the nonlinear strategy for P = 1..=p_max:
/// `μ2 = P`, and `μ3 = Θ_P` from `S_P = S_{P−1} + H_{P−1}`,
/// `Θ_P = Θ_{P−1} + 3 S_P` with `S_1 = Θ_1 = 0`.
pub fn nonlinear_term_structure(f: &LinearFilter, spec: &ActivationSpec, p_max: usize) -> Result<MomentTermStructure> {
    if p_max == 0 {
        return Err(Error::param("P", "period must be at least 1"));
    }
    let h = lag_terms(f, spec, p_max - 1)?;
    let mut mu3 = Vec::with_capacity(p_max);
    let (mut s, mut theta) = (0.0, 0.0);
    mu3.push(0.0);
    for hk in &h {
        s += hk;
        theta += 3.0 * s;
        mu3.push(theta);
    }
    let periods: Vec<usize> = (1..=p_max).collect();
    let mu2 = periods.iter().map(|&p| p as f64).collect();
    Ok(MomentTermStructure::from_moments(periods, mu2, mu3))
}

/// `Σ_{k≥1} H_k`, which sets the sign of the large-P skewness
/// (`μ3 ~ 3P Σ H_k`). Summed until the weights have decayed below `tol`.
pub fn asymptotic_lag_sum(f: &LinearFilter, spec: &ActivationSpec, tol: f64) -> Result<f64> {
    let n = f.decay_lag(tol) + 1;
    Ok(lag_terms(f, spec, n)?.iter().sum())
}

/// `2 + 9u + 7u² − 8u³` at `u = λ²`: positive while the reverting sigmoid
/// keeps positive asymptotic skewness, in the slow-EMA1 continuum
/// approximation.
pub fn reverting_threshold_polynomial(lambda: f64) -> f64 {
    let u = lambda * lambda;
    2.0 + 9.0 * u + 7.0 * u * u - 8.0 * u * u * u
}

/// The `λ*` at which [`reverting_threshold_polynomial`] changes sign
/// (`λ*² ≈ 1.65`). This is a continuum approximation for a slow EMA1; the
/// exact sign change of `Σ H_k` for a given filter is found with
/// [`asymptotic_lag_sum`].
pub fn reverting_positivity_threshold() -> f64 {
    let roots = solve_cubic(-8.0, 7.0, 9.0, 2.0).expect("fixed non-degenerate cubic");
    let u = roots
        .real_roots()
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    u.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::skew_term_structure;

    fn grid_specs() -> Vec<ActivationSpec> {
        let mut out = Vec::new();
        for l in [0.5, 1.0, 1.5] {
            out.push(ActivationSpec::simple_sigmoid(l).unwrap());
            out.push(ActivationSpec::reverting_sigmoid(l).unwrap());
        }
        for e in [0.3, 0.6, 0.9] {
            out.push(ActivationSpec::double_step(e).unwrap());
        }
        out
    }

    #[test]
    fn closed_forms_match_quadrature() {
        for spec in grid_specs() {
            for rho in [-0.8, -0.2, 0.2, 0.8] {
                let ctx = HkContext::new(0.7, rho).unwrap();
                let c = h_k_closed(&spec, ctx).unwrap();
                let q = h_k_quadrature(&spec, ctx, HK_QUAD_TOL).unwrap();
                assert!((c - q).abs() < 1e-8, "{} ρ={rho}: {c} vs {q}", spec.label());
            }
        }
    }

    #[test]
    fn by_parts_agrees_for_smooth_activations() {
        let ctx = HkContext::new(-0.4, 0.6).unwrap();
        for spec in [
            ActivationSpec::simple_sigmoid(1.0).unwrap(),
            ActivationSpec::reverting_sigmoid(1.2).unwrap(),
            compound_sigmoid_make(2.4, 0.75).unwrap(),
        ] {
            let a = h_k_by_parts(&spec, ctx, 1e-10).unwrap();
            let b = h_k_quadrature(&spec, ctx, 1e-10).unwrap();
            assert!((a - b).abs() < 1e-8);
        }
        assert!(h_k_by_parts(&ActivationSpec::double_step(0.5).unwrap(), ctx, 1e-9).is_err());
    }

    #[test]
    fn zero_correlation_and_sign_limits() {
        for spec in grid_specs() {
            assert_eq!(h_k_closed(&spec, HkContext::new(0.5, 0.0).unwrap()).unwrap(), 0.0);
        }
        let ds = ActivationSpec::double_step(0.0).unwrap();
        for rho in [-0.9, 0.1, 0.7] {
            assert_eq!(h_k_closed(&ds, HkContext::new(0.3, rho).unwrap()).unwrap(), 0.0);
        }
        // reverting sigmoid turns negative when (1 − ρ²)λ⁴ > 1
        let rs = ActivationSpec::reverting_sigmoid(1.5).unwrap();
        let ctx = HkContext::new(1.0, 0.3).unwrap();
        assert!(h_k_closed(&rs, ctx).unwrap() < 0.0);
        let q = h_k_quadrature(&rs, ctx, HK_QUAD_TOL).unwrap();
        assert!((q - h_k_closed(&rs, ctx).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn linear_limits() {
        let ctx = HkContext::new(0.8, 0.6).unwrap();
        let linear = 2.0 * 0.8 * 0.6;
        for spec in [
            ActivationSpec::simple_sigmoid(1e-4).unwrap(),
            ActivationSpec::reverting_sigmoid(1e-4).unwrap(),
        ] {
            assert!((h_k_closed(&spec, ctx).unwrap() - linear).abs() < 1e-6);
        }
        let q = h_k_quadrature(&ActivationSpec::linear(), ctx, HK_QUAD_TOL).unwrap();
        assert!((q - linear).abs() < 1e-10);
    }

    #[test]
    fn odd_in_leading_weight() {
        for spec in grid_specs() {
            let h = h_k_closed(&spec, HkContext::new(0.4, 0.5).unwrap()).unwrap();
            let g = h_k_closed(&spec, HkContext::new(-0.4, 0.5).unwrap()).unwrap();
            assert_eq!(h, -g);
        }
    }

    #[test]
    fn rejects_unit_correlation() {
        assert!(HkContext::new(0.1, 1.0).is_err());
        assert!(HkContext::new(0.1, -1.0).is_err());
    }

    #[test]
    fn compound_quadrature_is_consistent() {
        let spec = compound_sigmoid_make(0.71 / 0.30, 0.75).unwrap();
        let ActivationKind::CompoundSigmoid { w_s, w_r, lambda } = *spec.kind() else {
            unreachable!()
        };
        let ctx = HkContext::new(0.3, 0.5).unwrap();
        let h = h_k_quadrature(&spec, ctx, HK_QUAD_TOL).unwrap();
        assert!(h.is_finite());
        // expand (w_S S + w_R R)² (w_S S + w_R R) and integrate term by term
        let s = ActivationSpec::simple_sigmoid(lambda).unwrap();
        let r = ActivationSpec::reverting_sigmoid(lambda).unwrap();
        let rho = ctx.rho;
        let term = |f1: &ActivationSpec, g1: &ActivationSpec, f2: &ActivationSpec| {
            bivariate_expectation(
                |z1, z2| f1.psi(z1) * g1.psi(z1) * f2.psi(z2) * (z1 - rho * z2) / (2.0 * (1.0 - rho * rho)),
                rho,
                &[],
                &[],
                1e-11,
            )
            .unwrap()
            .value
        };
        let sum = w_s.powi(3) * term(&s, &s, &s)
            + w_s * w_s * w_r * (term(&s, &s, &r) + 2.0 * term(&s, &r, &s))
            + w_s * w_r * w_r * (2.0 * term(&s, &r, &r) + term(&r, &r, &s))
            + w_r.powi(3) * term(&r, &r, &r);
        assert!((h - 2.0 * ctx.a_prev * sum).abs() < 1e-9);
    }

    #[test]
    fn linear_term_structure_matches_linear_module() {
        let f = LinearFilter::ema2(20.0, 40.0, true).unwrap();
        let nl = nonlinear_term_structure(&f, &ActivationSpec::linear(), 500).unwrap();
        let lin = skew_term_structure(&f, 500).unwrap();
        for (a, b) in nl.kappa3.iter().zip(&lin.kappa3) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn term_structure_cases() {
        let f = LinearFilter::ema2(20.0, 40.0, true).unwrap();
        let ds = nonlinear_term_structure(&f, &ActivationSpec::double_step(0.0).unwrap(), 200).unwrap();
        assert!(ds.kappa3.iter().all(|&k| k == 0.0));
        let rs = nonlinear_term_structure(&f, &ActivationSpec::reverting_sigmoid(1.5).unwrap(), 300).unwrap();
        assert!(rs.kappa3.iter().any(|&k| k < 0.0));
        let unnormalized = LinearFilter::ema2(20.0, 40.0, false).unwrap();
        assert!(matches!(
            nonlinear_term_structure(&unnormalized, &ActivationSpec::linear(), 10),
            Err(Error::NotNormalized(_))
        ));
    }

    #[test]
    fn threshold() {
        let l = reverting_positivity_threshold();
        assert!((l * l - 1.65).abs() < 0.01);
        assert!(reverting_threshold_polynomial(1.65f64.sqrt()).abs() < 0.05);
        assert!(reverting_threshold_polynomial(l).abs() < 1e-12);

        let f = LinearFilter::ema1(100.0, true).unwrap();
        let sum = |lambda: f64| asymptotic_lag_sum(&f, &ActivationSpec::reverting_sigmoid(lambda).unwrap(), 1e-14).unwrap();
        assert!(sum(1.2) > 0.0);
        assert!(sum(1.4) < 0.0);
    }
}

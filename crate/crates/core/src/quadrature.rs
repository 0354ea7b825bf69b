//! Gaussian quadrature rules and normal expectations.
//!
//! Two families are provided. Gauss–Hermite rules (probabilists' weight,
//! normalised to a probability measure) are used for smooth integrands.
//! Integrands with jumps, such as step activations, converge slowly under
//! Gauss–Hermite, so they go through a composite Gauss–Legendre rule that
//! splits the real line at the known discontinuities and truncates at
//! |z| = [`NORMAL_TRUNCATION`].
//!
//! Both are driven by node doubling: the rule is refined until two
//! successive levels differ by less than the requested tolerance.

use crate::error::{Error, Result};
use crate::special::norm_pdf;
use nalgebra::{DMatrix, SymmetricEigen};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Half-width of the truncated normal domain. The mass beyond it is ~1.5e-23.
pub const NORMAL_TRUNCATION: f64 = 10.0;

/// Points per Gauss–Legendre panel in composite rules.
const PANEL_ORDER: usize = 16;

/// Gauss–Hermite levels tried by [`normal_expectation`].
const HERMITE_LEVELS: [usize; 6] = [16, 32, 64, 128, 256, 512];

/// Composite panel counts tried for piecewise integrands.
const PANEL_LEVELS: [usize; 6] = [2, 4, 8, 16, 32, 64];

#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Golub–Welsch: nodes are the eigenvalues of the symmetric Jacobi matrix,
/// weights are `mu0` times the squared first eigenvector components.
fn golub_welsch(n: usize, off_diag: impl Fn(usize) -> f64, mu0: f64) -> GaussRule {
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = off_diag(k);
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Symmetrise: the exact rule is symmetric about 0.
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (pairs[j].0 - pairs[i].0);
        let w = 0.5 * (pairs[i].1 + pairs[j].1);
        pairs[i] = (-x, w);
        pairs[j] = (x, w);
    }
    if n % 2 == 1 {
        pairs[n / 2].0 = 0.0;
    }
    GaussRule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

type RuleCache = Mutex<HashMap<usize, Arc<GaussRule>>>;

fn cached(cache: &'static OnceLock<RuleCache>, n: usize, build: impl FnOnce() -> GaussRule) -> Arc<GaussRule> {
    let cache = cache.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().unwrap().get(&n) {
        return Arc::clone(rule);
    }
    let rule = Arc::new(build());
    cache.lock().unwrap().insert(n, Arc::clone(&rule));
    rule
}

/// n-point Gauss–Hermite rule for E[f(Z)], Z ~ N(0, 1). Weights sum to one.
pub fn gauss_hermite(n: usize) -> Arc<GaussRule> {
    static CACHE: OnceLock<RuleCache> = OnceLock::new();
    cached(&CACHE, n, || golub_welsch(n, |k| (k as f64).sqrt(), 1.0))
}

/// n-point Gauss–Legendre rule on [−1, 1].
pub fn gauss_legendre(n: usize) -> Arc<GaussRule> {
    static CACHE: OnceLock<RuleCache> = OnceLock::new();
    cached(&CACHE, n, || {
        golub_welsch(
            n,
            |k| {
                let k = k as f64;
                k / (4.0 * k * k - 1.0).sqrt()
            },
            2.0,
        )
    })
}

/// Composite rule for E[f(Z)] on the truncated normal domain, split at the
/// given breakpoints (those outside the domain are ignored). Each segment is
/// cut into `panels` equal panels. Weights include the normal density.
pub fn composite_normal_rule(breakpoints: &[f64], panels: usize) -> GaussRule {
    let mut cuts = vec![-NORMAL_TRUNCATION];
    let mut inner: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|b| b.is_finite() && b.abs() < NORMAL_TRUNCATION)
        .collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    cuts.extend(inner);
    cuts.push(NORMAL_TRUNCATION);

    let base = gauss_legendre(PANEL_ORDER);
    let mut nodes = Vec::with_capacity((cuts.len() - 1) * panels * PANEL_ORDER);
    let mut weights = Vec::with_capacity(nodes.capacity());
    for seg in cuts.windows(2) {
        let (lo, hi) = (seg[0], seg[1]);
        if hi <= lo {
            continue;
        }
        let h = (hi - lo) / panels as f64;
        for p in 0..panels {
            let a = lo + h * p as f64;
            let mid = a + 0.5 * h;
            for (&x, &w) in base.nodes.iter().zip(&base.weights) {
                let z = mid + 0.5 * h * x;
                nodes.push(z);
                weights.push(0.5 * h * w * norm_pdf(z));
            }
        }
    }
    GaussRule { nodes, weights }
}

/// Result of a refinement sequence.
#[derive(Debug, Clone, Copy)]
pub struct Converged {
    pub value: f64,
    /// Difference between the last two levels.
    pub change: f64,
    /// Nodes (per dimension) at the accepted level.
    pub nodes: usize,
}

/// Runs `eval` over increasing levels until successive values agree to `tol`
/// (absolute, or relative when the value exceeds one in magnitude).
pub fn refine(levels: &[usize], tol: f64, mut eval: impl FnMut(usize) -> f64) -> Result<Converged> {
    let mut prev: Option<f64> = None;
    let mut last_change = f64::INFINITY;
    for &level in levels {
        let value = eval(level);
        if !value.is_finite() {
            return Err(Error::Quadrature(format!("non-finite value at level {level}")));
        }
        if let Some(p) = prev {
            last_change = (value - p).abs();
            if last_change <= tol * value.abs().max(1.0) {
                return Ok(Converged {
                    value,
                    change: last_change,
                    nodes: level,
                });
            }
        }
        prev = Some(value);
    }
    Err(Error::Quadrature(format!(
        "successive levels still differ by {last_change:e} (tolerance {tol:e})"
    )))
}

/// E[f(Z)] for Z ~ N(0, 1). Smooth integrands (no breakpoints) use
/// Gauss–Hermite doubling; otherwise the composite rule is refined.
pub fn normal_expectation(f: impl Fn(f64) -> f64, breakpoints: &[f64], tol: f64) -> Result<Converged> {
    if breakpoints.is_empty() {
        refine(&HERMITE_LEVELS, tol, |n| gauss_hermite(n).integrate(&f))
    } else {
        refine(&PANEL_LEVELS, tol, |panels| {
            composite_normal_rule(breakpoints, panels).integrate(&f)
        })
    }
}

pub(crate) fn hermite_levels() -> &'static [usize] {
    &HERMITE_LEVELS
}

pub(crate) fn panel_levels() -> &'static [usize] {
    &PANEL_LEVELS
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::norm_cdf;

    #[test]
    fn hermite_integrates_normal_moments() {
        let rule = gauss_hermite(20);
        assert!((rule.weights.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        assert!(rule.integrate(|x| x).abs() < 1e-14);
        assert!((rule.integrate(|x| x * x) - 1.0).abs() < 1e-12);
        assert!((rule.integrate(|x| x.powi(4)) - 3.0).abs() < 1e-11);
        assert!((rule.integrate(|x| x.powi(6)) - 15.0).abs() < 1e-10);
    }

    #[test]
    fn legendre_integrates_polynomials() {
        let rule = gauss_legendre(8);
        assert!((rule.integrate(|x| x.powi(14)) - 2.0 / 15.0).abs() < 1e-14);
        assert!((rule.integrate(|_| 1.0) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn composite_rule_handles_a_step() {
        // P(Z > 0.3) through an indicator, exact to quadrature precision.
        let got = normal_expectation(|z| if z > 0.3 { 1.0 } else { 0.0 }, &[0.3], 1e-12).unwrap();
        assert!((got.value - norm_cdf(-0.3)).abs() < 1e-13);
    }

    #[test]
    fn refine_reports_non_convergence() {
        let err = refine(&[1, 2, 3], 1e-9, |n| n as f64).unwrap_err();
        assert!(matches!(err, Error::Quadrature(_)));
    }
}

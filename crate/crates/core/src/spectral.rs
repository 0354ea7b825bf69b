//! Quadratic-form view of the P-period return of a linear strategy.
//!
//! With `u = [U_{n+P}, U_{n+P−1}, …]′` the return is `Y = u′Γu` where
//! `Γ[r][r+1+j] = Γ[r+1+j][r] = a_j/2` for the first P rows `r`. So
//! `⟨Y⟩ = tr Γ = 0`, `⟨Y²⟩ = 2 tr Γ²` and `⟨Y³⟩ = 8 tr Γ³` for returns with
//! Gaussian second and third moments, and `Y = Σ γ_j (e_j·u)²`.
//!
//! Γ is infinite; it is truncated at `L` lags beyond the window, where the
//! weights have decayed below a tolerance. For Gaussian returns the
//! moment generating function reduces to a P×P determinant with the
//! history integrated out exactly.

use crate::error::{Error, Result};
use crate::filter::LinearFilter;
use crate::special::norm_cdf;
use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use std::f64::consts::PI;

pub const DEFAULT_TRUNCATION_TOL: f64 = 1e-12;

/// Relative threshold below which an eigenvalue counts as zero.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct GammaOperator {
    pub p: usize,
    /// Truncation lag: the matrix has dimension `p + lag`.
    pub lag: usize,
    pub matrix: DMatrix<f64>,
    pub filter: LinearFilter,
}

pub fn gamma_matrix(f: &LinearFilter, p: usize, tol: f64) -> Result<GammaOperator> {
    if p == 0 {
        return Err(Error::param("P", "period must be at least 1"));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::param("tol", format!("must lie in (0, 1), got {tol}")));
    }
    let lag = f.decay_lag(tol);
    let dim = p + lag;
    let a = f.weights(dim);
    let mut matrix = DMatrix::zeros(dim, dim);
    for r in 0..p {
        for c in r + 1..dim {
            let v = 0.5 * a[c - r - 1];
            matrix[(r, c)] = v;
            matrix[(c, r)] = v;
        }
    }
    Ok(GammaOperator { p, lag, matrix, filter: f.clone() })
}

impl GammaOperator {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `u′Γu`, with `u` ordered most recent first.
    pub fn quadratic_form(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.dim() {
            return Err(Error::param("u", format!("expected length {}, got {}", self.dim(), u.len())));
        }
        let u = DVector::from_column_slice(u);
        Ok(u.dot(&(&self.matrix * &u)))
    }
}

/// The strategy return computed directly from a return vector ordered like
/// `u`: `Σ_{r<P} U_r Σ_j a_j U_{r+1+j}`, with the history cut at `u.len()`.
pub fn strategy_return(f: &LinearFilter, p: usize, u: &[f64]) -> f64 {
    let a = f.weights(u.len());
    (0..p.min(u.len()))
        .map(|r| {
            let signal: f64 = u[r + 1..].iter().zip(&a).map(|(x, w)| x * w).sum();
            u[r] * signal
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceMoments {
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
}

pub fn trace_moments(g: &GammaOperator) -> TraceMoments {
    let m = &g.matrix;
    let square = m * m;
    TraceMoments {
        m1: m.trace(),
        m2: 2.0 * m.norm_squared(),
        m3: 8.0 * square.component_mul(m).sum(),
    }
}

#[derive(Debug, Clone)]
pub struct EigenSummary {
    /// All eigenvalues, largest first.
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors as columns, in the order of `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
    pub n_pos: usize,
    pub n_neg: usize,
    pub rank: usize,
}

/// Single pole and `a_j ∝ α^j` from `j = 0`, as for EMA1: the rows past
/// the window are then all proportional and the rank is `P + 1`.
fn has_geometric_weights(f: &LinearFilter) -> bool {
    let poles = f.poles();
    if poles.len() != 1 || f.is_coalesced() {
        return false;
    }
    let (a0, a1) = (f.weight(0), f.weight(1));
    (a1 - poles[0].re * a0).abs() <= 1e-12 * a0.abs().max(1e-300)
}

pub fn eigen_summary(g: &GammaOperator) -> Result<EigenSummary> {
    let dim = g.dim();
    let eig = SymmetricEigen::try_new(g.matrix.clone(), f64::EPSILON, 1000 * dim)
        .ok_or_else(|| Error::Numerical("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = DMatrix::from_fn(dim, dim, |r, c| eig.eigenvectors[(r, order[c])]);
    let max = eigenvalues.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let cut = RANK_TOL * max;
    let n_pos = eigenvalues.iter().filter(|&&x| x > cut).count();
    let n_neg = eigenvalues.iter().filter(|&&x| x < -cut).count();
    let rank = n_pos + n_neg;
    if rank > 2 * g.p {
        return Err(Error::Numerical(format!("rank {rank} exceeds 2P = {}", 2 * g.p)));
    }
    if has_geometric_weights(&g.filter) && rank != g.p + 1 {
        return Err(Error::Numerical(format!("single-pole rank {rank}, expected P + 1 = {}", g.p + 1)));
    }
    Ok(EigenSummary { eigenvalues, eigenvectors, n_pos, n_neg, rank })
}

/// `Ĝ(s)` with `Ĝ_jk = ½s² Σ_{l≥−1} a_{j+l} a_{k+l} + ½s 1_{j≠k} a_{|k−j|−1}`
/// for `j, k = 1..=P`.
#[derive(Debug, Clone)]
pub struct MgfMatrix {
    pub p: usize,
    pub s: f64,
    pub matrix: DMatrix<f64>,
}

/// The `s`-independent pieces of `Ĝ(s) = ½s² T + ½s W`.
struct MgfParts {
    tails: DMatrix<f64>,
    window: DMatrix<f64>,
}

impl MgfParts {
    fn new(f: &LinearFilter, p: usize) -> Self {
        let a = f.weights(p);
        let tails = DMatrix::from_fn(p, p, |j, k| f.tail_autocovariance(j.min(k), j.abs_diff(k)));
        let window = DMatrix::from_fn(p, p, |j, k| if j == k { 0.0 } else { a[j.abs_diff(k) - 1] });
        Self { tails, window }
    }

    fn at(&self, s: f64) -> DMatrix<f64> {
        &self.tails * (0.5 * s * s) + &self.window * (0.5 * s)
    }

    fn log_mgf(&self, s: f64) -> Result<f64> {
        let x = self.at(s) * 2.0;
        let norm = x.norm();
        if norm < SERIES_RADIUS {
            return Ok(0.5 * log_det_series(&x, norm));
        }
        let n = x.nrows();
        let chol = Cholesky::new(DMatrix::identity(n, n) - x).ok_or(Error::MgfDomain(s))?;
        let log_det: f64 = chol.l_dirty().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        Ok(-0.5 * log_det)
    }
}

/// Below this Frobenius norm of `X = 2Ĝ`, `−log det(I − X)` is summed as
/// `Σ tr(Xⁿ)/n`. Near the origin this keeps full relative precision,
/// which a factorisation of `I − X` loses to cancellation against 1.
const SERIES_RADIUS: f64 = 0.25;

fn log_det_series(x: &DMatrix<f64>, norm: f64) -> f64 {
    let mut power = x.clone();
    let mut sum = power.trace();
    let mut bound = norm;
    for n in 2.. {
        bound *= norm;
        if bound < 1e-17 * sum.abs() || bound < 1e-300 {
            break;
        }
        power = &power * x;
        sum += power.trace() / n as f64;
    }
    sum
}

pub fn mgf_matrix(f: &LinearFilter, p: usize, s: f64) -> Result<MgfMatrix> {
    if p == 0 {
        return Err(Error::param("P", "period must be at least 1"));
    }
    Ok(MgfMatrix { p, s, matrix: MgfParts::new(f, p).at(s) })
}

/// `log F_P(s) = −½ log det(I − 2Ĝ(s))`. Outside the convergence strip
/// (no Cholesky factor) the result is [`Error::MgfDomain`].
pub fn log_mgf(f: &LinearFilter, p: usize, s: f64) -> Result<f64> {
    if p == 0 {
        return Err(Error::param("P", "period must be at least 1"));
    }
    MgfParts::new(f, p).log_mgf(s)
}

pub fn mgf(f: &LinearFilter, p: usize, s: f64) -> Result<f64> {
    log_mgf(f, p, s).map(f64::exp)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MgfCumulants {
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa3: f64,
    /// The base differencing step.
    pub step: f64,
}

/// Central differences of degree 1..=3 at step h.
fn differences(parts: &MgfParts, h: f64) -> Result<[f64; 3]> {
    let l = |s: f64| parts.log_mgf(s);
    let (p1, m1, p2, m2) = (l(h)?, l(-h)?, l(2.0 * h)?, l(-2.0 * h)?);
    Ok([
        (p1 - m1) / (2.0 * h),
        (p1 + m1) / (h * h),
        (p2 - 2.0 * p1 + 2.0 * m1 - m2) / (2.0 * h * h * h),
    ])
}

/// First three cumulants of `Y` under Gaussian returns, from central
/// differences of `log F` at `h = 10⁻³/√(P R_0)`, `h/2`, `h/4` and two
/// Richardson levels.
pub fn cumulants_from_mgf(f: &LinearFilter, p: usize) -> Result<MgfCumulants> {
    if p == 0 {
        return Err(Error::param("P", "period must be at least 1"));
    }
    let r0 = f.autocovariance(0);
    if !(r0 > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let scale = (p as f64 * r0).sqrt();
    let h = 1e-3 / scale;
    let parts = MgfParts::new(f, p);
    let d = [differences(&parts, h)?, differences(&parts, h / 2.0)?, differences(&parts, h / 4.0)?];
    let mut out = [0.0; 3];
    for n in 0..3 {
        let (d0, d1, d2) = (d[0][n], d[1][n], d[2][n]);
        let (e1, e2) = ((d1 - d0).abs(), (d2 - d1).abs());
        let r1 = (4.0 * d1 - d0) / 3.0;
        let r2 = (4.0 * d2 - d1) / 3.0;
        let value = (16.0 * r2 - r1) / 15.0;
        if e2 > e1 && e2 > 1e-6 * scale.powi(n as i32 + 1) {
            return Err(Error::Numerical(format!(
                "unstable differencing for cumulant {}: successive changes {e1:e}, {e2:e}",
                n + 1
            )));
        }
        out[n] = value;
    }
    Ok(MgfCumulants { kappa1: out[0], kappa2: out[1], kappa3: out[2], step: h })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GramCharlier {
    pub probability: f64,
    /// Set when the raw value fell outside [0, 1].
    pub clamped: bool,
}

/// `P(Y > 0) ≈ Φ(𝔯) − κ3/(6√(2π))` for Sharpe ratio `𝔯`.
pub fn gram_charlier_prob(kappa3: f64, sharpe: f64) -> GramCharlier {
    let raw = norm_cdf(sharpe) - kappa3 / (6.0 * (2.0 * PI).sqrt());
    let probability = raw.clamp(0.0, 1.0);
    GramCharlier { probability, clamped: probability != raw }
}

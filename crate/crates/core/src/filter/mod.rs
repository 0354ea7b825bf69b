//! Causal moving-average filters of returns.
//!
//! A filter maps past risk-adjusted returns to a momentum signal
//! `V_n = Σ_{j≥0} a_j U_{n−j}`. Filters built from EMAs have a rational
//! system function
//!
//! ```text
//! A(z) = Σ_j a_j z^{−j} = a0 + Σ_k ρ_k / (z − α_k)
//! ```
//!
//! where `ρ_k` is the residue of `A` at the pole `α_k`. Expanding the
//! partial fractions gives the weights `a_j = Σ_k ρ_k α_k^{j−1}` for `j ≥ 1`.
//! Every quantity the rest of the crate needs (autocovariances, moments,
//! Γ-matrix entries) is computed from this pole–residue form by closed-form
//! geometric sums.
//!
//! The EMA2 with equal speeds has a double pole and is kept as a separate
//! shape, evaluated through explicit limit formulas.

mod kernel;
mod state;

pub use kernel::{variational_residual, ContinuousKernel, PathLength};
pub use state::FilterState;

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Poles closer than this are treated as coincident.
pub const POLE_SEPARATION_TOL: f64 = 1e-10;

/// Imaginary parts below this are discarded when a real value is expected.
pub const REALNESS_TOL: f64 = 1e-12;

const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Shape {
    /// `A(z) = a0 + Σ ρ_k/(z − α_k)` with simple poles.
    Simple {
        poles: Vec<Complex64>,
        residues: Vec<Complex64>,
        a0: f64,
    },
    /// `A(z) = z²/(z − α)²`, i.e. `a_j = (j + 1) α^j`.
    DoublePole { alpha: f64 },
}

/// A linear momentum filter in pole–residue form.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFilter {
    pub(crate) shape: Shape,
    gain: f64,
    normalized: bool,
}

/// Decay factor of an EMA with effective period `n`: `α = 1 − 1/n`.
pub fn decay_factor(n: f64) -> Result<f64> {
    if !(n >= 1.0) || !n.is_finite() {
        return Err(Error::InvalidPeriod(n));
    }
    Ok(1.0 - 1.0 / n)
}

/// Σ_{j≥0} (j + 1) x^j
fn s1(x: f64) -> f64 {
    1.0 / ((1.0 - x) * (1.0 - x))
}

/// Σ_{j≥0} (j + 1)² x^j
fn s2(x: f64) -> f64 {
    (1.0 + x) / (1.0 - x).powi(3)
}

impl LinearFilter {
    /// Builds a filter from poles, residues and leading weight, enforcing
    /// every structural invariant: `0 < |α| < 1`, pairwise separation of at
    /// least [`POLE_SEPARATION_TOL`], and conjugate closure (complex poles
    /// come in pairs with conjugate residues).
    pub fn from_poles(poles: Vec<Complex64>, residues: Vec<Complex64>, a0: f64) -> Result<Self> {
        let filter = Self::from_poles_unchecked(poles, residues, a0)?;
        let report = filter.sprz_check();
        if !report.passes() {
            return Err(Error::NotSprz(report.violations.join("; ")));
        }
        Ok(filter)
    }

    /// Like [`from_poles`](Self::from_poles) but only checks that the input
    /// is well formed. Useful for building counterexamples for
    /// [`sprz_check`](Self::sprz_check); operations that rely on SPRZ reject
    /// such filters themselves.
    pub fn from_poles_unchecked(poles: Vec<Complex64>, residues: Vec<Complex64>, a0: f64) -> Result<Self> {
        if poles.len() != residues.len() {
            return Err(Error::param(
                "residues",
                format!("{} poles but {} residues", poles.len(), residues.len()),
            ));
        }
        if !a0.is_finite() || poles.iter().chain(&residues).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::param("poles", "non-finite pole, residue or leading weight"));
        }
        Ok(Self {
            shape: Shape::Simple { poles, residues, a0 },
            gain: 1.0,
            normalized: false,
        })
    }

    /// EMA1 of returns with period `n`: `a_j = α^{j+1}`, `A(z) = αz/(z − α)`.
    /// Normalised, `a_j = (1 − α²)^{1/2} α^j` and `R_k = α^k`.
    ///
    /// `n = 1` gives `α = 0`, the zero filter; it cannot be normalised.
    pub fn ema1(n: f64, normalized: bool) -> Result<Self> {
        let alpha = decay_factor(n)?;
        let filter = if alpha == 0.0 {
            Self::zero()
        } else {
            let a = Complex64::new(alpha, 0.0);
            Self::from_poles(vec![a], vec![a * a], alpha)?
        };
        if normalized {
            filter.normalize()
        } else {
            Ok(filter)
        }
    }

    /// EMA2 (difference of two EMAs of price, i.e. a double EMA of returns):
    /// `a_j = (α^{j+1} − β^{j+1})/(α − β)` and `A(z) = z²/((z − α)(z − β))`.
    ///
    /// Equal periods give the coalesced limit `a_j = (j + 1) α^j`. A period of
    /// one removes that pole and leaves an EMA1 up to gain.
    pub fn ema2(n_alpha: f64, n_beta: f64, normalized: bool) -> Result<Self> {
        let alpha = decay_factor(n_alpha)?;
        let beta = decay_factor(n_beta)?;
        let filter = match (alpha == 0.0, beta == 0.0) {
            (true, true) => Self::from_poles(vec![], vec![], 1.0)?,
            // z/(z − γ) = 1 + γ/(z − γ)
            (true, false) | (false, true) => {
                let g = Complex64::new(alpha.max(beta), 0.0);
                Self::from_poles(vec![g], vec![g], 1.0)?
            }
            _ if alpha == beta => Self {
                shape: Shape::DoublePole { alpha },
                gain: 1.0,
                normalized: false,
            },
            _ => {
                let (a, b) = (Complex64::new(alpha, 0.0), Complex64::new(beta, 0.0));
                Self::from_poles(vec![a, b], vec![a * a / (a - b), -b * b / (a - b)], 1.0)?
            }
        };
        if normalized {
            filter.normalize()
        } else {
            Ok(filter)
        }
    }

    /// Crossover of two EMA1s of returns, `a_j = |β^{j+1} − α^{j+1}|`: the
    /// EMA2 scaled by `|α − β|`, oriented so the weights are positive. This is
    /// the component used for hybrid fast/slow models.
    pub fn ema_crossover(n_fast: f64, n_slow: f64) -> Result<Self> {
        let alpha = decay_factor(n_fast)?;
        let beta = decay_factor(n_slow)?;
        if alpha == beta {
            return Err(Error::param("n_slow", "crossover needs two different periods"));
        }
        Ok(Self::ema2(n_fast, n_slow, false)?.scaled((alpha - beta).abs()))
    }

    fn zero() -> Self {
        Self {
            shape: Shape::Simple {
                poles: vec![],
                residues: vec![],
                a0: 0.0,
            },
            gain: 1.0,
            normalized: false,
        }
    }

    /// Linear combination `Σ w_i F_i`. Pole sets are merged; any two poles
    /// closer than [`POLE_SEPARATION_TOL`] (identical ones included) are an
    /// error, since the result would no longer have simple poles.
    pub fn combine(filters: &[LinearFilter], weights: &[f64]) -> Result<Self> {
        if filters.len() != weights.len() {
            return Err(Error::param(
                "weights",
                format!("{} filters but {} weights", filters.len(), weights.len()),
            ));
        }
        if filters.is_empty() {
            return Err(Error::param("filters", "nothing to combine"));
        }
        let mut poles = Vec::new();
        let mut residues = Vec::new();
        let mut a0 = 0.0;
        for (f, &w) in filters.iter().zip(weights) {
            let (p, r, lead) = f.simple_terms().ok_or_else(|| {
                Error::NotSprz("coalesced (double-pole) filters cannot be combined".into())
            })?;
            for (pk, rk) in p.into_iter().zip(r) {
                if let Some(&q) = poles.iter().find(|q: &&Complex64| (**q - pk).norm() < POLE_SEPARATION_TOL) {
                    return Err(Error::CoincidentPoles(q, pk));
                }
                poles.push(pk);
                residues.push(rk * w);
            }
            a0 += w * lead;
        }
        let mut out = Self::from_poles(poles, residues, a0)?;
        out.normalized = (out.autocovariance(0) - 1.0).abs() < NORMALIZATION_TOL;
        Ok(out)
    }

    /// Rescales to unit variance of the output, `R_0 = 1`.
    pub fn normalize(&self) -> Result<Self> {
        let r0 = self.autocovariance(0);
        if !(r0 > 0.0) || !r0.is_finite() {
            return Err(Error::param("normalized", format!("cannot normalise a filter with R_0 = {r0}")));
        }
        let mut out = self.clone();
        out.gain = self.gain / r0.sqrt();
        out.normalized = true;
        Ok(out)
    }

    /// The filter with every weight multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.gain *= c;
        out.normalized = self.normalized && (c.abs() - 1.0).abs() < NORMALIZATION_TOL;
        out
    }

    /// All weights negated: a pure counter-trend version of the filter.
    pub fn negated(&self) -> Self {
        self.scaled(-1.0)
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// True for the coalesced (double-pole) EMA2.
    pub fn is_coalesced(&self) -> bool {
        matches!(self.shape, Shape::DoublePole { .. })
    }

    /// Distinct poles (a double pole is listed once).
    pub fn poles(&self) -> Vec<Complex64> {
        match &self.shape {
            Shape::Simple { poles, .. } => poles.clone(),
            Shape::DoublePole { alpha } => vec![Complex64::new(*alpha, 0.0)],
        }
    }

    /// Residues including the gain; `None` for the double-pole shape.
    pub fn residues(&self) -> Option<Vec<Complex64>> {
        self.simple_terms().map(|(_, r, _)| r)
    }

    /// `a0`, the limit of `A(z)` as `z → ∞`, including the gain.
    pub fn leading_weight(&self) -> f64 {
        self.weight(0)
    }

    pub fn max_pole_modulus(&self) -> f64 {
        self.poles().iter().fold(0.0, |m, p| m.max(p.norm()))
    }

    /// Poles, gain-scaled residues and gain-scaled `a0` of a simple-pole filter.
    pub(crate) fn simple_terms(&self) -> Option<(Vec<Complex64>, Vec<Complex64>, f64)> {
        match &self.shape {
            Shape::Simple { poles, residues, a0 } => Some((
                poles.clone(),
                residues.iter().map(|r| r * self.gain).collect(),
                a0 * self.gain,
            )),
            Shape::DoublePole { .. } => None,
        }
    }

    /// Weight `a_j`.
    pub fn weight(&self, j: usize) -> f64 {
        match &self.shape {
            Shape::Simple { poles, residues, a0 } => {
                if j == 0 {
                    return self.gain * a0;
                }
                let s: Complex64 = poles
                    .iter()
                    .zip(residues)
                    .map(|(p, r)| r * p.powu((j - 1) as u32))
                    .sum();
                self.gain * s.re
            }
            Shape::DoublePole { alpha } => self.gain * (j as f64 + 1.0) * alpha.powi(j as i32),
        }
    }

    /// The first `n` weights, computed by running powers.
    pub fn weights(&self, n: usize) -> Vec<f64> {
        match &self.shape {
            Shape::Simple { poles, residues, a0 } => {
                let mut out = Vec::with_capacity(n);
                if n == 0 {
                    return out;
                }
                out.push(self.gain * a0);
                let mut terms: Vec<Complex64> = residues.iter().map(|r| r * self.gain).collect();
                for _ in 1..n {
                    out.push(terms.iter().sum::<Complex64>().re);
                    for (t, p) in terms.iter_mut().zip(poles) {
                        *t *= p;
                    }
                }
                out
            }
            Shape::DoublePole { .. } => (0..n).map(|j| self.weight(j)).collect(),
        }
    }

    /// `A(α_k⁻¹)` for each pole of a simple-pole filter (gain included).
    pub(crate) fn image_values(&self) -> Option<Vec<Complex64>> {
        let (poles, residues, a0) = self.simple_terms()?;
        Some(
            poles
                .iter()
                .map(|&pk| {
                    let inv = pk.inv();
                    a0 + poles
                        .iter()
                        .zip(&residues)
                        .map(|(pn, rn)| rn / (inv - pn))
                        .sum::<Complex64>()
                })
                .collect(),
        )
    }

    /// Autocovariance of the impulse response, `R_k = Σ_{j≥0} a_j a_{j+k}`,
    /// by closed-form geometric sums.
    ///
    /// For simple poles, `R_0 = a0² + Σ_{m,n} ρ_m ρ_n / (1 − α_m α_n)` and for
    /// `k ≥ 1`, `R_k = Σ_n ρ_n A(α_n⁻¹) α_n^{k−1}`.
    pub fn autocovariance(&self, k: usize) -> f64 {
        match &self.shape {
            Shape::Simple { .. } => {
                let (poles, residues, a0) = self.simple_terms().unwrap();
                if k == 0 {
                    let mut s = Complex64::new(a0 * a0, 0.0);
                    for (pm, rm) in poles.iter().zip(&residues) {
                        for (pn, rn) in poles.iter().zip(&residues) {
                            s += rm * rn / (1.0 - pm * pn);
                        }
                    }
                    s.re
                } else {
                    let images = self.image_values().unwrap();
                    poles
                        .iter()
                        .zip(&residues)
                        .zip(&images)
                        .map(|((p, r), img)| r * img * p.powu((k - 1) as u32))
                        .sum::<Complex64>()
                        .re
                }
            }
            Shape::DoublePole { alpha } => {
                let x = alpha * alpha;
                self.gain * self.gain * alpha.powi(k as i32) * (s2(x) + k as f64 * s1(x))
            }
        }
    }

    /// Tail of the autocovariance sum, `Σ_{m≥start} a_m a_{m+lag}`, in
    /// closed form. `start = 0` is [`autocovariance`](Self::autocovariance).
    pub fn tail_autocovariance(&self, start: usize, lag: usize) -> f64 {
        if start == 0 {
            return self.autocovariance(lag);
        }
        match &self.shape {
            Shape::Simple { .. } => {
                let (poles, residues, _) = self.simple_terms().unwrap();
                let mut s = Complex64::new(0.0, 0.0);
                for (pm, rm) in poles.iter().zip(&residues) {
                    let head_m = rm * pm.powu((start - 1) as u32);
                    for (pn, rn) in poles.iter().zip(&residues) {
                        s += head_m * rn * pn.powu((start - 1 + lag) as u32) / (1.0 - pm * pn);
                    }
                }
                s.re
            }
            Shape::DoublePole { alpha } => {
                // Σ_i (i + p)(i + q) x^{start+i} α^lag, p = start + 1, q = start + lag + 1
                let x = alpha * alpha;
                let p = (start + 1) as f64;
                let q = (start + lag + 1) as f64;
                let om = 1.0 - x;
                let sum = x * (1.0 + x) / om.powi(3) + (p + q) * x / (om * om) + p * q / om;
                self.gain * self.gain * alpha.powi(lag as i32) * x.powi(start as i32) * sum
            }
        }
    }

    /// The system function `A(z)` (gain included).
    pub fn system_value(&self, z: Complex64) -> Result<Complex64> {
        match &self.shape {
            Shape::Simple { poles, residues, a0 } => {
                let mut s = Complex64::new(*a0, 0.0);
                for (p, r) in poles.iter().zip(residues) {
                    let d = z - p;
                    if d.norm() <= 1e-14 * p.norm().max(1.0) {
                        return Err(Error::PoleEvaluation(z));
                    }
                    s += r / d;
                }
                Ok(s * self.gain)
            }
            Shape::DoublePole { alpha } => {
                let d = z - alpha;
                if d.norm() <= 1e-14 {
                    return Err(Error::PoleEvaluation(z));
                }
                Ok(self.gain * z * z / (d * d))
            }
        }
    }

    /// `A(0)`, the value of the rational continuation at the origin.
    pub fn origin_value(&self) -> Result<f64> {
        Ok(self.system_value(Complex64::new(0.0, 0.0))?.re)
    }

    /// Smallest `L` with `max|α|^L < tol` (for a double pole the linear
    /// prefactor is included), i.e. the lag beyond which weights are
    /// negligible.
    pub fn decay_lag(&self, tol: f64) -> usize {
        let m = self.max_pole_modulus();
        if m == 0.0 {
            return 1;
        }
        let mut lag = (tol.ln() / m.ln()).ceil().max(1.0) as usize;
        if self.is_coalesced() {
            while (lag as f64 + 1.0) * m.powi(lag as i32) >= tol {
                lag += 1;
            }
        }
        lag
    }

    /// Diagnostics for the SPRZ conditions (simple poles, regular at zero,
    /// bounded outside the unit circle).
    pub fn sprz_check(&self) -> SprzReport {
        let poles = self.poles();
        let pole_moduli: Vec<f64> = poles.iter().map(|p| p.norm()).collect();
        let max_modulus = pole_moduli.iter().fold(0.0f64, |m, &x| m.max(x));
        let mut min_separation: Option<f64> = None;
        for i in 0..poles.len() {
            for j in i + 1..poles.len() {
                let d = (poles[i] - poles[j]).norm();
                min_separation = Some(min_separation.map_or(d, |m| m.min(d)));
            }
        }
        let mut violations = Vec::new();
        let inside_unit_circle = pole_moduli.iter().all(|&m| m < 1.0);
        if !inside_unit_circle {
            violations.push(format!("pole modulus {max_modulus} is not inside the unit circle"));
        }
        let regular_at_origin = pole_moduli.iter().all(|&m| m > 0.0);
        if !regular_at_origin {
            violations.push("pole at the origin".to_string());
        }
        let mut simple_poles = min_separation.is_none_or(|d| d >= POLE_SEPARATION_TOL);
        if !simple_poles {
            violations.push(format!(
                "poles separated by {:e} < {POLE_SEPARATION_TOL:e}",
                min_separation.unwrap()
            ));
        }
        if self.is_coalesced() {
            simple_poles = false;
            violations.push("double pole (coalesced EMA2)".to_string());
        }
        let conjugate_closed = match &self.shape {
            Shape::Simple { poles, residues, .. } => poles.iter().zip(residues).all(|(p, r)| {
                if p.im.abs() <= REALNESS_TOL {
                    r.im.abs() <= REALNESS_TOL * r.norm().max(1.0)
                } else {
                    poles.iter().zip(residues).any(|(q, s)| {
                        (q - p.conj()).norm() <= REALNESS_TOL && (s - r.conj()).norm() <= REALNESS_TOL * r.norm().max(1.0)
                    })
                }
            }),
            Shape::DoublePole { .. } => true,
        };
        if !conjugate_closed {
            violations.push("complex poles/residues are not closed under conjugation".to_string());
        }
        let origin_value = if regular_at_origin { self.origin_value().ok() } else { None };
        let lead = self.leading_weight();
        let origin_residue_mismatch = origin_value.is_some_and(|a_origin| {
            let contour = a_origin * lead;
            let squared = a_origin * a_origin;
            (contour - squared).abs() > 1e-12 * contour.abs().max(squared.abs()).max(1e-300)
        });
        SprzReport {
            pole_moduli,
            max_modulus,
            min_separation,
            simple_poles,
            inside_unit_circle,
            regular_at_origin,
            conjugate_closed,
            origin_value,
            origin_residue_mismatch,
            violations,
        }
    }

    /// Errors unless the filter is SPRZ.
    pub fn require_sprz(&self) -> Result<()> {
        let report = self.sprz_check();
        if report.passes() {
            Ok(())
        } else {
            Err(Error::NotSprz(report.violations.join("; ")))
        }
    }

    /// Fresh recursive state for computing `V_n` one return at a time.
    pub fn state(&self) -> FilterState {
        FilterState::new(self)
    }

    pub(crate) fn double_pole_alpha(&self) -> Option<f64> {
        match self.shape {
            Shape::DoublePole { alpha } => Some(alpha),
            Shape::Simple { .. } => None,
        }
    }

    /// Σ_{j≥0}(j+1)x^j and Σ_{j≥0}(j+1)²x^j at x = α², for the double pole.
    pub(crate) fn double_pole_sums(alpha: f64) -> (f64, f64) {
        let x = alpha * alpha;
        (s1(x), s2(x))
    }
}

/// Outcome of [`LinearFilter::sprz_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct SprzReport {
    pub pole_moduli: Vec<f64>,
    pub max_modulus: f64,
    /// `None` with fewer than two poles.
    pub min_separation: Option<f64>,
    pub simple_poles: bool,
    pub inside_unit_circle: bool,
    pub regular_at_origin: bool,
    pub conjugate_closed: bool,
    /// `A(0)` when defined.
    pub origin_value: Option<f64>,
    /// The residue of `A(z)A(1/z)/z` at the origin is `A(0)·a0`. This flags
    /// filters where that differs from `A(0)²`.
    pub origin_residue_mismatch: bool,
    pub violations: Vec<String>,
}

impl SprzReport {
    pub fn passes(&self) -> bool {
        self.violations.is_empty()
    }
}

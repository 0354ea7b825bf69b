//! Moments of the P-period trading return of a linear strategy.
//!
//! With position `V_n = Σ a_j U_{n−j}` and i.i.d. returns with moments
//! (0, 1, 0), the P-period return `Y = Σ_{n=1}^{P} V_{n−1} U_n` has
//!
//! ```text
//! μ2(P) = P R_0
//! μ3(P) = 6 Σ_{k=1}^{P−1} (P − k) a_{k−1} R_k
//! ```
//!
//! The second sum collapses to a closed form over pairs of poles, so the
//! whole skewness term structure costs O(poles²) per period.

use crate::cubic::{solve_cubic, CubicRoots};
use crate::error::{Error, Result};
use crate::filter::{decay_factor, LinearFilter};
use crate::term::MomentTermStructure;
use num_complex::Complex64;

/// Periods up to which the coalesced-pole sums are evaluated term by term.
const DOUBLE_POLE_DIRECT_LIMIT: usize = 2048;

fn check_period(p: usize) -> Result<()> {
    if p == 0 {
        Err(Error::param("P", "period must be at least 1"))
    } else {
        Ok(())
    }
}

/// `μ2(P) = P R_0`.
pub fn second_moment(f: &LinearFilter, p: usize) -> Result<f64> {
    check_period(p)?;
    Ok(p as f64 * f.autocovariance(0))
}

/// Third moment by direct summation, `6 Σ_{k=1}^{P−1} (P − k) a_{k−1} R_k`.
/// This is the reference the closed form is checked against.
pub fn third_moment_direct(f: &LinearFilter, p: usize) -> Result<f64> {
    check_period(p)?;
    let a = f.weights(p.saturating_sub(1));
    Ok(6.0
        * (1..p)
            .map(|k| (p - k) as f64 * a[k - 1] * f.autocovariance(k))
            .sum::<f64>())
}

/// Sum of `|terms|` in [`third_moment_direct`]: the natural scale for
/// judging relative error when the third moment itself crosses zero.
pub fn third_moment_scale(f: &LinearFilter, p: usize) -> Result<f64> {
    check_period(p)?;
    let a = f.weights(p.saturating_sub(1));
    Ok(6.0
        * (1..p)
            .map(|k| ((p - k) as f64 * a[k - 1] * f.autocovariance(k)).abs())
            .sum::<f64>())
}

/// Third moment in closed form:
///
/// ```text
/// μ3(P) = 6P Σ_j ρ_j A(α_j⁻¹)² − 6A(0) Σ_j ρ_j A(α_j⁻¹)
///         − 6 Σ_{j,k} ρ_j ρ_k α_j⁻¹ A(α_k⁻¹) (1 − α_j^P α_k^P)/(1 − α_j α_k)²
/// ```
///
/// The coalesced EMA2 goes through the equivalent double-pole limit.
pub fn third_moment_closed(f: &LinearFilter, p: usize) -> Result<f64> {
    check_period(p)?;
    if p == 1 {
        return Ok(0.0);
    }
    if let Some(alpha) = f.double_pole_alpha() {
        return Ok(double_pole_third_moment(alpha, f.gain(), p));
    }
    f.require_sprz()?;
    let (poles, residues, _) = f.simple_terms().expect("simple-pole filter");
    let images = f.image_values().expect("simple-pole filter");
    let origin = f.origin_value()?;
    let pf = p as f64;
    let mut linear = Complex64::new(0.0, 0.0);
    let mut cross = Complex64::new(0.0, 0.0);
    for (r, img) in residues.iter().zip(&images) {
        linear += r * img * img;
        cross += r * img;
    }
    let mut pair = Complex64::new(0.0, 0.0);
    for (pj, rj) in poles.iter().zip(&residues) {
        let lead = rj / pj;
        for ((pk, rk), img) in poles.iter().zip(&residues).zip(&images) {
            let x = pj * pk;
            let om = 1.0 - x;
            pair += lead * rk * img * (1.0 - x.powu(p as u32)) / (om * om);
        }
    }
    Ok((6.0 * pf * linear - 6.0 * origin * cross - 6.0 * pair).re)
}

/// Value and first two derivatives of a function of one variable.
#[derive(Debug, Clone, Copy)]
struct Jet2 {
    v: f64,
    d1: f64,
    d2: f64,
}

impl Jet2 {
    fn var(x: f64) -> Self {
        Self { v: x, d1: 1.0, d2: 0.0 }
    }
    fn constant(c: f64) -> Self {
        Self { v: c, d1: 0.0, d2: 0.0 }
    }
    fn add(self, o: Self) -> Self {
        Self {
            v: self.v + o.v,
            d1: self.d1 + o.d1,
            d2: self.d2 + o.d2,
        }
    }
    fn sub(self, o: Self) -> Self {
        self.add(o.scale(-1.0))
    }
    fn scale(self, c: f64) -> Self {
        Self {
            v: c * self.v,
            d1: c * self.d1,
            d2: c * self.d2,
        }
    }
    fn mul(self, o: Self) -> Self {
        Self {
            v: self.v * o.v,
            d1: self.d1 * o.v + self.v * o.d1,
            d2: self.d2 * o.v + 2.0 * self.d1 * o.d1 + self.v * o.d2,
        }
    }
    fn recip(self) -> Self {
        let inv = 1.0 / self.v;
        Self {
            v: inv,
            d1: -self.d1 * inv * inv,
            d2: (2.0 * self.d1 * self.d1 * inv - self.d2) * inv * inv,
        }
    }
    fn powi(self, n: i32) -> Self {
        let n_f = n as f64;
        let base = self.v.powi(n - 2);
        let v = base * self.v * self.v;
        let dv = n_f * base * self.v;
        let ddv = n_f * (n_f - 1.0) * base;
        Self {
            v,
            d1: dv * self.d1,
            d2: ddv * self.d1 * self.d1 + dv * self.d2,
        }
    }
}

/// `T1 = Σ_{k=1}^{P−1} (P − k) k x^k` and `T2 = Σ (P − k) k² x^k`.
fn weighted_geometric_sums(x: f64, p: usize) -> (f64, f64) {
    if p <= DOUBLE_POLE_DIRECT_LIMIT {
        let (mut t1, mut t2, mut xk) = (0.0, 0.0, 1.0);
        for k in 1..p {
            xk *= x;
            let w = (p - k) as f64 * k as f64 * xk;
            t1 += w;
            t2 += w * k as f64;
        }
        return (t1, t2);
    }
    // G(x) = Σ (P − k) x^k = x (x^P − 1 + P(1 − x)) / (1 − x)²; T1 = xG', T2 = xG' + x²G''.
    let xj = Jet2::var(x);
    let one = Jet2::constant(1.0);
    let om = one.sub(xj);
    let num = xj.powi(p as i32).sub(one).add(om.scale(p as f64));
    let g = xj.mul(num).mul(om.mul(om).recip());
    let t1 = x * g.d1;
    (t1, t1 + x * x * g.d2)
}

fn double_pole_third_moment(alpha: f64, gain: f64, p: usize) -> f64 {
    if alpha == 0.0 {
        return 0.0;
    }
    let (s1, s2) = LinearFilter::double_pole_sums(alpha);
    let (t1, t2) = weighted_geometric_sums(alpha * alpha, p);
    6.0 * gain.powi(3) / alpha * (s2 * t1 + s1 * t2)
}

/// Large-P coefficient `c` with `κ3(P) ~ c / √P`:
/// `c = 6 Σ_j ρ_j A(α_j⁻¹)² / R_0^{3/2}`.
pub fn asymptotic_skew_coefficient(f: &LinearFilter) -> Result<f64> {
    let r0 = f.autocovariance(0);
    if let Some(alpha) = f.double_pole_alpha() {
        let x = alpha * alpha;
        let (s1, s2) = LinearFilter::double_pole_sums(alpha);
        let om = 1.0 - x;
        let slope = 6.0 * f.gain().powi(3) / alpha * (s2 * x / (om * om) + s1 * x * (1.0 + x) / om.powi(3));
        return Ok(slope / r0.powf(1.5));
    }
    Ok(6.0 * pole_cubic(f)? / r0.powf(1.5))
}

/// `Σ_j ρ_j A(α_j⁻¹)²`, the growth rate of μ3 in P (divided by 6).
fn pole_cubic(f: &LinearFilter) -> Result<f64> {
    f.require_sprz()?;
    let (_, residues, _) = f.simple_terms().expect("simple-pole filter");
    let images = f.image_values().expect("simple-pole filter");
    Ok(residues.iter().zip(&images).map(|(r, a)| r * a * a).sum::<Complex64>().re)
}

/// Exact skewness of the EMA1 strategy:
/// `κ3 = 6α / ((1 − α²)^{1/2} P^{1/2}) · (1 − (1 − α^{2P}) / ((1 − α²) P))`.
pub fn ema1_skew_exact(n: f64, p: usize) -> Result<f64> {
    check_period(p)?;
    if !(n > 1.0) {
        return Err(Error::InvalidPeriod(n));
    }
    let alpha = decay_factor(n)?;
    let x = alpha * alpha;
    let pf = p as f64;
    Ok(6.0 * alpha / ((1.0 - x).sqrt() * pf.sqrt()) * (1.0 - (1.0 - x.powi(p as i32)) / ((1.0 - x) * pf)))
}

/// Exact `(μ2, μ3)` of the unnormalised EMA2 strategy with
/// `a_j = (α^{j+1} − β^{j+1})/(α − β)`. Equal periods fall back to the
/// double-pole closed form.
pub fn ema2_moments_exact(n_alpha: f64, n_beta: f64, p: usize) -> Result<(f64, f64)> {
    check_period(p)?;
    let a = decay_factor(n_alpha)?;
    let b = decay_factor(n_beta)?;
    if a == b {
        let f = LinearFilter::ema2(n_alpha, n_beta, false)?;
        return Ok((second_moment(&f, p)?, third_moment_closed(&f, p)?));
    }
    let pf = p as f64;
    let (a2, b2, ab) = (a * a, b * b, a * b);
    let (oa, ob, oab) = (1.0 - a2, 1.0 - b2, 1.0 - ab);
    let d2 = (a - b) * (a - b);
    let mu2 = pf * (1.0 + ab) / (oab * oa * ob);
    let pi = p as i32;
    let mu3 = 6.0 * pf * (a + b) * (1.0 + ab) / (oab * oa * oa * ob * ob)
        - 6.0 * a.powi(3) * (1.0 - a2.powi(pi)) / (d2 * oa.powi(3) * oab)
        - 6.0 * b.powi(3) * (1.0 - b2.powi(pi)) / (d2 * ob.powi(3) * oab)
        + 6.0 * a * b2 * (1.0 - ab.powi(pi)) / (d2 * ob * oab.powi(3))
        + 6.0 * a2 * b * (1.0 - ab.powi(pi)) / (d2 * oa * oab.powi(3));
    Ok((mu2, mu3))
}

/// κ3(P) for P = 1..=p_max from the closed forms.
pub fn skew_term_structure(f: &LinearFilter, p_max: usize) -> Result<MomentTermStructure> {
    check_period(p_max)?;
    let r0 = f.autocovariance(0);
    let periods: Vec<usize> = (1..=p_max).collect();
    let mu2 = periods.iter().map(|&p| p as f64 * r0).collect();
    let mu3 = periods
        .iter()
        .map(|&p| third_moment_closed(f, p))
        .collect::<Result<Vec<_>>>()?;
    Ok(MomentTermStructure::from_moments(periods, mu2, mu3))
}

/// `𝒫(λF, λS) = Σ_j ρ_j A(α_j⁻¹)²` for the combined filter `λF·fast + λS·slow`,
/// a homogeneous cubic whose sign is that of the asymptotic skewness.
pub fn hybrid_cubic(lambda_fast: f64, lambda_slow: f64, fast: &LinearFilter, slow: &LinearFilter) -> Result<f64> {
    let combined = LinearFilter::combine(&[fast.clone(), slow.clone()], &[lambda_fast, lambda_slow])?;
    pole_cubic(&combined)
}

/// Roots of `𝒫(ζ, 1) = 0` and the resulting positivity constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridConstraint {
    /// Coefficients `[c3, c2, c1, c0]` of `𝒫(λF, λS) = Σ c_i λF^i λS^{3−i}`.
    pub coefficients: [f64; 4],
    pub roots: CubicRoots,
    /// The real root ζ1 when the other two are complex.
    pub zeta_real: Option<f64>,
    pub zeta_complex: Option<[Complex64; 2]>,
    /// `(u, v)` with asymptotic skew positive iff `u λF + v λS > 0`. Emitted
    /// only when exactly one root is real.
    pub inequality: Option<(f64, f64)>,
}

impl HybridConstraint {
    /// Sign test using the full cubic (valid whatever the root pattern).
    pub fn asymptotic_skew_positive(&self, lambda_fast: f64, lambda_slow: f64) -> bool {
        let [c3, c2, c1, c0] = self.coefficients;
        let (x, y) = (lambda_fast, lambda_slow);
        c3 * x * x * x + c2 * x * x * y + c1 * x * y * y + c0 * y * y * y > 0.0
    }

    /// Human-readable form, e.g. `λF + 1.4808 λS > 0`.
    pub fn describe(&self) -> String {
        match (self.inequality, self.zeta_real) {
            (Some((u, v)), Some(_)) => {
                let (u, v) = (u / u.abs(), v / u.abs());
                let lead = if u > 0.0 { "λF" } else { "−λF" };
                let sign = if v >= 0.0 { '+' } else { '−' };
                format!("{lead} {sign} {:.4} λS > 0", v.abs())
            }
            _ => format!(
                "three real roots {:?}: no single linear constraint",
                self.roots.real_roots()
            ),
        }
    }
}

/// Extracts the cubic by evaluating 𝒫 at (1,0), (0,1), (1,1), (1,−1) and
/// solves it.
pub fn hybrid_roots(fast: &LinearFilter, slow: &LinearFilter) -> Result<HybridConstraint> {
    let eval = |x: f64, y: f64| hybrid_cubic(x, y, fast, slow);
    let c3 = eval(1.0, 0.0)?;
    let c0 = eval(0.0, 1.0)?;
    let plus = eval(1.0, 1.0)?;
    let minus = eval(1.0, -1.0)?;
    // 𝒫(1, ±1) = c3 ± c2 + c1 ± c0
    let c1 = 0.5 * (plus + minus) - c3;
    let c2 = 0.5 * (plus - minus) - c0;
    let roots = solve_cubic(c3, c2, c1, c0)?;
    let (zeta_real, zeta_complex, inequality) = match roots {
        CubicRoots::OneReal { real, complex } => {
            let s = c3.signum();
            (Some(real), Some(complex), Some((s, -s * real)))
        }
        CubicRoots::ThreeReal(_) => (None, None, None),
    };
    Ok(HybridConstraint {
        coefficients: [c3, c2, c1, c0],
        roots,
        zeta_real,
        zeta_complex,
        inequality,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn p_one_is_zero() {
        for f in [
            LinearFilter::ema1(20.0, false).unwrap(),
            LinearFilter::ema2(5.0, 9.0, true).unwrap(),
            LinearFilter::ema2(9.0, 9.0, true).unwrap(),
        ] {
            assert_eq!(third_moment_direct(&f, 1).unwrap(), 0.0);
            assert_eq!(third_moment_closed(&f, 1).unwrap(), 0.0);
        }
    }

    #[test]
    fn second_moment_cases() {
        let f = LinearFilter::ema1(20.0, false).unwrap();
        assert!((second_moment(&f, 1).unwrap() - 0.9025 / (1.0 - 0.9025)).abs() < 1e-12);
        let g = LinearFilter::ema2(20.0, 40.0, true).unwrap();
        assert!((second_moment(&g, 250).unwrap() - 250.0).abs() < 1e-9);
        assert!(second_moment(&g, 0).is_err());
    }

    #[test]
    fn closed_matches_direct_for_emas() {
        for f in [
            LinearFilter::ema1(20.0, false).unwrap(),
            LinearFilter::ema2(20.0, 40.0, false).unwrap(),
            LinearFilter::ema2(7.0, 7.0, false).unwrap(),
            LinearFilter::ema2(7.0, 7.0, true).unwrap(),
        ] {
            for p in [2, 5, 22, 100, 500] {
                let d = third_moment_direct(&f, p).unwrap();
                let c = third_moment_closed(&f, p).unwrap();
                assert!(rel(c, d) < 1e-9, "P={p}: {c} vs {d}");
            }
        }
    }

    #[test]
    fn double_pole_closed_form_beyond_direct_limit() {
        let f = LinearFilter::ema2(30.0, 30.0, true).unwrap();
        let p = DOUBLE_POLE_DIRECT_LIMIT + 500;
        let d = third_moment_direct(&f, p).unwrap();
        let c = third_moment_closed(&f, p).unwrap();
        assert!(rel(c, d) < 1e-9, "{c} vs {d}");
    }

    #[test]
    fn ema1_exact_skew_matches_closed_form() {
        for p in [1, 2, 22, 40, 300] {
            let f = LinearFilter::ema1(40.0, false).unwrap();
            let k = third_moment_closed(&f, p).unwrap() / second_moment(&f, p).unwrap().powf(1.5);
            assert!((ema1_skew_exact(40.0, p).unwrap() - k).abs() < 1e-12);
        }
        assert_eq!(ema1_skew_exact(20.0, 1).unwrap(), 0.0);
    }

    #[test]
    fn ema2_exact_moments_match_oracle() {
        let f = LinearFilter::ema2(10.0, 20.0, false).unwrap();
        let (m2, m3) = ema2_moments_exact(10.0, 20.0, 50).unwrap();
        assert!(rel(m2, second_moment(&f, 50).unwrap()) < 1e-12);
        assert!(rel(m3, third_moment_direct(&f, 50).unwrap()) < 1e-10);
        // α = 0 recovers EMA1
        let (m2, m3) = ema2_moments_exact(1.0, 30.0, 25).unwrap();
        let k = m3 / m2.powf(1.5);
        assert!((k - ema1_skew_exact(30.0, 25).unwrap()).abs() < 1e-12);
        // coalesced fallback
        let (m2, m3) = ema2_moments_exact(15.0, 15.0, 40).unwrap();
        let g = LinearFilter::ema2(15.0, 15.0, false).unwrap();
        assert!(rel(m3, third_moment_direct(&g, 40).unwrap()) < 1e-9);
        assert!(rel(m2, second_moment(&g, 40).unwrap()) < 1e-12);
    }

    #[test]
    fn ema2_peak_near_published_location() {
        let (p, k) = (1..=400)
            .map(|p| {
                let (m2, m3) = ema2_moments_exact(20.0, 40.0, p).unwrap();
                (p, m3 / m2.powf(1.5))
            })
            .fold((0, f64::MIN), |b, x| if x.1 > b.1 { x } else { b });
        assert!((k - 2.1).abs() < 0.1, "peak {k}");
        assert!((p as f64 - 102.0).abs() < 0.15 * 102.0, "at {p}");
    }

    #[test]
    fn asymptotic_coefficient() {
        let alpha: f64 = 0.95;
        let f = LinearFilter::ema1(20.0, false).unwrap();
        let c = asymptotic_skew_coefficient(&f).unwrap();
        assert!(rel(c, 6.0 * alpha / (1.0 - alpha * alpha).sqrt()) < 1e-12);

        // the quoted EMA2 form: 6(α+β)(1−αβ)^{1/2} / ((1+αβ)^{1/2}(1−α²)^{1/2}(1−β²)^{1/2})
        let (a, b): (f64, f64) = (0.95, 0.975);
        let g = LinearFilter::ema2(20.0, 40.0, true).unwrap();
        let quoted = 6.0 * (a + b) * (1.0 - a * b).sqrt()
            / ((1.0 + a * b).sqrt() * ((1.0 - a * a) * (1.0 - b * b)).sqrt());
        assert!(rel(asymptotic_skew_coefficient(&g).unwrap(), quoted) < 1e-12);
        let approx = 3.0 * 2f64.sqrt() * 60f64.sqrt();
        assert!(rel(quoted, approx) < 0.05);

        let p = 100_000;
        for f in [f, g, LinearFilter::ema2(20.0, 20.0, true).unwrap()] {
            let k = third_moment_closed(&f, p).unwrap() / second_moment(&f, p).unwrap().powf(1.5);
            let c = asymptotic_skew_coefficient(&f).unwrap();
            assert!(rel(c / (p as f64).sqrt(), k) < 0.01);
        }
    }

    #[test]
    fn negation_is_odd() {
        let f = LinearFilter::ema2(20.0, 40.0, true).unwrap();
        let ts = skew_term_structure(&f, 60).unwrap();
        let neg = skew_term_structure(&f.negated(), 60).unwrap();
        for (x, y) in ts.kappa3.iter().zip(&neg.kappa3) {
            assert_eq!(*x, -*y);
        }
        assert_eq!(
            third_moment_direct(&f.negated(), 30).unwrap(),
            -third_moment_direct(&f, 30).unwrap()
        );
    }

    #[test]
    fn ema1_term_structure_shape() {
        let f = LinearFilter::ema1(20.0, false).unwrap();
        let ts = skew_term_structure(&f, 200).unwrap();
        assert_eq!(ts.kappa3[0], 0.0);
        let (p, k) = ts.peak().unwrap();
        assert!(p > 1 && p < 200);
        assert!(k > 2.1 && k < 2.41);
        // single interior maximum
        let rising = ts.kappa3[..p].windows(2).all(|w| w[1] > w[0]);
        let falling = ts.kappa3[p - 1..].windows(2).all(|w| w[1] < w[0]);
        assert!(rising && falling);
    }

    #[test]
    fn hybrid_counter_trend_short_end() {
        let fast = LinearFilter::ema_crossover(5.0, 10.0).unwrap();
        let slow = LinearFilter::ema_crossover(20.0, 40.0).unwrap();
        let h = LinearFilter::combine(&[fast, slow], &[-1.0, 1.0]).unwrap();
        let d = third_moment_direct(&h, 5).unwrap();
        let c = third_moment_closed(&h, 5).unwrap();
        assert!((c - d).abs() < 1e-9 * third_moment_scale(&h, 5).unwrap());
        assert!(c < 0.0);
    }

    #[test]
    fn hybrid_cubic_properties() {
        let fast = LinearFilter::ema_crossover(5.0, 10.0).unwrap();
        let slow = LinearFilter::ema_crossover(20.0, 40.0).unwrap();
        assert!(hybrid_cubic(1.0, 0.0, &fast, &slow).unwrap() > 0.0);
        let v = hybrid_cubic(0.7, -0.3, &fast, &slow).unwrap();
        let v2 = hybrid_cubic(1.4, -0.6, &fast, &slow).unwrap();
        assert!(rel(v2, 8.0 * v) < 1e-12);

        let hc = hybrid_roots(&fast, &slow).unwrap();
        let z = hc.zeta_real.expect("one real root");
        let size: f64 = hc.coefficients.iter().map(|c| c.abs() * z.abs().max(1.0).powi(3)).sum();
        assert!(hybrid_cubic(z, 1.0, &fast, &slow).unwrap().abs() < 1e-10 * size);
        for (lf, ls) in [(1.0, 0.5), (2.0, -1.0), (-1.0, 1.0), (-1.0, -0.2)] {
            let combined = LinearFilter::combine(&[fast.clone(), slow.clone()], &[lf, ls]).unwrap();
            let c = asymptotic_skew_coefficient(&combined).unwrap();
            let (u, w) = hc.inequality.unwrap();
            assert_eq!(c > 0.0, u * lf + w * ls > 0.0);
            assert_eq!(c > 0.0, hc.asymptotic_skew_positive(lf, ls));
        }
        assert_eq!(hc.describe(), "λF + 1.4759 λS > 0");
        // critical case: zero asymptotic skew at leading order
        let crit = hybrid_cubic(-z, -1.0, &fast, &slow).unwrap();
        assert!(crit.abs() < 1e-10 * hc.coefficients[0].abs());

        // the normalisation of the components moves the root
        let fast_n = LinearFilter::ema2(5.0, 10.0, true).unwrap();
        let slow_n = LinearFilter::ema2(20.0, 40.0, true).unwrap();
        let zn = hybrid_roots(&fast_n, &slow_n).unwrap().zeta_real.unwrap();
        assert!((zn + 0.7596).abs() < 1e-4);
    }

    /// Random SPRZ filters: real poles and conjugate pairs with arbitrary
    /// residues and leading weight.
    pub(crate) fn random_filter() -> impl Strategy<Value = LinearFilter> {
        let real = (0.05f64..0.97, -2.0f64..2.0).prop_map(|(p, r)| {
            (vec![Complex64::new(p, 0.0)], vec![Complex64::new(r, 0.0)])
        });
        let pair = (0.05f64..0.95, 0.1f64..3.0, -2.0f64..2.0, -2.0f64..2.0).prop_map(|(m, th, rr, ri)| {
            let p = Complex64::from_polar(m, th);
            let r = Complex64::new(rr, ri);
            (vec![p, p.conj()], vec![r, r.conj()])
        });
        (proptest::collection::vec(prop_oneof![real, pair], 1..4), -1.0f64..1.0).prop_filter_map(
            "poles too close",
            |(parts, a0)| {
                let mut poles = Vec::new();
                let mut residues = Vec::new();
                for (p, r) in parts {
                    poles.extend(p);
                    residues.extend(r);
                }
                if poles.len() > 6 {
                    return None;
                }
                for i in 0..poles.len() {
                    for j in i + 1..poles.len() {
                        if (poles[i] - poles[j]).norm() < 1e-3 {
                            return None;
                        }
                    }
                }
                LinearFilter::from_poles(poles, residues, a0).ok()
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn closed_form_equals_direct_sum(f in random_filter(), p in prop::sample::select(vec![1usize, 2, 5, 20, 100, 500])) {
            let d = third_moment_direct(&f, p).unwrap();
            let c = third_moment_closed(&f, p).unwrap();
            let scale = third_moment_scale(&f, p).unwrap();
            prop_assert!((c - d).abs() <= 1e-9 * scale.max(1e-300) || (c == 0.0 && d == 0.0));
        }

        #[test]
        fn autocovariance_bounded_and_real(f in random_filter(), k in 0usize..200) {
            let r0 = f.autocovariance(0);
            prop_assert!(f.autocovariance(k).abs() <= r0 * (1.0 + 1e-12));
            let lag = f.decay_lag(1e-14) + k + 10;
            let a = f.weights(lag + k);
            let direct: f64 = (0..lag).map(|j| a[j] * a[j + k]).sum();
            prop_assert!((direct - f.autocovariance(k)).abs() <= 1e-10 * r0);
        }

        #[test]
        fn weights_reconstruct_system_function(f in random_filter(), m in 1.05f64..3.0, th in 0.0f64..6.3) {
            let z = Complex64::from_polar(m, th);
            let n = ((1e-15f64).ln() / (f.max_pole_modulus() / m).ln()).ceil() as usize + 10;
            let a = f.weights(n);
            let series: Complex64 = a.iter().enumerate().map(|(j, w)| w * z.powi(-(j as i32))).sum();
            let exact = f.system_value(z).unwrap();
            prop_assert!((series - exact).norm() <= 1e-10 * exact.norm().max(1.0));
        }
    }
}

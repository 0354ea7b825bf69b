use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Continuous-time momentum kernel `K(t)`, applied as `∫ K(t − s) dX_s`.
///
/// Rates are in units of 1/time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ContinuousKernel {
    /// `K(t) = e^{−α̇t}`
    Ema1 { alpha: f64 },
    /// `K(t) = e^{−α̇t} − e^{−β̇t}` with `β̇ > α̇`
    Ema2 { alpha: f64, beta: f64 },
    /// `K(t) = t e^{−α̇t}`, the equal-speed limit of EMA2 after dividing by `β̇ − α̇`
    Ema2Eq { alpha: f64 },
}

/// Whether the filtered signal of a Brownian motion has finite path length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathLength {
    Infinite,
    /// Expected absolute rate of change of the signal, `(2‖K′‖²/π)^{1/2}`.
    Finite { rate: f64 },
}

fn positive(name: &'static str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be positive, got {x}")))
    }
}

impl ContinuousKernel {
    pub fn ema1(alpha: f64) -> Result<Self> {
        positive("alpha", alpha)?;
        Ok(Self::Ema1 { alpha })
    }

    pub fn ema2(alpha: f64, beta: f64) -> Result<Self> {
        positive("alpha", alpha)?;
        positive("beta", beta)?;
        if beta <= alpha {
            return Err(Error::param("beta", format!("must exceed alpha = {alpha}, got {beta}")));
        }
        Ok(Self::Ema2 { alpha, beta })
    }

    pub fn ema2_eq(alpha: f64) -> Result<Self> {
        positive("alpha", alpha)?;
        Ok(Self::Ema2Eq { alpha })
    }

    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Self::Ema1 { alpha } => (-alpha * t).exp(),
            Self::Ema2 { alpha, beta } => (-alpha * t).exp() - (-beta * t).exp(),
            Self::Ema2Eq { alpha } => t * (-alpha * t).exp(),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            Self::Ema1 { alpha } => -alpha * (-alpha * t).exp(),
            Self::Ema2 { alpha, beta } => -alpha * (-alpha * t).exp() + beta * (-beta * t).exp(),
            Self::Ema2Eq { alpha } => (1.0 - alpha * t) * (-alpha * t).exp(),
        }
    }

    /// `‖K‖² = ∫_0^∞ K(t)² dt`, the output variance for unit Brownian input.
    pub fn square_norm(&self) -> f64 {
        match *self {
            Self::Ema1 { alpha } => 1.0 / (2.0 * alpha),
            Self::Ema2 { alpha, beta } => (alpha - beta).powi(2) / (2.0 * alpha * beta * (alpha + beta)),
            Self::Ema2Eq { alpha } => 1.0 / (4.0 * alpha.powi(3)),
        }
    }

    /// `‖K′‖² = ∫_0^∞ K′(t)² dt`.
    pub fn derivative_square_norm(&self) -> f64 {
        match *self {
            Self::Ema1 { alpha } => alpha / 2.0,
            Self::Ema2 { alpha, beta } => (beta - alpha).powi(2) / (2.0 * (alpha + beta)),
            Self::Ema2Eq { alpha } => 1.0 / (4.0 * alpha),
        }
    }

    /// Path length is infinite exactly when `K(0) ≠ 0`.
    pub fn path_length_class(&self) -> PathLength {
        if self.value(0.0) != 0.0 {
            PathLength::Infinite
        } else {
            PathLength::Finite {
                rate: (2.0 * self.derivative_square_norm() / PI).sqrt(),
            }
        }
    }
}

/// Residual of `K″ + (λ + μ/t) K = 0` for `K(t) = t e^{−α̇t}` with the
/// multipliers `λ = −α̇²`, `μ = 2α̇` that make it a solution.
pub fn variational_residual(alpha: f64, t: f64) -> Result<f64> {
    positive("alpha", alpha)?;
    positive("t", t)?;
    let decay = (-alpha * t).exp();
    let k = t * decay;
    let k2 = (alpha * alpha * t - 2.0 * alpha) * decay;
    let lambda = -alpha * alpha;
    let mu = 2.0 * alpha;
    Ok(k2 + (lambda + mu / t) * k)
}

use crate::error::{Error, Result};
use crate::quadrature::normal_expectation;
use crate::special::{norm_cdf, norm_centered, norm_pdf};
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

/// Tolerance for the normalisation quadrature of custom activations.
const NORMALIZATION_QUAD_TOL: f64 = 1e-12;

/// Elliptical constraint tolerance for compound weights.
const ELLIPSE_TOL: f64 = 1e-12;

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user-supplied activation. `psi` is rescaled to unit second moment;
/// `breakpoints` lists its discontinuities so quadrature can split there.
#[derive(Clone)]
pub struct CustomActivation {
    pub name: String,
    psi: RealFn,
    derivative: Option<RealFn>,
    breakpoints: Vec<f64>,
}

impl CustomActivation {
    pub fn new(name: impl Into<String>, psi: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            psi: Arc::new(psi),
            derivative: None,
            breakpoints: Vec::new(),
        }
    }

    pub fn with_derivative(mut self, d: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.derivative = Some(Arc::new(d));
        self
    }

    pub fn with_breakpoints(mut self, breakpoints: Vec<f64>) -> Self {
        self.breakpoints = breakpoints;
        self
    }
}

impl fmt::Debug for CustomActivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomActivation")
            .field("name", &self.name)
            .field("breakpoints", &self.breakpoints)
            .field("has_derivative", &self.derivative.is_some())
            .finish()
    }
}

/// Shape of the position-sizing function ψ before normalisation.
#[derive(Debug, Clone)]
pub enum ActivationKind {
    /// `ψ(z) = z`
    Linear,
    /// `ψ(z) ∝ 2Φ(λz) − 1`
    SimpleSigmoid { lambda: f64 },
    /// `ψ(z) ∝ z e^{−λ²z²/2}`
    RevertingSigmoid { lambda: f64 },
    /// `ψ(z) ∝ 1{z > ε} − 1{z < −ε}`
    DoubleStep { epsilon: f64 },
    /// `w_S ψ_S(z) + w_R ψ_R(z)` of the normalised simple and reverting sigmoids.
    CompoundSigmoid { w_s: f64, w_r: f64, lambda: f64 },
    Custom(CustomActivation),
}

/// An activation function together with its normalisation constant `c`,
/// chosen so that `⟨ψ(Z)²⟩ = 1` for standard normal `Z`.
#[derive(Debug, Clone)]
pub struct ActivationSpec {
    kind: ActivationKind,
    c: f64,
}

fn check_lambda(lambda: f64, allow_zero: bool) -> Result<()> {
    let ok = lambda.is_finite() && (lambda > 0.0 || (allow_zero && lambda == 0.0));
    if ok {
        Ok(())
    } else {
        Err(Error::param("lambda", format!("must be positive, got {lambda}")))
    }
}

/// `c_λ` of the simple sigmoid: `((2/π) arctan(λ²/√(1+2λ²)))^{−1/2}`.
pub(crate) fn simple_sigmoid_constant(lambda: f64) -> f64 {
    let l2 = lambda * lambda;
    (2.0 / PI * (l2 / (1.0 + 2.0 * l2).sqrt()).atan()).powf(-0.5)
}

/// `c_λ` of the reverting sigmoid: `(1 + 2λ²)^{3/4}`.
pub(crate) fn reverting_sigmoid_constant(lambda: f64) -> f64 {
    (1.0 + 2.0 * lambda * lambda).powf(0.75)
}

/// `c_ε` of the double step: `(2Φ(−ε))^{−1/2}`.
pub(crate) fn double_step_constant(epsilon: f64) -> f64 {
    (2.0 * norm_cdf(-epsilon)).powf(-0.5)
}

/// Correlation of the normalised simple and reverting sigmoid positions:
/// `cos δ = λ(1 + 2λ²)^{1/4} / (1 + λ²) · arctan(λ²/√(1+2λ²))^{−1/2}`.
pub fn compound_cos_delta(lambda: f64) -> Result<f64> {
    check_lambda(lambda, false)?;
    let l2 = lambda * lambda;
    Ok(lambda * (1.0 + 2.0 * l2).powf(0.25) / (1.0 + l2) * (l2 / (1.0 + 2.0 * l2).sqrt()).atan().powf(-0.5))
}

impl ActivationSpec {
    /// ψ ≡ 0. Not a valid strategy (it cannot be normalised); used to check
    /// that a pipeline carries no P&L without a position.
    #[cfg(test)]
    pub(crate) fn zero() -> Self {
        Self {
            kind: ActivationKind::Linear,
            c: 0.0,
        }
    }

    pub fn linear() -> Self {
        Self {
            kind: ActivationKind::Linear,
            c: 1.0,
        }
    }

    pub fn simple_sigmoid(lambda: f64) -> Result<Self> {
        check_lambda(lambda, false)?;
        Ok(Self {
            kind: ActivationKind::SimpleSigmoid { lambda },
            c: simple_sigmoid_constant(lambda),
        })
    }

    /// `λ = 0` is the linear function.
    pub fn reverting_sigmoid(lambda: f64) -> Result<Self> {
        check_lambda(lambda, true)?;
        Ok(Self {
            kind: ActivationKind::RevertingSigmoid { lambda },
            c: reverting_sigmoid_constant(lambda),
        })
    }

    /// `ε = 0` is the sign function.
    pub fn double_step(epsilon: f64) -> Result<Self> {
        if !(epsilon >= 0.0) || !epsilon.is_finite() {
            return Err(Error::param("epsilon", format!("must be non-negative, got {epsilon}")));
        }
        Ok(Self {
            kind: ActivationKind::DoubleStep { epsilon },
            c: double_step_constant(epsilon),
        })
    }

    /// Compound sigmoid with explicit weights, which must lie on the ellipse
    /// `w_S² + 2 w_S w_R cos δ + w_R² = 1`. See [`compound_sigmoid_make`] to
    /// solve for them from a ratio.
    pub fn compound_sigmoid(w_s: f64, w_r: f64, lambda: f64) -> Result<Self> {
        let cos_delta = compound_cos_delta(lambda)?;
        let norm = w_s * w_s + 2.0 * w_s * w_r * cos_delta + w_r * w_r;
        if (norm - 1.0).abs() > ELLIPSE_TOL {
            return Err(Error::param(
                "weights",
                format!("w_S² + 2w_S w_R cosδ + w_R² = {norm}, not 1"),
            ));
        }
        Ok(Self {
            kind: ActivationKind::CompoundSigmoid { w_s, w_r, lambda },
            c: 1.0,
        })
    }

    /// Custom activation, normalised by quadrature.
    pub fn custom(custom: CustomActivation) -> Result<Self> {
        let psi = Arc::clone(&custom.psi);
        let second = normal_expectation(|z| psi(z).powi(2), &custom.breakpoints, NORMALIZATION_QUAD_TOL)?;
        if !(second.value > 0.0) {
            return Err(Error::Quadrature(format!(
                "custom activation `{}` has ⟨ψ²⟩ = {}",
                custom.name, second.value
            )));
        }
        Ok(Self {
            c: second.value.powf(-0.5),
            kind: ActivationKind::Custom(custom),
        })
    }

    pub fn kind(&self) -> &ActivationKind {
        &self.kind
    }

    /// Normalisation constant `c`.
    pub fn normalization_constant(&self) -> f64 {
        self.c
    }

    pub fn is_linear(&self) -> bool {
        matches!(self.kind, ActivationKind::Linear)
    }

    /// Short label, e.g. `sigmoid(λ=1)`.
    pub fn label(&self) -> String {
        match &self.kind {
            ActivationKind::Linear => "linear".into(),
            ActivationKind::SimpleSigmoid { lambda } => format!("sigmoid(λ={lambda})"),
            ActivationKind::RevertingSigmoid { lambda } => format!("reverting(λ={lambda})"),
            ActivationKind::DoubleStep { epsilon } => format!("double_step(ε={epsilon})"),
            ActivationKind::CompoundSigmoid { w_s, w_r, lambda } => {
                format!("compound(w_S={w_s:.4}, w_R={w_r:.4}, λ={lambda})")
            }
            ActivationKind::Custom(c) => format!("custom({})", c.name),
        }
    }

    /// Position `ψ(z)`.
    pub fn psi(&self, z: f64) -> f64 {
        let c = self.c;
        match &self.kind {
            ActivationKind::Linear => c * z,
            ActivationKind::SimpleSigmoid { lambda } => c * norm_centered(lambda * z),
            ActivationKind::RevertingSigmoid { lambda } => c * z * (-0.5 * lambda * lambda * z * z).exp(),
            ActivationKind::DoubleStep { epsilon } => {
                if z > *epsilon {
                    c
                } else if z < -epsilon {
                    -c
                } else {
                    0.0
                }
            }
            ActivationKind::CompoundSigmoid { w_s, w_r, lambda } => {
                let s = simple_sigmoid_constant(*lambda) * norm_centered(lambda * z);
                let r = reverting_sigmoid_constant(*lambda) * z * (-0.5 * lambda * lambda * z * z).exp();
                w_s * s + w_r * r
            }
            ActivationKind::Custom(custom) => c * (custom.psi)(z),
        }
    }

    /// `ψ′(z)` where ψ is differentiable; `None` for step functions and
    /// custom activations without a derivative.
    pub fn derivative(&self, z: f64) -> Option<f64> {
        let c = self.c;
        match &self.kind {
            ActivationKind::Linear => Some(c),
            ActivationKind::SimpleSigmoid { lambda } => Some(c * 2.0 * lambda * norm_pdf(lambda * z)),
            ActivationKind::RevertingSigmoid { lambda } => {
                let l2 = lambda * lambda;
                Some(c * (1.0 - l2 * z * z) * (-0.5 * l2 * z * z).exp())
            }
            ActivationKind::DoubleStep { .. } => None,
            ActivationKind::CompoundSigmoid { w_s, w_r, lambda } => {
                let l2 = lambda * lambda;
                let s = simple_sigmoid_constant(*lambda) * 2.0 * lambda * norm_pdf(lambda * z);
                let r = reverting_sigmoid_constant(*lambda) * (1.0 - l2 * z * z) * (-0.5 * l2 * z * z).exp();
                Some(w_s * s + w_r * r)
            }
            ActivationKind::Custom(custom) => custom.derivative.as_ref().map(|d| c * d(z)),
        }
    }

    /// Discontinuities of ψ (empty for smooth activations).
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.kind {
            ActivationKind::DoubleStep { epsilon } if *epsilon == 0.0 => vec![0.0],
            ActivationKind::DoubleStep { epsilon } => vec![-epsilon, *epsilon],
            ActivationKind::Custom(custom) => custom.breakpoints.clone(),
            _ => Vec::new(),
        }
    }
}

/// Compound sigmoid with `w_R / w_S = ratio` on the normalising ellipse.
/// `ratio = 0` is the simple sigmoid and `ratio = ∞` the reverting sigmoid.
pub fn compound_sigmoid_make(ratio: f64, lambda: f64) -> Result<ActivationSpec> {
    if ratio.is_nan() || ratio < 0.0 {
        return Err(Error::param("ratio", format!("must be non-negative, got {ratio}")));
    }
    let cos_delta = compound_cos_delta(lambda)?;
    if ratio == 0.0 {
        return ActivationSpec::simple_sigmoid(lambda);
    }
    if ratio.is_infinite() {
        return ActivationSpec::reverting_sigmoid(lambda);
    }
    let w_s = 1.0 / (1.0 + 2.0 * ratio * cos_delta + ratio * ratio).sqrt();
    let w_r = ratio * w_s;
    Ok(ActivationSpec {
        kind: ActivationKind::CompoundSigmoid { w_s, w_r, lambda },
        c: 1.0,
    })
}

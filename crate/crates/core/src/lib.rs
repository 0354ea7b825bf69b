//! Skewness term structure of trend-following strategies.
//!
//! A momentum strategy holds a position `ψ(V_n)` where `V_n` is a causal
//! linear filter of past risk-adjusted returns. The P-period trading return
//! is a quadratic form in the returns, so its moments can be computed
//! exactly. This crate provides:
//!
//! - [`filter`]: EMA-based filters in pole–residue form, continuous kernels.
//! - [`linear`]: exact second/third moments and skewness for linear rules,
//!   asymptotics and the hybrid positivity constraint.
//! - [`nonlinear`]: activation functions, the lag terms `H_k` and the
//!   nonlinear term structure.
//! - [`spectral`]: the Γ matrix, its eigenvalues, the MGF and cumulants.
//! - [`simulate`]: a seeded Monte Carlo oracle.
//! - [`backtest`]: the empirical pipeline on price series.
//!
//! ```
//! use trendskew::{filter::LinearFilter, linear};
//!
//! let f = LinearFilter::ema1(20.0, true)?;
//! let ts = linear::skew_term_structure(&f, 100)?;
//! assert_eq!(ts.kappa3[0], 0.0);
//! assert!(ts.kappa3[20] > 2.0);
//! # Ok::<(), trendskew::Error>(())
//! ```

pub mod backtest;
pub mod cubic;
pub mod error;
pub mod filter;
pub mod linear;
pub mod nonlinear;
pub mod quadrature;
pub mod simulate;
pub mod special;
pub mod spectral;
pub mod term;

pub use error::{Error, ErrorCategory, Result};
pub use filter::LinearFilter;
pub use term::MomentTermStructure;

// The guide's code blocks run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/filters.md")]
    mod filters {}
    #[doc = include_str!("../../../book/src/linear.md")]
    mod linear {}
    #[doc = include_str!("../../../book/src/nonlinear.md")]
    mod nonlinear {}
    #[doc = include_str!("../../../book/src/spectral.md")]
    mod spectral {}
    #[doc = include_str!("../../../book/src/simulation.md")]
    mod simulation {}
    #[doc = include_str!("../../../book/src/backtest.md")]
    mod backtest {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

//! Windowed-correlation model and parameter estimation.
//!
//! Components:
//! - [`erf`]: high-accuracy error function used by the closed-form model
//! - [`BroadenedModel`]: Gaussian-broadened correlation dip averaged over the
//!   coincidence window, in closed form ([`BroadenedModel::c_exp_closed`]) and
//!   as an independent nested-quadrature evaluation
//!   ([`BroadenedModel::c_exp_quadrature`])
//! - [`fit`]: damped least squares with analytic Jacobian for (alpha, tau_c,
//!   baseline), plus an optional simplex fallback
//! - [`coherence_to_energy`]: coherence time -> energy-width conversion

pub mod energy;
pub mod erf;
pub mod fit;
pub mod model;
pub mod quad;

pub use energy::coherence_to_energy;
pub use erf::erf;
pub use fit::{fit, fit_curve, FitOptions, FitResult, FixedParams, InitParams};
pub use model::BroadenedModel;
pub use quad::adaptive_quadrature;

/// Errors from model validation, quadrature, and fitting.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),
    #[error("quadrature did not converge: achieved {achieved:.3e}, requested {requested:.3e}")]
    QuadratureNoConverge { achieved: f64, requested: f64 },
    #[error("fit needs at least {need} bins, got {got}")]
    TooFewBins { need: usize, got: usize },
    #[error("fit input has non-positive error at bin {index}")]
    BadErrorBar { index: usize },
    #[error("fit input has non-finite value at bin {index}")]
    NonFiniteInput { index: usize },
    #[error("normal equations are singular and damping could not rescue them")]
    SingularNormalMatrix,
}

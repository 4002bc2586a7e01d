//! Coherence-time to energy-width conversion.

use crate::ModelError;

/// hbar in neV * ns.
pub const HBAR_NEV_NS: f64 = 658.211_956_9;

/// Energy width associated with a coherence time: `delta_E = hbar / tau_c`,
/// tau_c in ns, result in neV.
pub fn coherence_to_energy(tau_c_ns: f64) -> Result<f64, ModelError> {
    if !tau_c_ns.is_finite() && tau_c_ns != f64::INFINITY {
        return Err(ModelError::InvalidParameter(format!(
            "tau_c must be positive, got {tau_c_ns}"
        )));
    }
    if tau_c_ns <= 0.0 {
        return Err(ModelError::InvalidParameter(format!(
            "tau_c must be positive, got {tau_c_ns}"
        )));
    }
    Ok(HBAR_NEV_NS / tau_c_ns)
}

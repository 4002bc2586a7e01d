//! Gaussian-broadened correlation dip averaged over the coincidence window.
//!
//! The underlying two-time correlation is `c(t) = b - alpha * exp(-beta t^2)`
//! with `beta = 1/(2 tau_c^2)`. Detector timing spread convolves it with a
//! Gaussian kernel `W(t) = sqrt(w/pi) exp(-w t^2)`, `w = 1/tau_t^2`, and the
//! counting window of width `delta` then averages the result over
//! `[t, t + delta)`. Both smoothing steps are Gaussian integrals, so the
//! curve has a closed form in erf with the combined inverse width
//! `1/gamma = 1/beta + 1/w = 2 tau_c^2 + tau_t^2`.

use crate::erf::erf;
use crate::quad::adaptive_quadrature;
use crate::ModelError;

/// Parameters of the windowed, broadened correlation curve. Times in ns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BroadenedModel {
    /// Dip amplitude; 0 = uncorrelated, 1 = full suppression at zero lag,
    /// negative values describe an excess (bunching) instead of a dip.
    pub alpha: f64,
    /// Coherence time of the dip, ns.
    pub tau_c: f64,
    /// RMS width parameter of the Gaussian timing kernel, ns.
    pub tau_t: f64,
    /// Coincidence window width, ns.
    pub delta: f64,
    /// Asymptotic level of the normalized curve.
    pub baseline: f64,
}

impl BroadenedModel {
    pub fn new(alpha: f64, tau_c: f64, tau_t: f64, delta: f64, baseline: f64) -> Result<Self, ModelError> {
        let m = Self {
            alpha,
            tau_c,
            tau_t,
            delta,
            baseline,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("tau_c", self.tau_c),
            ("tau_t", self.tau_t),
            ("delta", self.delta),
            ("baseline", self.baseline),
        ] {
            if !v.is_finite() {
                return Err(ModelError::InvalidParameter(format!("{name} = {v}")));
            }
        }
        if self.tau_c <= 0.0 {
            return Err(ModelError::InvalidParameter(format!(
                "tau_c must be > 0, got {}",
                self.tau_c
            )));
        }
        if self.tau_t < 0.0 {
            return Err(ModelError::InvalidParameter(format!(
                "tau_t must be >= 0, got {}",
                self.tau_t
            )));
        }
        if self.delta <= 0.0 {
            return Err(ModelError::InvalidParameter(format!(
                "delta must be > 0, got {}",
                self.delta
            )));
        }
        Ok(())
    }

    /// Inverse squared width of the bare dip: `1/(2 tau_c^2)`.
    pub fn beta(&self) -> f64 {
        1.0 / (2.0 * self.tau_c * self.tau_c)
    }

    /// Combined inverse squared width after broadening:
    /// `gamma = 1 / (2 tau_c^2 + tau_t^2)`; equals `beta` as `tau_t -> 0`.
    pub fn gamma(&self) -> f64 {
        1.0 / (2.0 * self.tau_c * self.tau_c + self.tau_t * self.tau_t)
    }

    /// Closed-form windowed curve:
    /// `b - alpha/(2 delta) sqrt(pi/beta) [erf(sqrt(gamma)(t+delta)) - erf(sqrt(gamma) t)]`.
    pub fn c_exp_closed(&self, t: f64) -> f64 {
        let sg = self.gamma().sqrt();
        let amp = self.alpha / (2.0 * self.delta) * (std::f64::consts::PI / self.beta()).sqrt();
        self.baseline - amp * (erf(sg * (t + self.delta)) - erf(sg * t))
    }

    /// Depth of the windowed dip below baseline at zero lag:
    /// `alpha/(2 delta) sqrt(pi/beta) erf(sqrt(gamma) delta)`.
    ///
    /// For `gamma * delta^2 >> 1` this tends to
    /// `alpha sqrt(pi/2) tau_c / delta`: the window dilutes the dip by the
    /// ratio of the correlation width to the window width.
    pub fn dip_depth(&self) -> f64 {
        let amp = self.alpha / (2.0 * self.delta) * (std::f64::consts::PI / self.beta()).sqrt();
        amp * erf(self.gamma().sqrt() * self.delta)
    }

    /// Numerical evaluation of the same curve by nested adaptive quadrature:
    /// the timing kernel is integrated over [-8 tau_t, 8 tau_t] (truncation
    /// error below 1e-28 of the mass) inside a window average over
    /// [t, t + delta]. Independent of [`c_exp_closed`] and of [`erf`]; serves
    /// as the oracle in equivalence tests. Requires `tau_t > 0`.
    pub fn c_exp_quadrature(&self, t: f64, tol: f64) -> Result<f64, ModelError> {
        self.validate()?;
        if self.tau_t <= 0.0 {
            return Err(ModelError::InvalidParameter(
                "quadrature evaluation needs tau_t > 0 (closed form handles tau_t = 0)".into(),
            ));
        }
        if !(tol > 0.0) {
            return Err(ModelError::InvalidParameter(format!("tol must be > 0, got {tol}")));
        }
        let w = 1.0 / (self.tau_t * self.tau_t);
        let kernel_norm = (w / std::f64::consts::PI).sqrt();
        let beta = self.beta();
        let span = 8.0 * self.tau_t;
        let inner_tol = 0.25 * tol;
        let outer_tol = 0.25 * tol * self.delta;

        // When the dip is much narrower than the kernel (tau_c << tau_t),
        // adaptive refinement can converge on the smooth envelope without
        // ever sampling the dip. Explicit breakpoints around each narrow
        // feature force a panel onto it.
        let smeared = |tp: f64| -> Result<f64, ModelError> {
            quad_with_breaks(
                |s| {
                    let c = self.baseline - self.alpha * (-beta * (tp - s) * (tp - s)).exp();
                    kernel_norm * (-w * s * s).exp() * c
                },
                -span,
                span,
                &[tp - 12.0 * self.tau_c, tp, tp + 12.0 * self.tau_c],
                inner_tol,
            )
        };

        // The outer integrand raises inner failures through a cell; adaptive
        // quadrature itself only sees finite values.
        let inner_failure = std::cell::Cell::new(None);
        let smeared_width = (self.tau_c * self.tau_c + self.tau_t * self.tau_t).sqrt();
        let outer = quad_with_breaks(
            |tp| match smeared(tp) {
                Ok(v) => v,
                Err(e) => {
                    inner_failure.set(Some(e));
                    0.0
                }
            },
            t,
            t + self.delta,
            &[-12.0 * smeared_width, 12.0 * smeared_width],
            outer_tol,
        )?;
        if let Some(e) = inner_failure.take() {
            return Err(e);
        }
        Ok(outer / self.delta)
    }
}

/// Integrate over [lo, hi] split at the interior breakpoints, with the
/// error budget divided across the pieces.
fn quad_with_breaks<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    tol: f64,
) -> Result<f64, ModelError> {
    let mut edges = vec![lo];
    for &b in breaks {
        if b > lo && b < hi {
            edges.push(b);
        }
    }
    edges.push(hi);
    edges.sort_by(f64::total_cmp);
    let piece_tol = tol / (edges.len() - 1) as f64;
    let mut total = 0.0;
    for pair in edges.windows(2) {
        total += adaptive_quadrature(&f, pair[0], pair[1], piece_tol)?;
    }
    Ok(total)
}

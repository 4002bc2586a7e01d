//! Scintillator timing model: capture and light-decay delays.
//!
//! Each detection is delayed by two independent draws:
//!
//! * a capture delay — an exponential-attenuation depth profile mapped to
//!   transit time and truncated at the maximum traveling time, with the
//!   attenuation scale tuned so the truncated mean equals `mean_capture`;
//! * a light-decay delay — an exponential truncated at the decay constant,
//!   with its scale tuned so the truncated mean equals `mean_decay`.
//!
//! The downstream correlation analysis is broadened not by the per-event
//! delay itself but by the *difference* of two independent delays, so the
//! figure of merit is the pair-difference kernel rms, `sqrt(2) *
//! delay_std()`. With the default parameters that is about 147 ns, within
//! 10% of the quoted 140 ns net broadening scale, which this model targets
//! deliberately through a non-Gaussian microscopic kernel.

use crate::DetectorError;

/// Timing response of the scintillator/PMT chain. All times in ns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScintillatorModel {
    /// Light decay constant; also the truncation of the decay-delay draw.
    pub decay_time: f64,
    /// Mean capture delay after truncation.
    pub mean_capture: f64,
    /// Maximum traveling time; truncation of the capture-delay draw.
    pub max_travel: f64,
    /// Effective mean of the truncated decay delay (first-photoelectron
    /// scale, distinct from the decay constant itself).
    pub mean_decay: f64,
    /// Net rms broadening scale the combined kernel is expected to match
    /// (checked to 10% at validation unless the model is degenerate).
    pub rms_total: f64,
}

impl Default for ScintillatorModel {
    fn default() -> Self {
        ScintillatorModel {
            decay_time: 250.0,
            mean_capture: 100.0,
            max_travel: 300.0,
            mean_decay: 100.0,
            rms_total: 140.0,
        }
    }
}

/// Scale and truncation of one truncated-exponential draw, plus its exact
/// first two central moments.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TruncExp {
    pub scale: f64,
    pub cap: f64,
    pub mean: f64,
    pub var: f64,
}

impl TruncExp {
    /// Degenerate zero-delay draw.
    fn zero() -> Self {
        TruncExp { scale: 0.0, cap: 0.0, mean: 0.0, var: 0.0 }
    }

    /// Solve for the exponential scale whose truncated mean on [0, cap]
    /// equals `mean`. Requires 0 < mean < cap/2 (the truncated-exponential
    /// family spans means in (0, cap/2), approaching uniform as the scale
    /// diverges).
    fn solve(mean: f64, cap: f64) -> Result<Self, DetectorError> {
        if cap == 0.0 && mean == 0.0 {
            return Ok(TruncExp::zero());
        }
        if !(cap > 0.0) || !(mean > 0.0) || mean >= cap / 2.0 {
            return Err(DetectorError::InvalidConfig(format!(
                "truncated-exponential mean {mean} ns unreachable on [0, {cap}] ns \
                 (need 0 < mean < cap/2)"
            )));
        }
        // Bisection on r = cap/scale: mean/cap = 1/r - 1/(e^r - 1) is
        // strictly decreasing in r, from 1/2 at r -> 0 to 0 at r -> inf.
        let target = mean / cap;
        let mu_ratio = |r: f64| 1.0 / r - 1.0 / r.exp_m1();
        let (mut lo, mut hi) = (1e-9, 700.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mu_ratio(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let r = 0.5 * (lo + hi);
        let scale = cap / r;
        // Exact moments of the truncated distribution.
        let e = (-r).exp();
        let denom = 1.0 - e;
        let m2 = (2.0 * scale * scale
            - e * (cap * cap + 2.0 * scale * cap + 2.0 * scale * scale))
            / denom;
        let mu = scale - cap * e / denom;
        Ok(TruncExp {
            scale,
            cap,
            mean: mu,
            var: m2 - mu * mu,
        })
    }

    /// Inverse-CDF draw from a uniform u in [0, 1).
    pub fn sample(&self, u: f64) -> f64 {
        if self.cap == 0.0 {
            return 0.0;
        }
        let tail = (-self.cap / self.scale).exp();
        -self.scale * (1.0 - u * (1.0 - tail)).ln()
    }
}

impl ScintillatorModel {
    pub fn validate(&self) -> Result<(), DetectorError> {
        for (name, v) in [
            ("decay_time", self.decay_time),
            ("mean_capture", self.mean_capture),
            ("max_travel", self.max_travel),
            ("mean_decay", self.mean_decay),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(DetectorError::InvalidConfig(format!(
                    "{name} = {v} must be finite and nonnegative"
                )));
            }
        }
        if !(self.rms_total > 0.0) || !self.rms_total.is_finite() {
            return Err(DetectorError::InvalidConfig(format!(
                "rms_total = {} must be positive",
                self.rms_total
            )));
        }
        // Solvability (also covers mean_capture < max_travel).
        let cap = self.capture_draw()?;
        let dec = self.decay_draw()?;
        // Tie the microscopic kernel to the quoted net broadening scale,
        // except in the degenerate zero-delay mode used for identity tests.
        let kernel_rms = (2.0 * (cap.var + dec.var)).sqrt();
        if kernel_rms > 0.0 && (kernel_rms - self.rms_total).abs() > 0.10 * self.rms_total {
            return Err(DetectorError::InvalidConfig(format!(
                "pair-difference kernel rms {kernel_rms:.1} ns deviates more than 10% \
                 from rms_total {} ns",
                self.rms_total
            )));
        }
        Ok(())
    }

    pub(crate) fn capture_draw(&self) -> Result<TruncExp, DetectorError> {
        TruncExp::solve(self.mean_capture, self.max_travel)
    }

    pub(crate) fn decay_draw(&self) -> Result<TruncExp, DetectorError> {
        TruncExp::solve(self.mean_decay, self.decay_time)
    }

    /// Exact mean of the total per-event delay.
    pub fn delay_mean(&self) -> Result<f64, DetectorError> {
        Ok(self.capture_draw()?.mean + self.decay_draw()?.mean)
    }

    /// Exact standard deviation of the total per-event delay.
    pub fn delay_std(&self) -> Result<f64, DetectorError> {
        Ok((self.capture_draw()?.var + self.decay_draw()?.var).sqrt())
    }

    /// Rms of the pair-difference kernel (the distribution of one event's
    /// delay minus another's): `sqrt(2)` times the per-event spread.
    pub fn kernel_rms(&self) -> Result<f64, DetectorError> {
        Ok(std::f64::consts::SQRT_2 * self.delay_std()?)
    }

    /// Timing-spread scale to hand the curve fit, folding in the clock.
    ///
    /// The fit kernel is a Gaussian of variance `tau_t^2 / 2`; equating that
    /// to the pair-difference variance `2 * (delay_var + tick^2/12)` (each
    /// event also carries uniform quantization noise) gives
    /// `tau_t = 2 * sqrt(delay_var + tick^2/12)`.
    pub fn effective_fit_spread(&self, tick_ns: f64) -> Result<f64, DetectorError> {
        let var = self.delay_std()?.powi(2) + tick_ns * tick_ns / 12.0;
        Ok(2.0 * var.sqrt())
    }

    /// Largest possible total delay (capture cap plus decay cap).
    pub fn max_delay(&self) -> f64 {
        self.max_travel + self.decay_time
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solved_scales_match_independent_calculation() {
        // Bisecting mean/cap = 1/r - 1/(e^r - 1) by hand gives r = 2.1490
        // for the capture draw (cap 300, mean 100) and r = 1.2300 for the
        // decay draw (cap 250, mean 100).
        let m = ScintillatorModel::default();
        let cap = m.capture_draw().unwrap();
        let dec = m.decay_draw().unwrap();
        assert!((cap.scale - 300.0 / 2.1490).abs() < 0.1, "capture scale {}", cap.scale);
        assert!((dec.scale - 250.0 / 1.2300).abs() < 0.1, "decay scale {}", dec.scale);
        assert!((cap.mean - 100.0).abs() < 1e-9);
        assert!((dec.mean - 100.0).abs() < 1e-9);
    }

    #[test]
    fn analytic_moments_match_numeric_integration() {
        let m = ScintillatorModel::default();
        for draw in [m.capture_draw().unwrap(), m.decay_draw().unwrap()] {
            // Midpoint rule over the truncated density.
            let n = 400_000;
            let h = draw.cap / n as f64;
            let norm = 1.0 - (-draw.cap / draw.scale).exp();
            let (mut m1, mut m2) = (0.0, 0.0);
            for k in 0..n {
                let t = (k as f64 + 0.5) * h;
                let p = (-t / draw.scale).exp() / draw.scale / norm * h;
                m1 += p * t;
                m2 += p * t * t;
            }
            assert!((m1 - draw.mean).abs() < 1e-3, "mean {m1} vs {}", draw.mean);
            assert!((m2 - m1 * m1 - draw.var).abs() < 0.5, "var vs {}", draw.var);
        }
    }

    #[test]
    fn default_model_hits_the_quoted_broadening_scale() {
        let m = ScintillatorModel::default();
        assert!((m.delay_mean().unwrap() - 200.0).abs() < 1e-9);
        let std = m.delay_std().unwrap();
        assert!((104.0..=104.6).contains(&std), "per-event std {std}");
        let rms = m.kernel_rms().unwrap();
        assert!((147.0..=148.0).contains(&rms), "kernel rms {rms}");
        // Within 10% of 140.
        assert!((126.0..=154.0).contains(&rms));
        let fit = m.effective_fit_spread(25.0).unwrap();
        assert!((208.8..=209.4).contains(&fit), "fit spread {fit}");
        m.validate().unwrap();
    }

    #[test]
    fn sampler_respects_truncation_and_matches_moments() {
        let m = ScintillatorModel::default();
        let draw = m.capture_draw().unwrap();
        // Plow a dense uniform grid through the inverse CDF.
        let n = 200_000;
        let (mut s1, mut s2, mut max) = (0.0, 0.0, 0.0f64);
        for k in 0..n {
            let u = (k as f64 + 0.5) / n as f64;
            let t = draw.sample(u);
            assert!((0.0..=draw.cap).contains(&t));
            s1 += t;
            s2 += t * t;
            max = max.max(t);
        }
        let mean = s1 / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!((mean - draw.mean).abs() < 0.05, "sampled mean {mean}");
        assert!((var - draw.var).abs() < 20.0, "sampled var {var}");
        assert!(max > 0.95 * draw.cap);
    }

    #[test]
    fn unreachable_means_are_rejected() {
        let m = ScintillatorModel {
            mean_capture: 160.0, // above 300/2
            ..ScintillatorModel::default()
        };
        assert!(m.validate().is_err());
        let m = ScintillatorModel {
            mean_decay: 130.0, // above 250/2
            ..ScintillatorModel::default()
        };
        assert!(m.validate().is_err());
    }

    #[test]
    fn mismatched_rms_total_is_rejected_but_degenerate_mode_passes() {
        let m = ScintillatorModel {
            rms_total: 300.0,
            ..ScintillatorModel::default()
        };
        assert!(m.validate().is_err());
        let zero = ScintillatorModel {
            decay_time: 0.0,
            mean_capture: 0.0,
            max_travel: 0.0,
            mean_decay: 0.0,
            rms_total: 140.0,
        };
        zero.validate().unwrap();
        assert_eq!(zero.delay_mean().unwrap(), 0.0);
        assert_eq!(zero.max_delay(), 0.0);
    }
}

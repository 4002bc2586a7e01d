//! DAQ clock: exact conversions between nanoseconds and integer ticks.

use crate::ClockError;

/// Nanoseconds per second; also the constraint `frequency_hz * tick_ns == NS_PER_S`.
pub const NS_PER_S: u64 = 1_000_000_000;

/// Largest continuous timestamp accepted by [`ClockConfig::quantize`]: above
/// 2^53 ns an f64 no longer resolves individual nanoseconds.
pub const MAX_QUANTIZE_NS: f64 = 9_007_199_254_740_992.0;

/// A free-running acquisition clock with an integer-nanosecond tick period.
///
/// Only frequencies that divide 1 GHz are accepted, which keeps every
/// conversion exact in integer arithmetic (the default 40 MHz clock has a
/// 25 ns tick).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClockConfig {
    frequency_hz: u64,
    tick_ns: u64,
}

impl ClockConfig {
    /// Build a clock from its frequency in Hz.
    pub fn from_frequency(frequency_hz: u64) -> Result<Self, ClockError> {
        if frequency_hz == 0 || NS_PER_S % frequency_hz != 0 {
            return Err(ClockError::BadFrequency(frequency_hz));
        }
        Ok(Self {
            frequency_hz,
            tick_ns: NS_PER_S / frequency_hz,
        })
    }

    /// Clock frequency in Hz.
    pub fn frequency_hz(&self) -> u64 {
        self.frequency_hz
    }

    /// Tick period in nanoseconds.
    pub fn tick_ns(&self) -> u64 {
        self.tick_ns
    }

    /// Exact integer quantization: floor(t / tick). Inverse of
    /// [`ticks_to_ns`](Self::ticks_to_ns) on the tick grid for all of u64.
    pub fn ns_to_ticks(&self, t_ns: u64) -> u64 {
        t_ns / self.tick_ns
    }

    /// Quantize a continuous timestamp (ns) onto the tick grid: floor(t / tick).
    ///
    /// The floor is corrected against floating-point division error so that
    /// `q * tick <= t < (q + 1) * tick` holds exactly. Times beyond 2^53 ns
    /// (where f64 stops resolving nanoseconds) are a range error.
    pub fn quantize(&self, t_ns: f64) -> Result<u64, ClockError> {
        if !t_ns.is_finite() || t_ns < 0.0 {
            return Err(ClockError::Domain(t_ns));
        }
        if t_ns > MAX_QUANTIZE_NS {
            return Err(ClockError::Range(u64::MAX));
        }
        let p = self.tick_ns as f64;
        let mut q = (t_ns / p).floor();
        // One step of correction in each direction covers any half-ulp
        // rounding of the division; q * p is exact below 2^53.
        if (q + 1.0) * p <= t_ns {
            q += 1.0;
        } else if q * p > t_ns {
            q -= 1.0;
        }
        Ok(q as u64)
    }

    /// Exact tick -> ns conversion; errors when the product leaves u64 range.
    pub fn ticks_to_ns(&self, ticks: u64) -> Result<u64, ClockError> {
        ticks
            .checked_mul(self.tick_ns)
            .ok_or(ClockError::Range(ticks))
    }
}

impl Default for ClockConfig {
    /// 40 MHz (25 ns tick), the DAQ default.
    fn default() -> Self {
        Self::from_frequency(40_000_000).expect("default clock divides 1 GHz")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_clock_is_25ns() {
        let c = ClockConfig::default();
        assert_eq!(c.frequency_hz(), 40_000_000);
        assert_eq!(c.tick_ns(), 25);
    }

    #[test]
    fn rejects_non_divisor_frequency() {
        assert!(matches!(
            ClockConfig::from_frequency(30_000_000),
            Err(ClockError::BadFrequency(_))
        ));
        assert!(matches!(
            ClockConfig::from_frequency(0),
            Err(ClockError::BadFrequency(0))
        ));
    }

    #[test]
    fn integer_quantization_floors() {
        let c = ClockConfig::default();
        assert_eq!(c.ns_to_ticks(25), 1);
        assert_eq!(c.ns_to_ticks(0), 0);
        assert_eq!(c.ns_to_ticks(137), 5);
        assert_eq!(c.ns_to_ticks(u64::MAX), u64::MAX / 25);
    }

    #[test]
    fn quantize_floors() {
        let c = ClockConfig::default();
        assert_eq!(c.quantize(25.0).unwrap(), 1);
        assert_eq!(c.quantize(0.0).unwrap(), 0);
        assert_eq!(c.quantize(137.0).unwrap(), 5);
        assert_eq!(c.quantize(24.999_999).unwrap(), 0);
    }

    #[test]
    fn quantize_rejects_bad_domain() {
        let c = ClockConfig::default();
        assert!(matches!(c.quantize(-1.0), Err(ClockError::Domain(_))));
        assert!(matches!(c.quantize(f64::NAN), Err(ClockError::Domain(_))));
        assert!(matches!(
            c.quantize(f64::INFINITY),
            Err(ClockError::Domain(_))
        ));
        assert!(matches!(c.quantize(1.0e16), Err(ClockError::Range(_))));
    }

    #[test]
    fn ticks_to_ns_exact_and_overflow() {
        let c = ClockConfig::default();
        assert_eq!(c.ticks_to_ns(1).unwrap(), 25);
        assert_eq!(c.ticks_to_ns(0).unwrap(), 0);
        assert_eq!(c.ticks_to_ns(16).unwrap(), 400);
        assert!(matches!(
            c.ticks_to_ns(u64::MAX / 25 + 1),
            Err(ClockError::Range(_))
        ));
    }

    #[test]
    fn quantize_bracket_holds_near_boundaries() {
        let c = ClockConfig::default();
        // Values straddling tick boundaries, including ones that round badly.
        for &t in &[
            0.0,
            24.999999999999996,
            25.000000000000004,
            74.99999999999999,
            75.00000000000001,
            1.0e13 - 1e-3,
            9.999999999999998e12,
        ] {
            let q = c.quantize(t).unwrap();
            let lo = q as f64 * 25.0;
            assert!(lo <= t && t < lo + 25.0, "t={t} q={q}");
        }
    }
}

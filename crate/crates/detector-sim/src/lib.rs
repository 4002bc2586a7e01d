//! Detector and acquisition model: scintillation delays, pixel assignment,
//! clock quantization, optical crosstalk, dark counts, and the duty cycle.
//!
//! The composition order is fixed: response, then crosstalk, then
//! background, then duty cycle — mirroring the physical chain where light
//! crosstalk duplicates real detections, dark counts appear independently,
//! and the acquisition gate truncates everything equally.

pub mod pipeline;
pub mod scintillator;

pub use pipeline::{
    apply_detector_chain, apply_duty_cycle, apply_response, inject_background, inject_crosstalk,
};
pub use scintillator::ScintillatorModel;

use timetag_core::{ClockConfig, ClockError};

/// Detector grid is a fixed 8x8 anode array.
pub const GRID_SIDE: u16 = 8;
pub const PIXEL_COUNT: u16 = GRID_SIDE * GRID_SIDE;

#[derive(Debug, thiserror::Error)]
pub enum DetectorError {
    #[error("invalid detector config: {0}")]
    InvalidConfig(String),
    #[error("input not sorted at index {0}")]
    UnsortedInput(usize),
    #[error(transparent)]
    Clock(#[from] ClockError),
    #[error(transparent)]
    Merge(#[from] timetag_core::MergeError),
}

/// Crosstalk: a detected event may light up an adjacent pixel once more.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrosstalkModel {
    /// Probability that an event spawns one duplicate.
    pub probability: f64,
    /// Duplicate lands uniformly within this many ns after its source.
    pub jitter_window_ns: f64,
}

impl Default for CrosstalkModel {
    fn default() -> Self {
        CrosstalkModel {
            probability: 0.0,
            jitter_window_ns: 150.0,
        }
    }
}

impl CrosstalkModel {
    pub fn validate(&self) -> Result<(), DetectorError> {
        if !(0.0..=1.0).contains(&self.probability) || !self.probability.is_finite() {
            return Err(DetectorError::InvalidConfig(format!(
                "crosstalk probability {} outside [0, 1]",
                self.probability
            )));
        }
        if !(self.jitter_window_ns > 0.0) || !self.jitter_window_ns.is_finite() {
            return Err(DetectorError::InvalidConfig(format!(
                "crosstalk jitter window {} must be positive",
                self.jitter_window_ns
            )));
        }
        Ok(())
    }
}

/// Full per-run detector parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    /// Relative illumination weight per pixel (length 64, row-major 8x8).
    /// Zero-weight pixels receive no beam events (they still see dark
    /// counts and crosstalk).
    pub illumination: Vec<f64>,
    pub scintillator: ScintillatorModel,
    pub crosstalk: CrosstalkModel,
    /// Dark-count rate per pixel in events/s.
    pub dark_rate_hz: f64,
    pub clock: ClockConfig,
    /// Live window per acquisition cycle.
    pub cycle_length_ns: u64,
    /// Readout gap after each live window.
    pub dead_time_ns: u32,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            illumination: vec![1.0; PIXEL_COUNT as usize],
            scintillator: ScintillatorModel::default(),
            crosstalk: CrosstalkModel::default(),
            dark_rate_hz: 0.0,
            clock: ClockConfig::default(),
            cycle_length_ns: 10_000_000_000,
            dead_time_ns: 10_000_000,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<(), DetectorError> {
        if self.illumination.len() != PIXEL_COUNT as usize {
            return Err(DetectorError::InvalidConfig(format!(
                "illumination map has {} weights, the grid has {PIXEL_COUNT} pixels",
                self.illumination.len()
            )));
        }
        let mut sum = 0.0;
        for (i, &w) in self.illumination.iter().enumerate() {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(DetectorError::InvalidConfig(format!(
                    "illumination weight {w} at pixel {i} must be finite and nonnegative"
                )));
            }
            sum += w;
        }
        if !(sum > 0.0) {
            return Err(DetectorError::InvalidConfig(
                "illumination map sums to zero".into(),
            ));
        }
        self.scintillator.validate()?;
        self.crosstalk.validate()?;
        if !(self.dark_rate_hz >= 0.0) || !self.dark_rate_hz.is_finite() {
            return Err(DetectorError::InvalidConfig(format!(
                "dark rate {} must be finite and nonnegative",
                self.dark_rate_hz
            )));
        }
        if self.cycle_length_ns == 0 {
            return Err(DetectorError::InvalidConfig(
                "cycle length must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Derived per-stream seed: splitmix64 over (seed, salt). This is the
/// documented splitting rule used everywhere a run seed fans out into
/// independent random streams.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed
        .wrapping_add(salt.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

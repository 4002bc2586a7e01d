//! Event and run-metadata types.

use crate::ClockConfig;

/// Ordinary detected count.
pub const FLAG_REAL: u16 = 0;
/// Duplicate injected by the cross-talk model (simulator ground truth).
pub const FLAG_CROSSTALK: u16 = 1;
/// Dark count injected by the background model (simulator ground truth).
pub const FLAG_BACKGROUND: u16 = 2;

/// One detected count: clock tick, pixel id, and a provenance flag.
///
/// Flags exist so the simulator can label what it injected; the analysis
/// chain never reads them. Ordering and merging use `(tick, pixel)` only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    pub tick: u64,
    pub pixel: u16,
    pub flags: u16,
}

impl Event {
    pub fn new(tick: u64, pixel: u16) -> Self {
        Self {
            tick,
            pixel,
            flags: FLAG_REAL,
        }
    }

    pub fn with_flags(tick: u64, pixel: u16, flags: u16) -> Self {
        Self { tick, pixel, flags }
    }

    /// Sort key for event streams: `(tick, pixel)` ascending. Flags never
    /// participate in ordering.
    #[inline]
    pub fn key(&self) -> (u64, u16) {
        (self.tick, self.pixel)
    }
}

/// Returns true when the slice is sorted by `(tick, pixel)` ascending.
pub fn is_sorted(events: &[Event]) -> bool {
    events.windows(2).all(|w| w[0].key() <= w[1].key())
}

/// Per-run header: everything needed to interpret a bare tick stream.
///
/// `source_label` is in-memory provenance for reports and file names; the
/// NTT1 container has no field for it, so it does not survive a
/// encode/decode round trip (decode restores it as an empty string).
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetadata {
    pub clock: ClockConfig,
    pub pixel_count: u16,
    pub seed: u64,
    /// Beam-on span of one acquisition cycle, ns.
    pub cycle_length_ns: u64,
    /// Dead span between cycles, ns.
    pub dead_time_ns: u32,
    pub source_label: String,
}

impl Default for RunMetadata {
    /// 40 MHz clock, 64 pixels, 10 s cycles separated by 10 ms of dead time.
    fn default() -> Self {
        Self {
            clock: ClockConfig::default(),
            pixel_count: 64,
            seed: 0,
            cycle_length_ns: 10_000_000_000,
            dead_time_ns: 10_000_000,
            source_label: String::new(),
        }
    }
}

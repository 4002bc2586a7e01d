//! Core time-tag data model shared by the simulator and the analysis chain.
//!
//! Components:
//! - [`Event`]: one detected count, quantized to clock ticks, tagged with a pixel id
//! - [`ClockConfig`]: the DAQ clock; converts between continuous ns and integer ticks
//! - [`RunMetadata`]: per-run header carried alongside an event stream
//! - [`merge_streams`]: deterministic k-way merge of sorted event streams
//! - [`format`]: the NTT1 binary run format (encode / decode / streaming writer)
//!
//! Times are nanoseconds throughout. Event streams are ordered by `(tick, pixel)`
//! ascending; every operation that consumes a stream validates that ordering
//! instead of silently re-sorting.

pub mod clock;
pub mod event;
pub mod format;
pub mod merge;

pub use clock::ClockConfig;
pub use event::{is_sorted, Event, RunMetadata, FLAG_BACKGROUND, FLAG_CROSSTALK, FLAG_REAL};
pub use format::{decode_run, encode_run, FormatError, RunWriter};
pub use merge::{merge_streams, MergeError};

/// Errors from clock construction and tick/ns conversions.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClockError {
    /// Frequency must be a positive divisor of 1e9 so the tick period is an
    /// exact integer number of nanoseconds.
    #[error("clock frequency {0} Hz does not yield an integer tick period (must divide 1_000_000_000)")]
    BadFrequency(u64),
    /// Negative or non-finite time handed to a quantizer.
    #[error("time {0} ns is outside the representable domain (must be finite and >= 0)")]
    Domain(f64),
    /// Result does not fit the 64-bit ns range.
    #[error("tick count {0} overflows the 64-bit nanosecond range")]
    Range(u64),
}

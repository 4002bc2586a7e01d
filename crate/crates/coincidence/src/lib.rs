//! Coincidence analysis for time-tagged event streams.
//!
//! The chain mirrors the hardware procedure it models:
//! 1. [`clean_events`]: drop group events that coincide with any pixel
//!    outside the two detector groups (spurious-coincidence veto), then
//!    collapse bursts within one group to a single count (dedup)
//! 2. [`delay_histogram`]: start-stop delay histogram between the two groups
//! 3. [`windowed_rate`]: boxcar sum over the coincidence window
//! 4. [`normalize`]: scale to the far-lag plateau with Poisson errors
//!
//! [`analyze_events`] runs the whole chain; [`single_group_histogram`] is the
//! intra-group variant pairing distinct pixels of one group. Analysis never
//! reads event flags — simulator ground truth stays invisible here.

pub mod clean;
pub mod config;
pub mod csv;
pub mod histogram;

pub use clean::{clean_events, CleanStats, CleanedEvents, TaggedTime};
pub use config::AnalysisConfig;
pub use csv::{read_histogram_csv, write_histogram_csv, CsvCurve};
pub use histogram::{
    analyze_events, delay_histogram, normalize, single_group_histogram, windowed_rate,
    windowed_sums, DelayHistogram,
};

use timetag_core::ClockError;

/// Errors from analysis configuration and the histogram chain.
#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("pixel groups overlap (pixel {0}) but single-group mode is off")]
    OverlappingGroups(u16),
    #[error("{0} pixel group is empty")]
    EmptyGroup(&'static str),
    #[error("bad binning: {0}")]
    BadBinning(String),
    #[error("bad normalization region: {0}")]
    BadNormRegion(String),
    #[error("normalization region has zero total counts")]
    NormalizationZero,
    #[error("normalization region has only {0} bins with counts, need >= 3")]
    TooFewNormBins(usize),
    #[error("event stream unsorted at index {0}")]
    UnsortedEvents(usize),
    #[error(transparent)]
    Clock(#[from] ClockError),
    #[error("malformed histogram CSV at line {line}: {reason}")]
    MalformedCsv { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

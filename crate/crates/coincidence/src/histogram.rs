//! Delay histogram, coincidence-window boxcar, and plateau normalization.

use crate::clean::{clean_events, CleanStats, TaggedTime};
use crate::{AnalysisConfig, AnalysisError};
use timetag_core::{ClockConfig, Event};

/// Normalized coincidence curve plus everything needed to reproduce it.
#[derive(Debug, Clone)]
pub struct DelayHistogram {
    pub bin_width_ns: u64,
    pub delta_ns: u64,
    pub max_lag_ns: u64,
    pub norm_region_ns: (u64, u64),
    /// Curve abscissa: start-window lag `t` for `t = 0, w, ..., max_lag`.
    pub lag_ns: Vec<f64>,
    /// Raw per-bin pair counts, extended to `max_lag + delta` so the boxcar
    /// at the last curve point still has a full window of data.
    pub raw_counts: Vec<u64>,
    /// Pair count inside `[t, t + delta)` for each curve point.
    pub window_sums: Vec<u64>,
    /// Windowed rate divided by the plateau mean; the measured correlation.
    pub c_norm: Vec<f64>,
    /// Poisson one-sigma error on `c_norm` (zero-count windows get a
    /// one-count floor so the error is never zero).
    pub err: Vec<f64>,
    /// Mean windowed per-bin rate over the normalization region.
    pub plateau: f64,
    /// Accepted start/stop events after cleaning.
    pub n_start: usize,
    pub n_stop: usize,
    pub clean_stats: CleanStats,
}

impl DelayHistogram {
    /// Curve points inside the normalization region, as indices into
    /// `lag_ns` / `c_norm`.
    pub fn norm_bins(&self) -> std::ops::Range<usize> {
        let lo = (self.norm_region_ns.0 / self.bin_width_ns) as usize;
        let hi = (self.norm_region_ns.1 / self.bin_width_ns) as usize;
        lo..hi
    }
}

/// Histogram of stop-minus-start delays in `[0, bin_width * n_bins)`.
///
/// Both inputs must be sorted ascending. Every ordered pair
/// `(t1, t2)` with `t1` from `start_ns`, `t2` from `stop_ns` and
/// `0 <= t2 - t1 < bin_width * n_bins` increments the bin `(t2-t1)/bin_width`.
pub fn delay_histogram(
    start_ns: &[u64],
    stop_ns: &[u64],
    bin_width_ns: u64,
    n_bins: usize,
) -> Vec<u64> {
    let mut bins = vec![0u64; n_bins];
    accumulate_delays(start_ns, stop_ns, bin_width_ns, &mut bins);
    bins
}

fn accumulate_delays(start_ns: &[u64], stop_ns: &[u64], bin_width_ns: u64, bins: &mut [u64]) {
    debug_assert!(start_ns.windows(2).all(|w| w[0] <= w[1]));
    debug_assert!(stop_ns.windows(2).all(|w| w[0] <= w[1]));
    let span = bin_width_ns * bins.len() as u64;
    let mut lo = 0usize;
    for &t1 in start_ns {
        while lo < stop_ns.len() && stop_ns[lo] < t1 {
            lo += 1;
        }
        for &t2 in &stop_ns[lo..] {
            let lag = t2 - t1;
            if lag >= span {
                break;
            }
            bins[(lag / bin_width_ns) as usize] += 1;
        }
    }
}

/// Same histogram computed on `threads` worker threads.
///
/// Start events are split into contiguous chunks and the per-chunk bin
/// vectors are summed, so the result is identical for every thread count.
pub fn delay_histogram_threaded(
    start_ns: &[u64],
    stop_ns: &[u64],
    bin_width_ns: u64,
    n_bins: usize,
    threads: usize,
) -> Vec<u64> {
    let threads = threads.max(1).min(start_ns.len().max(1));
    if threads == 1 {
        return delay_histogram(start_ns, stop_ns, bin_width_ns, n_bins);
    }
    let chunk = start_ns.len().div_ceil(threads);
    let mut partials: Vec<Vec<u64>> = Vec::new();
    std::thread::scope(|scope| {
        let handles: Vec<_> = start_ns
            .chunks(chunk)
            .map(|starts| {
                scope.spawn(move || {
                    let mut bins = vec![0u64; n_bins];
                    accumulate_delays(starts, stop_ns, bin_width_ns, &mut bins);
                    bins
                })
            })
            .collect();
        for h in handles {
            partials.push(h.join().expect("histogram worker panicked"));
        }
    });
    let mut bins = vec![0u64; n_bins];
    for part in partials {
        for (b, p) in bins.iter_mut().zip(part) {
            *b += p;
        }
    }
    bins
}

/// Sliding sums of `bins_per_window` consecutive raw bins.
///
/// Output index `j` holds `raw[j] + ... + raw[j + m - 1]`; the output is
/// `raw.len() - m + 1` long.
pub fn windowed_sums(raw: &[u64], bins_per_window: usize) -> Result<Vec<u64>, AnalysisError> {
    let m = bins_per_window;
    if m == 0 || m > raw.len() {
        return Err(AnalysisError::BadBinning(format!(
            "window of {m} bins does not fit a histogram of {} bins",
            raw.len()
        )));
    }
    let mut out = Vec::with_capacity(raw.len() - m + 1);
    let mut acc: u64 = raw[..m].iter().sum();
    out.push(acc);
    for j in m..raw.len() {
        acc = acc + raw[j] - raw[j - m];
        out.push(acc);
    }
    Ok(out)
}

/// Boxcar-averaged pair rate per bin: the coincidence window `delta_ns`
/// slid across the raw histogram in one-bin steps.
pub fn windowed_rate(
    raw: &[u64],
    bin_width_ns: u64,
    delta_ns: u64,
) -> Result<Vec<f64>, AnalysisError> {
    if bin_width_ns == 0 || delta_ns % bin_width_ns != 0 {
        return Err(AnalysisError::BadBinning(format!(
            "window {delta_ns} ns is not a multiple of the {bin_width_ns} ns bin width"
        )));
    }
    let m = (delta_ns / bin_width_ns) as usize;
    let sums = windowed_sums(raw, m)?;
    Ok(sums.iter().map(|&s| s as f64 / m as f64).collect())
}

/// Normalized curve with Poisson errors.
#[derive(Debug, Clone)]
pub struct Normalized {
    pub c: Vec<f64>,
    pub err: Vec<f64>,
    /// Mean windowed per-bin rate over the normalization region.
    pub plateau: f64,
}

/// Divide the windowed rate by its mean over `region_bins`.
///
/// `window_sums[j]` is the integer pair count in window `j`;
/// `bins_per_window` is the boxcar length `m`. Errors follow counting
/// statistics, `sqrt(S)/m` scaled by the plateau, with empty windows given a
/// one-count floor. Fails if the region is out of range, has zero total
/// counts, or fewer than three windows with any counts.
pub fn normalize(
    window_sums: &[u64],
    bins_per_window: usize,
    region_bins: std::ops::Range<usize>,
) -> Result<Normalized, AnalysisError> {
    if region_bins.end > window_sums.len() || region_bins.is_empty() {
        return Err(AnalysisError::BadNormRegion(format!(
            "window range {region_bins:?} outside curve of {} points",
            window_sums.len()
        )));
    }
    let region = &window_sums[region_bins.clone()];
    let total: u64 = region.iter().sum();
    if total == 0 {
        return Err(AnalysisError::NormalizationZero);
    }
    let nonzero = region.iter().filter(|&&s| s > 0).count();
    if nonzero < 3 {
        return Err(AnalysisError::TooFewNormBins(nonzero));
    }
    let m = bins_per_window as f64;
    let plateau = total as f64 / m / region.len() as f64;
    let scale = 1.0 / (m * plateau);
    let c = window_sums.iter().map(|&s| s as f64 * scale).collect();
    let err = window_sums
        .iter()
        .map(|&s| (s.max(1) as f64).sqrt() * scale)
        .collect();
    Ok(Normalized { c, err, plateau })
}

/// Run the full two-group analysis chain on a sorted event stream.
pub fn analyze_events(
    events: &[Event],
    cfg: &AnalysisConfig,
    clock: &ClockConfig,
    threads: usize,
) -> Result<DelayHistogram, AnalysisError> {
    cfg.validate()?;
    let cleaned = clean_events(events, cfg, clock)?;
    let d1: Vec<u64> = cleaned.d1.iter().map(|t| t.t_ns).collect();
    let d2: Vec<u64> = cleaned.d2.iter().map(|t| t.t_ns).collect();
    let w = cfg.bin_width_ns;
    let n_raw = ((cfg.max_lag_ns + cfg.delta_ns) / w) as usize;
    let raw = delay_histogram_threaded(&d1, &d2, w, n_raw, threads);
    assemble(raw, cfg, cleaned)
}

/// Intra-group analysis: pair distinct pixels of `group1` with each other.
///
/// The later event of a pair is the stop; ties in time on distinct pixels
/// count once. The veto applies exactly as in the two-group chain, but dedup
/// does not — collapsing a burst would erase the very pairs being counted.
pub fn single_group_histogram(
    events: &[Event],
    cfg: &AnalysisConfig,
    clock: &ClockConfig,
) -> Result<DelayHistogram, AnalysisError> {
    let cfg = AnalysisConfig {
        single_group_mode: true,
        ..cfg.clone()
    };
    cfg.validate()?;
    let cleaned = clean_events(events, &cfg, clock)?;
    let w = cfg.bin_width_ns;
    let n_raw = ((cfg.max_lag_ns + cfg.delta_ns) / w) as usize;
    let raw = pair_distinct_pixels(&cleaned.d1, w, n_raw);
    assemble(raw, &cfg, cleaned)
}

fn pair_distinct_pixels(times: &[TaggedTime], bin_width_ns: u64, n_bins: usize) -> Vec<u64> {
    let span = bin_width_ns * n_bins as u64;
    let mut bins = vec![0u64; n_bins];
    for (i, a) in times.iter().enumerate() {
        for b in &times[i + 1..] {
            let lag = b.t_ns - a.t_ns;
            if lag >= span {
                break;
            }
            if b.pixel != a.pixel {
                bins[(lag / bin_width_ns) as usize] += 1;
            }
        }
    }
    bins
}

fn assemble(
    raw: Vec<u64>,
    cfg: &AnalysisConfig,
    cleaned: crate::clean::CleanedEvents,
) -> Result<DelayHistogram, AnalysisError> {
    let w = cfg.bin_width_ns;
    let m = (cfg.delta_ns / w) as usize;
    let sums = windowed_sums(&raw, m)?;
    let lo = (cfg.norm_region_ns.0 / w) as usize;
    let hi = (cfg.norm_region_ns.1 / w) as usize;
    let norm = normalize(&sums, m, lo..hi)?;
    let lag_ns = (0..sums.len()).map(|j| (j as u64 * w) as f64).collect();
    Ok(DelayHistogram {
        bin_width_ns: w,
        delta_ns: cfg.delta_ns,
        max_lag_ns: cfg.max_lag_ns,
        norm_region_ns: cfg.norm_region_ns,
        lag_ns,
        raw_counts: raw,
        window_sums: sums,
        c_norm: norm.c,
        err: norm.err,
        plateau: norm.plateau,
        n_start: cleaned.d1.len(),
        n_stop: cleaned.d2.len(),
        clean_stats: cleaned.stats,
    })
}

//! The detector chain: arrival times in, quantized event records out.
//!
//! Stages run in a fixed order — [`apply_response`], [`inject_crosstalk`],
//! [`inject_background`], [`apply_duty_cycle`] — and every stage is a pure
//! function of its input plus a seed, so a run is reproducible event for
//! event. Seeds fan out through [`derive_seed`](crate::derive_seed) with
//! fixed salts (1 response, 2 crosstalk, 3 background) and, inside the
//! background stage, one sub-stream per pixel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use timetag_core::{
    merge_streams, ClockConfig, Event, FLAG_BACKGROUND, FLAG_CROSSTALK, FLAG_REAL,
};

use crate::{derive_seed, CrosstalkModel, DetectorConfig, DetectorError, GRID_SIDE, PIXEL_COUNT};

fn first_unsorted_f64(times: &[f64]) -> Option<usize> {
    times.windows(2).position(|w| w[1] < w[0]).map(|i| i + 1)
}

fn first_unsorted_events(events: &[Event]) -> Option<usize> {
    events
        .windows(2)
        .position(|w| w[1].key() < w[0].key())
        .map(|i| i + 1)
}

/// Detect arrival times: add scintillation delays, pick an illuminated
/// pixel, and quantize onto the clock grid.
///
/// Input times are continuous nanoseconds and must be nondecreasing; the
/// output is sorted by `(tick, pixel)` (delays of up to
/// `max_travel + decay_time` can reorder nearby arrivals). Per arrival the
/// draw order is fixed: capture delay, decay delay, pixel.
pub fn apply_response(
    arrivals_ns: &[f64],
    cfg: &DetectorConfig,
    seed: u64,
) -> Result<Vec<Event>, DetectorError> {
    cfg.validate()?;
    if let Some(i) = first_unsorted_f64(arrivals_ns) {
        return Err(DetectorError::UnsortedInput(i));
    }
    let capture = cfg.scintillator.capture_draw()?;
    let decay = cfg.scintillator.decay_draw()?;

    // Cumulative illumination weights for inverse-transform pixel choice.
    let mut cumulative = Vec::with_capacity(cfg.illumination.len());
    let mut total = 0.0;
    for &w in &cfg.illumination {
        total += w;
        cumulative.push(total);
    }
    let last_lit = cfg
        .illumination
        .iter()
        .rposition(|&w| w > 0.0)
        .expect("validate checked a positive weight exists");

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(arrivals_ns.len());
    for &t in arrivals_ns {
        let delay = capture.sample(rng.random()) + decay.sample(rng.random());
        let target: f64 = rng.random::<f64>() * total;
        let pixel = cumulative.partition_point(|&c| c <= target).min(last_lit) as u16;
        let tick = cfg.clock.quantize(t + delay)?;
        out.push(Event::with_flags(tick, pixel, FLAG_REAL));
    }
    out.sort_by_key(Event::key);
    Ok(out)
}

/// Valid 4-neighbors of a pixel on the row-major square grid, in fixed
/// up/down/left/right order.
fn neighbors(pixel: u16) -> Vec<u16> {
    let (row, col) = (pixel / GRID_SIDE, pixel % GRID_SIDE);
    let mut out = Vec::with_capacity(4);
    if row > 0 {
        out.push(pixel - GRID_SIDE);
    }
    if row + 1 < GRID_SIDE {
        out.push(pixel + GRID_SIDE);
    }
    if col > 0 {
        out.push(pixel - 1);
    }
    if col + 1 < GRID_SIDE {
        out.push(pixel + 1);
    }
    out
}

/// Optical crosstalk: with the configured probability, an event spawns one
/// duplicate on a uniformly chosen adjacent pixel, delayed uniformly within
/// the jitter window. Duplicates carry [`FLAG_CROSSTALK`].
pub fn inject_crosstalk(
    events: &[Event],
    model: &CrosstalkModel,
    clock: &ClockConfig,
    seed: u64,
) -> Result<Vec<Event>, DetectorError> {
    model.validate()?;
    if let Some(i) = first_unsorted_events(events) {
        return Err(DetectorError::UnsortedInput(i));
    }
    if model.probability == 0.0 {
        return Ok(events.to_vec());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dups = Vec::new();
    for e in events {
        if rng.random::<f64>() >= model.probability {
            continue;
        }
        let near = neighbors(e.pixel);
        let pick = ((rng.random::<f64>() * near.len() as f64) as usize).min(near.len() - 1);
        let offset = clock.quantize(rng.random::<f64>() * model.jitter_window_ns)?;
        dups.push(Event::with_flags(e.tick + offset, near[pick], FLAG_CROSSTALK));
    }
    dups.sort_by_key(Event::key);
    Ok(merge_streams(&[events, &dups])?)
}

/// Dark counts: an independent Poisson stream per pixel over
/// `[span_ns.0, span_ns.1)`, quantized and flagged [`FLAG_BACKGROUND`],
/// merged into the input stream.
///
/// Each pixel uses its own sub-seed, so the background on pixel `p` is
/// identical no matter what the other pixels or the input stream contain.
pub fn inject_background(
    events: &[Event],
    dark_rate_hz: f64,
    span_ns: (u64, u64),
    cfg: &DetectorConfig,
    seed: u64,
) -> Result<Vec<Event>, DetectorError> {
    if !(dark_rate_hz >= 0.0) || !dark_rate_hz.is_finite() {
        return Err(DetectorError::InvalidConfig(format!(
            "dark rate {dark_rate_hz} must be finite and nonnegative"
        )));
    }
    if span_ns.1 < span_ns.0 {
        return Err(DetectorError::InvalidConfig(format!(
            "background span {span_ns:?} runs backwards"
        )));
    }
    if let Some(i) = first_unsorted_events(events) {
        return Err(DetectorError::UnsortedInput(i));
    }
    if dark_rate_hz == 0.0 || span_ns.1 == span_ns.0 {
        return Ok(events.to_vec());
    }
    let rate_per_ns = dark_rate_hz / 1.0e9;
    let mut pixel_streams: Vec<Vec<Event>> = Vec::with_capacity(PIXEL_COUNT as usize);
    for pixel in 0..PIXEL_COUNT {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, pixel as u64));
        let mut stream = Vec::new();
        let mut t = span_ns.0 as f64;
        loop {
            let u: f64 = rng.random();
            t += -(1.0 - u).ln() / rate_per_ns;
            if !(t < span_ns.1 as f64) {
                break;
            }
            stream.push(Event::with_flags(
                cfg.clock.quantize(t)?,
                pixel,
                FLAG_BACKGROUND,
            ));
        }
        pixel_streams.push(stream);
    }
    let mut inputs: Vec<&[Event]> = vec![events];
    inputs.extend(pixel_streams.iter().map(|s| s.as_slice()));
    Ok(merge_streams(&inputs)?)
}

/// Acquisition duty cycle: keep an event iff its timestamp falls in the
/// live part of its cycle, i.e. `t mod (cycle + dead) < cycle` with the
/// live window half-open. All arithmetic is integer-exact.
pub fn apply_duty_cycle(
    events: &[Event],
    clock: &ClockConfig,
    cycle_length_ns: u64,
    dead_time_ns: u32,
) -> Result<Vec<Event>, DetectorError> {
    if cycle_length_ns == 0 {
        return Err(DetectorError::InvalidConfig(
            "cycle length must be positive".into(),
        ));
    }
    let period = cycle_length_ns + dead_time_ns as u64;
    let mut out = Vec::with_capacity(events.len());
    for e in events {
        let ns = clock.ticks_to_ns(e.tick)?;
        if ns % period < cycle_length_ns {
            out.push(*e);
        }
    }
    Ok(out)
}

/// Run the full chain over one span of arrivals.
///
/// `span_ns` bounds the background stream; for a whole run it is
/// `(0, duration_ns)`, and segmented callers pass each segment's bounds so
/// the composition over segments equals one big call.
pub fn apply_detector_chain(
    arrivals_ns: &[f64],
    cfg: &DetectorConfig,
    span_ns: (u64, u64),
    seed: u64,
) -> Result<Vec<Event>, DetectorError> {
    let detected = apply_response(arrivals_ns, cfg, derive_seed(seed, 1))?;
    let with_ct = inject_crosstalk(&detected, &cfg.crosstalk, &cfg.clock, derive_seed(seed, 2))?;
    let with_bg = inject_background(&with_ct, cfg.dark_rate_hz, span_ns, cfg, derive_seed(seed, 3))?;
    apply_duty_cycle(&with_bg, &cfg.clock, cfg.cycle_length_ns, cfg.dead_time_ns)
}

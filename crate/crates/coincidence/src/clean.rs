//! Event-stream cleaning: spurious-coincidence veto, then in-group dedup.

use crate::config::{tag_of, GroupTag};
use crate::{AnalysisConfig, AnalysisError};
use timetag_core::{ClockConfig, Event};

/// A cleaned event: wall-clock time plus the pixel that recorded it.
///
/// After dedup the pixel is the one of the earliest event in the collapsed
/// burst; it only matters for single-group analysis, which skips dedup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaggedTime {
    pub t_ns: u64,
    pub pixel: u16,
}

/// Bookkeeping from a cleaning pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CleanStats {
    pub n_input: usize,
    pub n_group1_raw: usize,
    pub n_group2_raw: usize,
    pub n_vetoed1: usize,
    pub n_vetoed2: usize,
    pub n_collapsed1: usize,
    pub n_collapsed2: usize,
}

/// Result of [`clean_events`].
#[derive(Debug, Clone, Default)]
pub struct CleanedEvents {
    pub d1: Vec<TaggedTime>,
    pub d2: Vec<TaggedTime>,
    pub stats: CleanStats,
}

/// Veto and dedup a sorted event stream.
///
/// A group event is vetoed when any event on a pixel outside both groups
/// lies within `delta_s_ns` of it (inclusive, either side). Surviving group
/// events closer than `delta_s_ns` to their in-group predecessor are then
/// collapsed onto the earliest event of the chain, so a burst of any length
/// counts once. In single-group mode only `group1` is extracted, the stop
/// group's pixels count as "outside" for the veto, and dedup is skipped.
///
/// The veto scan is linear in the stream length plus the number of events
/// packed within `delta_s_ns` of each group event, which is tiny at the
/// occupancies this analysis targets.
pub fn clean_events(
    events: &[Event],
    cfg: &AnalysisConfig,
    clock: &ClockConfig,
) -> Result<CleanedEvents, AnalysisError> {
    cfg.validate()?;
    if let Some(i) = first_unsorted(events) {
        return Err(AnalysisError::UnsortedEvents(i));
    }

    let table = cfg.membership();
    let mut times_ns = Vec::with_capacity(events.len());
    for ev in events {
        times_ns.push(clock.ticks_to_ns(ev.tick)?);
    }

    let mut stats = CleanStats {
        n_input: events.len(),
        ..CleanStats::default()
    };
    let mut d1 = Vec::new();
    let mut d2 = Vec::new();

    for (i, ev) in events.iter().enumerate() {
        let tag = tag_of(&table, ev.pixel);
        if tag == GroupTag::Outside {
            continue;
        }
        match tag {
            GroupTag::Group1 => stats.n_group1_raw += 1,
            GroupTag::Group2 => stats.n_group2_raw += 1,
            GroupTag::Outside => unreachable!(),
        }
        if is_vetoed(&times_ns, events, &table, i, cfg.delta_s_ns) {
            match tag {
                GroupTag::Group1 => stats.n_vetoed1 += 1,
                GroupTag::Group2 => stats.n_vetoed2 += 1,
                GroupTag::Outside => unreachable!(),
            }
            continue;
        }
        let t = TaggedTime {
            t_ns: times_ns[i],
            pixel: ev.pixel,
        };
        match tag {
            GroupTag::Group1 => d1.push(t),
            GroupTag::Group2 => d2.push(t),
            GroupTag::Outside => unreachable!(),
        }
    }

    if !cfg.single_group_mode {
        stats.n_collapsed1 = dedup_chain(&mut d1, cfg.delta_s_ns);
        stats.n_collapsed2 = dedup_chain(&mut d2, cfg.delta_s_ns);
    }

    Ok(CleanedEvents { d1, d2, stats })
}

fn first_unsorted(events: &[Event]) -> Option<usize> {
    events
        .windows(2)
        .position(|w| w[1].key() < w[0].key())
        .map(|i| i + 1)
}

/// Any outside event within `delta_s` (inclusive) on either side?
fn is_vetoed(
    times_ns: &[u64],
    events: &[Event],
    table: &[GroupTag],
    i: usize,
    delta_s: u64,
) -> bool {
    let t = times_ns[i];
    for j in (0..i).rev() {
        if t - times_ns[j] > delta_s {
            break;
        }
        if tag_of(table, events[j].pixel) == GroupTag::Outside {
            return true;
        }
    }
    for j in i + 1..events.len() {
        if times_ns[j] - t > delta_s {
            break;
        }
        if tag_of(table, events[j].pixel) == GroupTag::Outside {
            return true;
        }
    }
    false
}

/// Collapse chains of events whose consecutive gaps are all `<= delta_s`
/// onto the chain's earliest member. Returns how many events were absorbed.
fn dedup_chain(times: &mut Vec<TaggedTime>, delta_s: u64) -> usize {
    let before = times.len();
    let mut kept: Vec<TaggedTime> = Vec::with_capacity(times.len());
    let mut last_in_chain: Option<u64> = None;
    for &t in times.iter() {
        match last_in_chain {
            Some(prev) if t.t_ns - prev <= delta_s => {
                // Same chain: absorb, and the chain end keeps extending.
                last_in_chain = Some(t.t_ns);
            }
            _ => {
                kept.push(t);
                last_in_chain = Some(t.t_ns);
            }
        }
    }
    *times = kept;
    before - times.len()
}

//! Deterministic k-way merge of sorted event streams.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::event::Event;

/// Merge failure: an input stream was not sorted by `(tick, pixel)`.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MergeError {
    #[error("stream {stream} is unsorted at index {index}")]
    Unsorted { stream: usize, index: usize },
}

/// Merge sorted streams into one stream sorted by `(tick, pixel)`.
///
/// Ties on `(tick, pixel)` are broken by input stream index, then by input
/// position, so the result is identical for any thread count or call order.
/// Each input is validated as it is consumed.
pub fn merge_streams(streams: &[&[Event]]) -> Result<Vec<Event>, MergeError> {
    let total: usize = streams.iter().map(|s| s.len()).sum();
    let mut out = Vec::with_capacity(total);

    // Heap entries: Reverse((tick, pixel, stream, pos)) so the smallest key
    // (with deterministic tie order) pops first.
    let mut heap: BinaryHeap<Reverse<(u64, u16, usize, usize)>> = BinaryHeap::new();
    for (i, s) in streams.iter().enumerate() {
        if let Some(e) = s.first() {
            heap.push(Reverse((e.tick, e.pixel, i, 0)));
        }
    }

    while let Some(Reverse((_, _, i, pos))) = heap.pop() {
        out.push(streams[i][pos]);
        let next = pos + 1;
        if let Some(e) = streams[i].get(next) {
            if e.key() < streams[i][pos].key() {
                return Err(MergeError::Unsorted {
                    stream: i,
                    index: next,
                });
            }
            heap.push(Reverse((e.tick, e.pixel, i, next)));
        }
    }
    Ok(out)
}

//! NTT1 binary run format.
//!
//! Little-endian layout:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "NTT1"
//! 4       4     version (u32, = 1)
//! 8       8     clock frequency in Hz (u64)
//! 16      2     pixel_count (u16)
//! 18      2     reserved (= 0)
//! 20      8     seed (u64)
//! 28      8     cycle_length in ns (u64)
//! 36      4     dead_time in ns (u32)
//! 40      12*n  records: tick (u64), pixel (u16), flags (u16)
//! ```
//!
//! Records are sorted by `(tick, pixel)`; both encode and decode enforce it.

use std::io::{self, Write};

use crate::clock::ClockConfig;
use crate::event::{is_sorted, Event, RunMetadata};

pub const MAGIC: [u8; 4] = *b"NTT1";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 40;
pub const RECORD_LEN: usize = 12;

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("bad magic: expected \"NTT1\", found {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0} (expected {VERSION})")]
    BadVersion(u32),
    #[error("truncated header: {0} bytes, need {HEADER_LEN}")]
    TruncatedHeader(usize),
    #[error("truncated record section: {0} trailing bytes are not a whole {RECORD_LEN}-byte record")]
    TruncatedRecord(usize),
    #[error("record {index} out of order: events must be sorted by (tick, pixel)")]
    Unsorted { index: usize },
    #[error("record {index} has pixel {pixel} >= pixel_count {count}")]
    PixelOutOfRange { index: usize, pixel: u16, count: u16 },
    #[error("header clock is invalid: {0}")]
    InvalidClock(#[from] crate::ClockError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn header_bytes(meta: &RunMetadata) -> [u8; HEADER_LEN] {
    let mut h = [0u8; HEADER_LEN];
    h[0..4].copy_from_slice(&MAGIC);
    h[4..8].copy_from_slice(&VERSION.to_le_bytes());
    h[8..16].copy_from_slice(&meta.clock.frequency_hz().to_le_bytes());
    h[16..18].copy_from_slice(&meta.pixel_count.to_le_bytes());
    // bytes 18..20 stay zero (reserved)
    h[20..28].copy_from_slice(&meta.seed.to_le_bytes());
    h[28..36].copy_from_slice(&meta.cycle_length_ns.to_le_bytes());
    h[36..40].copy_from_slice(&meta.dead_time_ns.to_le_bytes());
    h
}

fn record_bytes(e: &Event) -> [u8; RECORD_LEN] {
    let mut r = [0u8; RECORD_LEN];
    r[0..8].copy_from_slice(&e.tick.to_le_bytes());
    r[8..10].copy_from_slice(&e.pixel.to_le_bytes());
    r[10..12].copy_from_slice(&e.flags.to_le_bytes());
    r
}

fn validate_events(events: &[Event], pixel_count: u16) -> Result<(), FormatError> {
    if !is_sorted(events) {
        let index = events
            .windows(2)
            .position(|w| w[0].key() > w[1].key())
            .map(|i| i + 1)
            .unwrap_or(0);
        return Err(FormatError::Unsorted { index });
    }
    if let Some((index, e)) = events
        .iter()
        .enumerate()
        .find(|(_, e)| e.pixel >= pixel_count)
    {
        return Err(FormatError::PixelOutOfRange {
            index,
            pixel: e.pixel,
            count: pixel_count,
        });
    }
    Ok(())
}

/// Serialize a run. The event stream must be sorted by `(tick, pixel)` with
/// all pixels below `meta.pixel_count`. `meta.source_label` is not stored.
pub fn encode_run(meta: &RunMetadata, events: &[Event]) -> Result<Vec<u8>, FormatError> {
    validate_events(events, meta.pixel_count)?;
    let mut out = Vec::with_capacity(HEADER_LEN + RECORD_LEN * events.len());
    out.extend_from_slice(&header_bytes(meta));
    for e in events {
        out.extend_from_slice(&record_bytes(e));
    }
    Ok(out)
}

/// Parse a run. Rejects bad magic, unknown versions, truncated payloads,
/// unsorted records, and out-of-range pixels. `source_label` comes back empty.
pub fn decode_run(bytes: &[u8]) -> Result<(RunMetadata, Vec<Event>), FormatError> {
    if bytes.len() < HEADER_LEN {
        return Err(FormatError::TruncatedHeader(bytes.len()));
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(FormatError::BadMagic(magic));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(FormatError::BadVersion(version));
    }
    let frequency_hz = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let pixel_count = u16::from_le_bytes(bytes[16..18].try_into().unwrap());
    let seed = u64::from_le_bytes(bytes[20..28].try_into().unwrap());
    let cycle_length_ns = u64::from_le_bytes(bytes[28..36].try_into().unwrap());
    let dead_time_ns = u32::from_le_bytes(bytes[36..40].try_into().unwrap());

    let meta = RunMetadata {
        clock: ClockConfig::from_frequency(frequency_hz)?,
        pixel_count,
        seed,
        cycle_length_ns,
        dead_time_ns,
        source_label: String::new(),
    };

    let body = &bytes[HEADER_LEN..];
    if body.len() % RECORD_LEN != 0 {
        return Err(FormatError::TruncatedRecord(body.len() % RECORD_LEN));
    }
    let mut events = Vec::with_capacity(body.len() / RECORD_LEN);
    for chunk in body.chunks_exact(RECORD_LEN) {
        events.push(Event {
            tick: u64::from_le_bytes(chunk[0..8].try_into().unwrap()),
            pixel: u16::from_le_bytes(chunk[8..10].try_into().unwrap()),
            flags: u16::from_le_bytes(chunk[10..12].try_into().unwrap()),
        });
    }
    validate_events(&events, pixel_count)?;
    Ok((meta, events))
}

/// Incremental NTT1 writer for runs too large to buffer whole.
///
/// Produces byte-for-byte the same output as [`encode_run`] on the
/// concatenation of all appended batches.
pub struct RunWriter<W: Write> {
    sink: W,
    pixel_count: u16,
    last_key: Option<(u64, u16)>,
    written: u64,
}

impl<W: Write> RunWriter<W> {
    pub fn new(mut sink: W, meta: &RunMetadata) -> Result<Self, FormatError> {
        sink.write_all(&header_bytes(meta))?;
        Ok(Self {
            sink,
            pixel_count: meta.pixel_count,
            last_key: None,
            written: 0,
        })
    }

    /// Append a sorted batch; ordering is enforced across batch boundaries.
    pub fn append(&mut self, events: &[Event]) -> Result<(), FormatError> {
        for e in events {
            if let Some(last) = self.last_key {
                if e.key() < last {
                    return Err(FormatError::Unsorted {
                        index: self.written as usize,
                    });
                }
            }
            if e.pixel >= self.pixel_count {
                return Err(FormatError::PixelOutOfRange {
                    index: self.written as usize,
                    pixel: e.pixel,
                    count: self.pixel_count,
                });
            }
            self.sink.write_all(&record_bytes(e))?;
            self.last_key = Some(e.key());
            self.written += 1;
        }
        Ok(())
    }

    /// Number of records written so far.
    pub fn written(&self) -> u64 {
        self.written
    }

    /// Flush and hand back the sink.
    pub fn finish(mut self) -> Result<W, FormatError> {
        self.sink.flush()?;
        Ok(self.sink)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> RunMetadata {
        RunMetadata {
            seed: 42,
            ..RunMetadata::default()
        }
    }

    #[test]
    fn empty_run_is_header_only() {
        let bytes = encode_run(&meta(), &[]).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN);
        let (m, ev) = decode_run(&bytes).unwrap();
        assert!(ev.is_empty());
        assert_eq!(m.seed, 42);
        assert_eq!(m.clock.tick_ns(), 25);
    }

    #[test]
    fn single_event_is_52_bytes_and_round_trips() {
        let ev = [Event::new(1, 3)];
        let bytes = encode_run(&meta(), &ev).unwrap();
        assert_eq!(bytes.len(), 52);
        let (m, back) = decode_run(&bytes).unwrap();
        assert_eq!(back, ev.to_vec());
        assert_eq!(m.pixel_count, 64);
        assert_eq!(m.cycle_length_ns, 10_000_000_000);
        assert_eq!(m.dead_time_ns, 10_000_000);
    }

    #[test]
    fn distinct_decode_errors() {
        let good = encode_run(&meta(), &[Event::new(1, 3)]).unwrap();

        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(decode_run(&bad), Err(FormatError::BadMagic(_))));

        let mut bad = good.clone();
        bad[4] = 9;
        assert!(matches!(decode_run(&bad), Err(FormatError::BadVersion(9))));

        assert!(matches!(
            decode_run(&good[..HEADER_LEN - 1]),
            Err(FormatError::TruncatedHeader(_))
        ));
        assert!(matches!(
            decode_run(&good[..good.len() - 1]),
            Err(FormatError::TruncatedRecord(11))
        ));
    }

    #[test]
    fn decode_rejects_unsorted_payload() {
        let ev = [Event::new(10, 0), Event::new(5, 0)];
        let mut bytes = header_bytes(&meta()).to_vec();
        for e in &ev {
            bytes.extend_from_slice(&record_bytes(e));
        }
        assert!(matches!(
            decode_run(&bytes),
            Err(FormatError::Unsorted { index: 1 })
        ));
        // encode refuses to produce such a file in the first place
        assert!(matches!(
            encode_run(&meta(), &ev),
            Err(FormatError::Unsorted { index: 1 })
        ));
    }

    #[test]
    fn encode_rejects_pixel_out_of_range() {
        let ev = [Event::new(10, 64)];
        assert!(matches!(
            encode_run(&meta(), &ev),
            Err(FormatError::PixelOutOfRange { pixel: 64, .. })
        ));
    }

    #[test]
    fn writer_matches_one_shot_encoder() {
        let ev: Vec<Event> = (0..1000u64)
            .map(|i| Event::with_flags(i * 3, (i % 64) as u16, (i % 3) as u16))
            .collect();
        let one_shot = encode_run(&meta(), &ev).unwrap();

        let mut w = RunWriter::new(Vec::new(), &meta()).unwrap();
        for chunk in ev.chunks(97) {
            w.append(chunk).unwrap();
        }
        assert_eq!(w.written(), 1000);
        let streamed = w.finish().unwrap();
        assert_eq!(streamed, one_shot);
    }

    #[test]
    fn writer_rejects_disorder_across_batches() {
        let mut w = RunWriter::new(Vec::new(), &meta()).unwrap();
        w.append(&[Event::new(100, 0)]).unwrap();
        assert!(matches!(
            w.append(&[Event::new(99, 0)]),
            Err(FormatError::Unsorted { .. })
        ));
    }
}

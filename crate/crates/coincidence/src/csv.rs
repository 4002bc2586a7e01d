//! Plain-text curve format: `#`-prefixed metadata, then one row per lag.

use crate::histogram::DelayHistogram;
use crate::AnalysisError;
use std::io::{BufRead, Write};

const HEADER: &str = "t_ns,counts,c_norm,err";

/// A curve read back from CSV. `counts` holds the raw histogram bin at each
/// curve lag (display only — the normalized columns carry the statistics).
#[derive(Debug, Clone, Default)]
pub struct CsvCurve {
    pub lag_ns: Vec<f64>,
    pub counts: Vec<u64>,
    pub c_norm: Vec<f64>,
    pub err: Vec<f64>,
    pub meta: Vec<(String, String)>,
}

impl CsvCurve {
    /// Metadata value by key, if present.
    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }
}

/// Write the normalized curve with its provenance header.
///
/// Floats are written in shortest round-trip form, so a read-back curve is
/// bit-identical to the one written.
pub fn write_histogram_csv<W: Write>(
    mut w: W,
    hist: &DelayHistogram,
) -> Result<(), AnalysisError> {
    writeln!(w, "# bin_width_ns: {}", hist.bin_width_ns)?;
    writeln!(w, "# delta_ns: {}", hist.delta_ns)?;
    writeln!(w, "# max_lag_ns: {}", hist.max_lag_ns)?;
    writeln!(
        w,
        "# norm_region_ns: {} {}",
        hist.norm_region_ns.0, hist.norm_region_ns.1
    )?;
    writeln!(w, "# plateau: {}", hist.plateau)?;
    writeln!(w, "# n_start: {}", hist.n_start)?;
    writeln!(w, "# n_stop: {}", hist.n_stop)?;
    writeln!(w, "{HEADER}")?;
    for j in 0..hist.lag_ns.len() {
        writeln!(
            w,
            "{},{},{},{}",
            hist.lag_ns[j] as u64, hist.raw_counts[j], hist.c_norm[j], hist.err[j]
        )?;
    }
    Ok(())
}

/// Read a curve produced by [`write_histogram_csv`].
pub fn read_histogram_csv<R: BufRead>(r: R) -> Result<CsvCurve, AnalysisError> {
    let mut curve = CsvCurve::default();
    let mut saw_header = false;
    for (idx, line) in r.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some((k, v)) = rest.split_once(':') {
                curve
                    .meta
                    .push((k.trim().to_string(), v.trim().to_string()));
            }
            continue;
        }
        if !saw_header {
            if line != HEADER {
                return Err(AnalysisError::MalformedCsv {
                    line: lineno,
                    reason: format!("expected header '{HEADER}', found '{line}'"),
                });
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(AnalysisError::MalformedCsv {
                line: lineno,
                reason: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let bad = |what: &str| AnalysisError::MalformedCsv {
            line: lineno,
            reason: format!("cannot parse {what}"),
        };
        curve
            .lag_ns
            .push(fields[0].parse::<f64>().map_err(|_| bad("t_ns"))?);
        curve
            .counts
            .push(fields[1].parse::<u64>().map_err(|_| bad("counts"))?);
        curve
            .c_norm
            .push(fields[2].parse::<f64>().map_err(|_| bad("c_norm"))?);
        curve
            .err
            .push(fields[3].parse::<f64>().map_err(|_| bad("err"))?);
    }
    if !saw_header {
        return Err(AnalysisError::MalformedCsv {
            line: 0,
            reason: "missing column header".into(),
        });
    }
    if curve.lag_ns.is_empty() {
        return Err(AnalysisError::MalformedCsv {
            line: 0,
            reason: "no data rows".into(),
        });
    }
    Ok(curve)
}

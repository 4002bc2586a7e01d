//! The work behind each CLI subcommand.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use crate::config::RunConfig;
use crate::errors::CliError;
use beam_sim::SegmentGenerator;
use coincidence::{
    analyze_events, read_histogram_csv, single_group_histogram, write_histogram_csv,
    AnalysisConfig, CleanStats, DelayHistogram,
};
use detector_sim::{
    apply_duty_cycle, apply_response, derive_seed, inject_background, inject_crosstalk,
    DetectorConfig,
};
use model_fit::{coherence_to_energy, fit_curve, BroadenedModel};
use timetag_core::{
    decode_run, merge_streams, Event, RunWriter, FLAG_BACKGROUND, FLAG_CROSSTALK,
};

/// Salt separating the detector's seed space from the beam generator's
/// (which consumes the run seed directly, one sub-seed per slice).
const DETECTOR_SEED_SALT: u64 = 0x00d7;

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path).map_err(|e| {
        CliError::Io(format!("cannot write {}: {e}", path.display()))
    })?))
}

fn echo_header<W: Write>(w: &mut W, cfg: &RunConfig) -> Result<(), CliError> {
    for (key, value) in cfg.echo() {
        writeln!(w, "# config.{key}: {value}").map_err(CliError::from)?;
    }
    Ok(())
}

/// Generate a run: beam arrivals, detector chain, NTT1 output.
///
/// The stream is produced one 1-second slice at a time. Detector delays and
/// crosstalk can push an event up to ~700 ns past its slice, so transformed
/// events beyond the slice boundary are carried into the next merge; the
/// output file is globally sorted.
pub fn cmd_simulate(
    cfg: &RunConfig,
    output: &Path,
    dump_arrivals: Option<&Path>,
) -> Result<(), CliError> {
    let detector = cfg.detector_config()?;
    let meta = cfg.run_metadata(&detector);
    let mut writer = RunWriter::new(create(output)?, &meta)?;
    let mut dump = match dump_arrivals {
        Some(p) => {
            let mut w = create(p)?;
            writeln!(w, "t_ns").map_err(CliError::from)?;
            Some(w)
        }
        None => None,
    };

    let mut counts = StageCounts::default();
    if cfg.beam.duration_s > 0.0 {
        let beam = cfg.beam_config()?;
        let duration_ns = (cfg.beam.duration_s * 1e9).round() as u64;
        let mut gen = SegmentGenerator::new(&beam)?;
        let detector_seed = derive_seed(cfg.beam.seed, DETECTOR_SEED_SALT);
        let mut carry: Vec<Event> = Vec::new();
        let mut segment = 0u64;
        while let Some(arrivals) = gen.next_segment() {
            if let Some(w) = &mut dump {
                for t in &arrivals {
                    writeln!(w, "{t}").map_err(CliError::from)?;
                }
            }
            let t0 = segment * beam_sim::SEGMENT_NS as u64;
            let t1 = ((segment + 1) * beam_sim::SEGMENT_NS as u64).min(duration_ns);
            let events = transform_segment(
                &arrivals,
                &detector,
                (t0, t1),
                derive_seed(detector_seed, segment),
                &mut counts,
            )?;
            let merged = merge_streams(&[&carry, &events])?;
            let boundary = t1 / detector.clock.tick_ns()
                + u64::from(t1 % detector.clock.tick_ns() != 0);
            let split = merged.partition_point(|e| e.tick < boundary);
            writer.append(&merged[..split])?;
            carry = merged[split..].to_vec();
            segment += 1;
        }
        writer.append(&carry)?;
    }

    let written = writer.written();
    writer.finish()?;

    if let Some(w) = &mut dump {
        w.flush().map_err(CliError::from)?;
    }
    let duration = cfg.beam.duration_s;
    let realized = if duration > 0.0 {
        written as f64 / duration
    } else {
        0.0
    };
    println!("events_written: {written}");
    println!("realized_rate_hz: {realized:.3}");
    println!(
        "duty_cycle_losses: {} ({:.4}% of pre-gate events)",
        counts.duty_dropped,
        100.0 * counts.duty_dropped as f64 / counts.pre_gate.max(1) as f64
    );
    println!("beam_events: {}", counts.real);
    println!("crosstalk_events: {}", counts.crosstalk);
    println!("background_events: {}", counts.background);
    let mut stdout = std::io::stdout();
    echo_header(&mut stdout, cfg)?;
    Ok(())
}

#[derive(Default)]
struct StageCounts {
    real: u64,
    crosstalk: u64,
    background: u64,
    pre_gate: u64,
    duty_dropped: u64,
}

/// One slice through the detector chain, with per-stage bookkeeping.
/// Stage seeds repeat the chain's fixed salts under a per-segment seed.
fn transform_segment(
    arrivals: &[f64],
    detector: &DetectorConfig,
    span_ns: (u64, u64),
    seed: u64,
    counts: &mut StageCounts,
) -> Result<Vec<Event>, CliError> {
    let detected = apply_response(arrivals, detector, derive_seed(seed, 1))?;
    let with_ct = inject_crosstalk(
        &detected,
        &detector.crosstalk,
        &detector.clock,
        derive_seed(seed, 2),
    )?;
    let with_bg = inject_background(
        &with_ct,
        detector.dark_rate_hz,
        span_ns,
        detector,
        derive_seed(seed, 3),
    )?;
    let gated = apply_duty_cycle(
        &with_bg,
        &detector.clock,
        detector.cycle_length_ns,
        detector.dead_time_ns,
    )?;
    counts.pre_gate += with_bg.len() as u64;
    counts.duty_dropped += (with_bg.len() - gated.len()) as u64;
    for e in &gated {
        match e.flags {
            FLAG_CROSSTALK => counts.crosstalk += 1,
            FLAG_BACKGROUND => counts.background += 1,
            _ => counts.real += 1,
        }
    }
    Ok(gated)
}

/// Analyze a run file into the normalized coincidence curve CSV.
pub fn cmd_analyze(
    cfg: &RunConfig,
    input: &Path,
    output: &Path,
    threads: usize,
) -> Result<(), CliError> {
    let bytes = std::fs::read(input)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", input.display())))?;
    let (meta, events) = decode_run(&bytes)?;
    drop(bytes);
    let analysis = cfg.analysis_config()?;

    let hist = if events.is_empty() {
        eprintln!("warning: {} contains no events; writing an all-zero curve", input.display());
        zero_histogram(&analysis)
    } else if analysis.single_group_mode {
        single_group_histogram(&events, &analysis, &meta.clock)?
    } else {
        analyze_events(&events, &analysis, &meta.clock, threads)?
    };

    let mut w = create(output)?;
    echo_header(&mut w, cfg)?;
    writeln!(w, "# input: {}", input.display()).map_err(CliError::from)?;
    writeln!(w, "# run_seed: {}", meta.seed).map_err(CliError::from)?;
    write_histogram_csv(&mut w, &hist)?;
    w.flush().map_err(CliError::from)?;

    // Flatness against the plateau: chi2 of c_norm == 1 over all curve
    // points. A flat source should sit near its dof; a dip inflates it.
    let flat_chi2: f64 = hist
        .c_norm
        .iter()
        .zip(&hist.err)
        .filter(|(_, e)| **e > 0.0)
        .map(|(c, e)| ((c - 1.0) / e).powi(2))
        .sum();
    println!("events: {}", hist.clean_stats.n_input);
    println!("starts_after_clean: {}", hist.n_start);
    println!("stops_after_clean: {}", hist.n_stop);
    println!("plateau_pairs_per_bin: {:.3}", hist.plateau);
    println!("flatness_chi2: {:.2} over {} points", flat_chi2, hist.c_norm.len());
    Ok(())
}

/// All-zero curve matching the config's binning, for empty inputs.
fn zero_histogram(cfg: &AnalysisConfig) -> DelayHistogram {
    let w = cfg.bin_width_ns;
    let n_curve = (cfg.max_lag_ns / w) as usize + 1;
    let n_raw = ((cfg.max_lag_ns + cfg.delta_ns) / w) as usize;
    DelayHistogram {
        bin_width_ns: w,
        delta_ns: cfg.delta_ns,
        max_lag_ns: cfg.max_lag_ns,
        norm_region_ns: cfg.norm_region_ns,
        lag_ns: (0..n_curve).map(|j| (j as u64 * w) as f64).collect(),
        raw_counts: vec![0; n_raw],
        window_sums: vec![0; n_curve],
        c_norm: vec![0.0; n_curve],
        err: vec![0.0; n_curve],
        plateau: 0.0,
        n_start: 0,
        n_stop: 0,
        clean_stats: CleanStats::default(),
    }
}

/// Fit the broadened-dip model to an analyzed curve; write a JSON report.
///
/// Returns the fitted result's convergence status as an error so the exit
/// code reflects it, after the report has been written.
pub fn cmd_fit(
    cfg: &RunConfig,
    input: &Path,
    output: &Path,
    curve_out: Option<&Path>,
) -> Result<(), CliError> {
    let reader = BufReader::new(
        File::open(input).map_err(|e| CliError::Io(format!("cannot read {}: {e}", input.display())))?,
    );
    let curve = read_histogram_csv(reader)?;
    if curve.lag_ns.len() < 10 {
        return Err(CliError::Validation(format!(
            "curve has {} points; need at least 10 for a meaningful fit",
            curve.lag_ns.len()
        )));
    }

    let mut fixed = cfg.fit_fixed()?;
    if cfg.fit.delta_ns.is_none() {
        // Prefer the window width the curve was actually built with.
        if let Some(v) = curve.meta_value("delta_ns") {
            fixed.delta = v
                .parse::<f64>()
                .map_err(|e| CliError::Io(format!("bad delta_ns metadata in {}: {e}", input.display())))?;
        }
    }
    let result = fit_curve(
        &curve.lag_ns,
        &curve.c_norm,
        &curve.err,
        &fixed,
        &cfg.fit_init(),
        &cfg.fit_options(),
    )?;

    let energy_nev = coherence_to_energy(result.tau_c).ok();
    let config_echo: serde_json::Map<String, serde_json::Value> = cfg
        .echo()
        .into_iter()
        .map(|(k, v)| (k, serde_json::Value::String(v)))
        .collect();
    let report = serde_json::json!({
        "input": input.display().to_string(),
        "fixed": { "tau_t_ns": fixed.tau_t, "delta_ns": fixed.delta },
        "result": result,
        "energy_spread_nev": energy_nev,
        "config": config_echo,
    });
    let mut w = create(output)?;
    serde_json::to_writer_pretty(&mut w, &report)
        .map_err(|e| CliError::Io(format!("cannot serialize report: {e}")))?;
    writeln!(w).map_err(CliError::from)?;
    w.flush().map_err(CliError::from)?;

    if let Some(path) = curve_out {
        let model = BroadenedModel::new(
            result.alpha,
            result.tau_c,
            fixed.tau_t,
            fixed.delta,
            result.baseline,
        )?;
        write_model_curve(cfg, &model, &curve.lag_ns, path)?;
    }

    println!(
        "alpha: {:.4} +- {:.4}",
        result.alpha, result.alpha_err
    );
    println!(
        "tau_c_ns: {:.3} +- {:.3}",
        result.tau_c, result.tau_c_err
    );
    println!("baseline: {:.5} +- {:.5}", result.baseline, result.baseline_err);
    println!("chi2: {:.2} / dof {}", result.chi2, result.dof);
    println!(
        "chi2_decimated: {:.2} / dof {} (stride {})",
        result.chi2_decimated, result.dof_decimated, result.decimation_stride
    );
    if let Some(e) = energy_nev {
        println!("energy_spread_nev: {e:.4}");
    }
    if !result.converged {
        return Err(CliError::Numerical(format!(
            "fit did not converge within {} iterations (report written to {})",
            result.iterations,
            output.display()
        )));
    }
    Ok(())
}

/// Evaluate the configured model curve on the analysis lag grid.
pub fn cmd_model(cfg: &RunConfig, output: &Path) -> Result<(), CliError> {
    let analysis = cfg.analysis_config()?;
    let fixed = cfg.fit_fixed()?;
    let model = BroadenedModel::new(
        cfg.beam.alpha,
        cfg.beam.tau_c_ns,
        fixed.tau_t,
        fixed.delta,
        1.0,
    )?;
    let lags: Vec<f64> = (0..=(analysis.max_lag_ns / analysis.bin_width_ns))
        .map(|j| (j * analysis.bin_width_ns) as f64)
        .collect();
    write_model_curve(cfg, &model, &lags, output)
}

fn write_model_curve(
    cfg: &RunConfig,
    model: &BroadenedModel,
    lags: &[f64],
    path: &Path,
) -> Result<(), CliError> {
    let mut w = create(path)?;
    echo_header(&mut w, cfg)?;
    writeln!(
        w,
        "# model: alpha={} tau_c_ns={} tau_t_ns={} delta_ns={} baseline={}",
        model.alpha, model.tau_c, model.tau_t, model.delta, model.baseline
    )
    .map_err(CliError::from)?;
    writeln!(w, "t_ns,c_model").map_err(CliError::from)?;
    for &t in lags {
        writeln!(w, "{t},{}", model.c_exp_closed(t)).map_err(CliError::from)?;
    }
    w.flush().map_err(CliError::from)
}

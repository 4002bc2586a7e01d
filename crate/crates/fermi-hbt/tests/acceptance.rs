//! Release gate: one test per acceptance criterion, end to end where the
//! criterion spans the whole pipeline. Each test prints a `pass` line with
//! the measured numbers (visible with `-- --nocapture`); the test name is
//! the criterion.
//!
//! Long runs are deterministic (fixed seeds), so every number asserted here
//! is reproducible bit for bit.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;
use std::time::Instant;

use beam_sim::{empirical_g2, g2_target, generate_stream, BeamConfig, CorrelationModel};
use coincidence::{
    analyze_events, clean_events, delay_histogram, normalize, read_histogram_csv, windowed_sums,
    AnalysisConfig,
};
use model_fit::BroadenedModel;
use timetag_core::decode_run;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_fermi-hbt")
}

/// Shared scratch directory; contents are overwritten on every run.
fn workdir() -> &'static Path {
    static DIR: OnceLock<PathBuf> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = std::env::temp_dir().join("fermi-hbt-acceptance");
        fs::create_dir_all(&dir).expect("create scratch dir");
        dir
    })
}

fn run_ok(args: &[&str]) -> Output {
    let out = Command::new(bin()).args(args).output().expect("spawn CLI");
    assert!(
        out.status.success(),
        "`{}` failed:\nstdout:\n{}\nstderr:\n{}",
        args.join(" "),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr),
    );
    out
}

/// `key: value` lines from a subcommand's stdout.
fn stdout_u64(out: &Output, key: &str) -> u64 {
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")))
        .unwrap_or_else(|| panic!("no `{key}:` line in:\n{text}"))
        .trim()
        .parse()
        .expect("numeric stdout field")
}

/// Render a bundled preset with some `key = value` lines replaced.
fn patched_preset(name: &str, patches: &[(&str, &str)]) -> String {
    let out = run_ok(&["preset", name]);
    let text = String::from_utf8(out.stdout).expect("preset is UTF-8");
    let mut patched = String::new();
    for line in text.lines() {
        let replaced = patches
            .iter()
            .find(|(k, _)| line.starts_with(&format!("{k} = ")))
            .map(|(k, v)| format!("{k} = {v}"));
        patched.push_str(&replaced.unwrap_or_else(|| line.to_string()));
        patched.push('\n');
    }
    patched
}

fn read_curve(path: &Path) -> coincidence::CsvCurve {
    let f = fs::File::open(path).expect("open curve CSV");
    read_histogram_csv(std::io::BufReader::new(f)).expect("parse curve CSV")
}

/// The long reference run shared by the recovery and performance tests:
/// 12000 s of the antibunched preset at seed 103, simulated, analyzed, and
/// fitted through the CLI.
struct LongRun {
    run_file: PathBuf,
    curve_file: PathBuf,
    report: serde_json::Value,
    events_written: u64,
}

fn long_run() -> &'static LongRun {
    static RUN: OnceLock<LongRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let dir = workdir();
        let cfg = dir.join("long.cfg");
        fs::write(
            &cfg,
            patched_preset("in10", &[("duration_s", "12000"), ("seed", "103")]),
        )
        .expect("write config");
        let cfg_s = cfg.to_str().unwrap();
        let run_file = dir.join("long.ntt1");
        let curve_file = dir.join("long.csv");
        let report_file = dir.join("long.json");
        let sim = run_ok(&["simulate", "-c", cfg_s, "-o", run_file.to_str().unwrap()]);
        run_ok(&[
            "analyze",
            "-c",
            cfg_s,
            "-i",
            run_file.to_str().unwrap(),
            "-o",
            curve_file.to_str().unwrap(),
        ]);
        run_ok(&[
            "fit",
            "-c",
            cfg_s,
            "-i",
            curve_file.to_str().unwrap(),
            "-o",
            report_file.to_str().unwrap(),
        ]);
        let report = serde_json::from_str(&fs::read_to_string(&report_file).unwrap())
            .expect("fit report JSON");
        LongRun {
            run_file,
            curve_file,
            report,
            events_written: stdout_u64(&sim, "events_written"),
        }
    })
}

#[test]
fn a1_closed_form_matches_quadrature_oracle() {
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    let mut points = 0u64;
    for alpha in [0.0, 0.5, 1.0] {
        for tau_c in [1.0, 30.0, 120.0, 1000.0] {
            for tau_t in [70.0, 140.0] {
                for delta in [100.0, 400.0] {
                    let m = BroadenedModel::new(alpha, tau_c, tau_t, delta, 1.0).unwrap();
                    let mut t = 0.0;
                    while t <= 1000.0 {
                        let q = m.c_exp_quadrature(t, 1e-10).unwrap();
                        worst = worst.max((m.c_exp_closed(t) - q).abs());
                        points += 1;
                        t += 25.0;
                    }
                }
            }
        }
    }
    let elapsed = t0.elapsed().as_secs_f64();
    assert!(worst <= 1e-8, "worst |closed - quadrature| = {worst:.3e}");
    assert!(elapsed <= 120.0, "oracle grid took {elapsed:.1} s");
    println!(
        "acceptance closed-form-vs-quadrature: pass \
         (max diff {worst:.3e} over {points} points, {elapsed:.1} s)"
    );
}

/// Maclaurin series for small arguments: converges fast and loses little
/// precision below |x| = 2.5.
fn erf_series(x: f64) -> f64 {
    let mut power = x; // (-1)^n x^(2n+1) / n!
    let mut sum = x;
    let mut n = 0usize;
    loop {
        n += 1;
        power *= -x * x / n as f64;
        let term = power / (2 * n + 1) as f64;
        sum += term;
        if term.abs() < 1e-18 * sum.abs() + 1e-300 {
            break;
        }
        assert!(n < 200, "series did not converge at x = {x}");
    }
    sum * 2.0 / std::f64::consts::PI.sqrt()
}

/// Complementary-function continued fraction (modified Lentz) for large
/// arguments, where the series would cancel catastrophically.
fn erfc_continued_fraction(x: f64) -> f64 {
    let tiny = 1e-300;
    let mut f = tiny; // b0 = 0
    let mut c = f;
    let mut d = 0.0;
    for j in 1..400 {
        let a = if j == 1 { 1.0 } else { (j - 1) as f64 / 2.0 };
        d = x + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        d = 1.0 / d;
        c = x + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        let step = c * d;
        f *= step;
        if (step - 1.0).abs() < 1e-17 {
            return (-x * x).exp() / std::f64::consts::PI.sqrt() * f;
        }
    }
    panic!("continued fraction did not converge at x = {x}");
}

fn erf_oracle(x: f64) -> f64 {
    if x.abs() <= 2.5 {
        erf_series(x)
    } else {
        x.signum() * (1.0 - erfc_continued_fraction(x.abs()))
    }
}

#[test]
fn a2_erf_matches_series_oracle() {
    let n = 10_000;
    let mut worst = 0.0f64;
    let mut worst_odd = 0.0f64;
    for k in 0..=n {
        let x = -6.0 + 12.0 * k as f64 / n as f64;
        worst = worst.max((model_fit::erf(x) - erf_oracle(x)).abs());
        worst_odd = worst_odd.max((model_fit::erf(x) + model_fit::erf(-x)).abs());
    }
    assert!(worst <= 1e-12, "max |erf - oracle| = {worst:.3e}");
    assert!(worst_odd <= 1e-15, "oddness violated by {worst_odd:.3e}");
    println!(
        "acceptance erf-accuracy: pass \
         (max diff {worst:.3e}, oddness {worst_odd:.3e}, {} points)",
        n + 1
    );
}

#[test]
fn a3_generator_matches_target_correlation() {
    let t0 = Instant::now();
    let cfg = BeamConfig {
        rate_hz: 1.0e4,
        duration_s: 1000.0,
        model: CorrelationModel {
            alpha: 1.0,
            tau_c: 120.0,
        },
        seed: 301,
    };
    let times = generate_stream(&cfg).unwrap();
    assert!(
        times.len() >= 9_900_000,
        "stream has only {} events",
        times.len()
    );
    let g2 = empirical_g2(&times, 25.0, 600.0).unwrap();
    let mut chi2 = 0.0;
    for j in 0..g2.value.len() {
        // Compare against the target averaged over the bin, not its center.
        let lo = j as f64 * g2.bin_width_ns;
        let target: f64 = (0..100)
            .map(|i| g2_target(lo + (i as f64 + 0.5) * g2.bin_width_ns / 100.0, &cfg.model))
            .sum::<f64>()
            / 100.0;
        chi2 += ((g2.value[j] - target) / g2.err[j]).powi(2);
    }
    let reduced = chi2 / g2.value.len() as f64;
    let elapsed = t0.elapsed().as_secs_f64();
    assert!(
        (0.7..=1.3).contains(&reduced),
        "chi2/dof = {reduced:.4} outside [0.7, 1.3]"
    );
    assert!(elapsed <= 300.0, "generator check took {elapsed:.1} s");
    println!(
        "acceptance generator-fidelity: pass \
         (chi2/dof {reduced:.4} over {} bins, {} events, {elapsed:.1} s)",
        g2.value.len(),
        times.len()
    );
}

#[test]
fn a4_end_to_end_dip_recovery() {
    let run = long_run();
    assert!(
        run.events_written >= 30_000_000,
        "only {} detected events",
        run.events_written
    );
    let fit = &run.report["result"];
    let alpha = fit["alpha"].as_f64().unwrap();
    let tau_c = fit["tau_c"].as_f64().unwrap();
    assert!(fit["converged"].as_bool().unwrap(), "fit did not converge");
    assert!(
        (90.0..=150.0).contains(&tau_c),
        "tau_c = {tau_c:.2} ns outside 120 ns +- 25%"
    );
    assert!(
        (0.8..=1.2).contains(&alpha),
        "alpha = {alpha:.3} outside 1.0 +- 20%"
    );
    // The measured curve must show the dip where it belongs: minimum in the
    // first bin, far below the plateau.
    let curve = read_curve(&run.curve_file);
    let (argmin, min) = curve
        .c_norm
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    assert_eq!(argmin, 0, "curve minimum at lag {} ns", curve.lag_ns[argmin]);
    assert!(
        curve.c_norm[0] < 1.0 - 5.0 * curve.err[0],
        "zero-lag bin {} +- {} is not a significant dip",
        curve.c_norm[0],
        curve.err[0]
    );
    println!(
        "acceptance end-to-end-recovery: pass \
         (alpha {alpha:.4}, tau_c {tau_c:.2} ns, {} events, dip bin {min:.4})",
        run.events_written
    );
}

#[test]
fn a5_flat_control_has_no_dip() {
    let dir = workdir();
    let cfg = dir.join("flat.cfg");
    fs::write(
        &cfg,
        patched_preset(
            "t13c",
            &[
                ("duration_s", "2000"),
                ("seed", "211"),
                ("max_lag_ns", "5000"),
                ("norm_region_ns", "500,2500"),
                ("decimate", "true"),
            ],
        ),
    )
    .unwrap();
    let cfg_s = cfg.to_str().unwrap();
    let run_file = dir.join("flat.ntt1");
    let curve_file = dir.join("flat.csv");
    let report_file = dir.join("flat.json");
    run_ok(&["simulate", "-c", cfg_s, "-o", run_file.to_str().unwrap()]);
    run_ok(&[
        "analyze",
        "-c",
        cfg_s,
        "-i",
        run_file.to_str().unwrap(),
        "-o",
        curve_file.to_str().unwrap(),
    ]);
    run_ok(&[
        "fit",
        "-c",
        cfg_s,
        "-i",
        curve_file.to_str().unwrap(),
        "-o",
        report_file.to_str().unwrap(),
    ]);

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report_file).unwrap()).unwrap();
    let alpha = report["result"]["alpha"].as_f64().unwrap();
    let alpha_err = report["result"]["alpha_err"].as_f64().unwrap();
    assert!(
        alpha.abs() < 3.0 * alpha_err,
        "alpha = {alpha:.4} +- {alpha_err:.4} is not consistent with zero"
    );

    let curve = read_curve(&curve_file);
    let mut worst = 0.0f64;
    for j in 0..curve.c_norm.len() {
        worst = worst.max((curve.c_norm[j] - 1.0).abs() / curve.err[j]);
    }
    assert!(
        worst < 4.0,
        "a bin deviates from 1 by {worst:.2} sigma on the flat control"
    );
    println!(
        "acceptance flat-control: pass \
         (alpha {alpha:.4} +- {alpha_err:.4}, worst bin {worst:.2} sigma over {} bins)",
        curve.c_norm.len()
    );
}

#[test]
fn a6_dip_depth_scales_with_coherence_over_window() {
    // In the well-resolved regime (effective dip width at most delta/20) the
    // depth must scale as 1/delta, and as tau_c once the timing spread is
    // negligible.
    let mut worst_window = 0.0f64;
    for tau_t in [1e-3f64, 20.0, 80.0] {
        for tau_c in [10.0f64, 20.0, 40.0, 60.0] {
            let tau_eff = (tau_c * tau_c + tau_t * tau_t / 2.0).sqrt();
            for delta in [1700.0, 3400.0] {
                assert!(tau_eff <= delta / 20.0, "grid outside the stated regime");
                let d = BroadenedModel::new(1.0, tau_c, tau_t, delta, 1.0)
                    .unwrap()
                    .dip_depth();
                let d2 = BroadenedModel::new(1.0, tau_c, tau_t, 2.0 * delta, 1.0)
                    .unwrap()
                    .dip_depth();
                worst_window = worst_window.max((d / (2.0 * d2) - 1.0).abs());
            }
        }
    }
    let mut worst_tau = 0.0f64;
    for tau_c in [10.0, 20.0, 40.0, 60.0] {
        let d = BroadenedModel::new(1.0, tau_c, 1e-3, 3400.0, 1.0)
            .unwrap()
            .dip_depth();
        let d2 = BroadenedModel::new(1.0, 2.0 * tau_c, 1e-3, 3400.0, 1.0)
            .unwrap()
            .dip_depth();
        worst_tau = worst_tau.max((d2 / (2.0 * d) - 1.0).abs());
    }
    assert!(worst_window <= 0.01, "1/delta law violated by {worst_window:.4}");
    assert!(worst_tau <= 0.01, "tau_c law violated by {worst_tau:.4}");
    println!(
        "acceptance dip-depth-scaling: pass \
         (1/delta law within {worst_window:.2e}, tau_c law within {worst_tau:.2e})"
    );
}

#[test]
fn a7_cleaning_suppresses_crosstalk_coincidences() {
    let dir = workdir();
    let cfg_file = dir.join("crosstalk.cfg");
    fs::write(
        &cfg_file,
        patched_preset(
            "in10",
            &[
                ("duration_s", "400"),
                ("seed", "7001"),
                ("crosstalk_probability", "0.05"),
            ],
        ),
    )
    .unwrap();
    let run_file = dir.join("crosstalk.ntt1");
    run_ok(&[
        "simulate",
        "-c",
        cfg_file.to_str().unwrap(),
        "-o",
        run_file.to_str().unwrap(),
    ]);
    let bytes = fs::read(&run_file).unwrap();
    let (meta, events) = decode_run(&bytes).unwrap();
    let cfg = AnalysisConfig::default();

    // Spurious coincidences: pairs of distinct analyzed pixels closer than
    // the spurious window. Crosstalk duplicates land on a neighboring pixel
    // within the jitter window, so with cleaning disabled each in-group
    // duplicate contributes one such pair.
    let in_union = |p: u16| cfg.group1.contains(&p) || cfg.group2.contains(&p);
    let count_close_pairs = |list: &[(u64, u16)]| -> u64 {
        let mut n = 0;
        for (i, a) in list.iter().enumerate() {
            for b in &list[i + 1..] {
                if b.0 - a.0 >= cfg.delta_s_ns {
                    break;
                }
                if b.1 != a.1 {
                    n += 1;
                }
            }
        }
        n
    };
    let raw: Vec<(u64, u16)> = events
        .iter()
        .filter(|e| in_union(e.pixel))
        .map(|e| (meta.clock.ticks_to_ns(e.tick).unwrap(), e.pixel))
        .collect();
    let spurious_off = count_close_pairs(&raw);

    let cleaned = clean_events(&events, &cfg, &meta.clock).unwrap();
    let mut kept: Vec<(u64, u16)> = cleaned
        .d1
        .iter()
        .chain(cleaned.d2.iter())
        .map(|t| (t.t_ns, t.pixel))
        .collect();
    kept.sort_unstable();
    let spurious_on = count_close_pairs(&kept);

    let ratio = spurious_off as f64 / spurious_on.max(1) as f64;
    assert!(
        spurious_off > 10_000,
        "only {spurious_off} spurious pairs before cleaning; run too small to judge"
    );
    assert!(
        ratio >= 10.0,
        "cleaning reduced spurious pairs only {ratio:.1}x ({spurious_off} -> {spurious_on})"
    );

    // Far side of the curve: cleaning must not move it. Compare the cleaned
    // analysis against one built from the raw group events.
    let hist = analyze_events(&events, &cfg, &meta.clock, 1).unwrap();
    let mut raw1: Vec<u64> = Vec::new();
    let mut raw2: Vec<u64> = Vec::new();
    for &(t, p) in &raw {
        if cfg.group1.contains(&p) {
            raw1.push(t);
        } else {
            raw2.push(t);
        }
    }
    let w = cfg.bin_width_ns;
    let n_raw_bins = ((cfg.max_lag_ns + cfg.delta_ns) / w) as usize;
    let rawh = delay_histogram(&raw1, &raw2, w, n_raw_bins);
    let m = (cfg.delta_ns / w) as usize;
    let sums = windowed_sums(&rawh, m).unwrap();
    let lo = (cfg.norm_region_ns.0 / w) as usize;
    let hi = (cfg.norm_region_ns.1 / w) as usize;
    let unclean = normalize(&sums, m, lo..hi).unwrap();
    let mut worst_tail = 0.0f64;
    for j in 0..hist.c_norm.len() {
        if hist.lag_ns[j] <= 300.0 {
            continue;
        }
        let sigma = (hist.err[j].powi(2) + unclean.err[j].powi(2)).sqrt();
        worst_tail = worst_tail.max((hist.c_norm[j] - unclean.c[j]).abs() / sigma);
    }
    assert!(
        worst_tail <= 2.0,
        "cleaning moved a far-lag bin by {worst_tail:.2} sigma"
    );
    println!(
        "acceptance crosstalk-suppression: pass \
         (close pairs {spurious_off} -> {spurious_on}, {ratio:.0}x, \
         far-lag shift {worst_tail:.2} sigma)"
    );
}

#[test]
fn a8_pair_histogram_matches_brute_force() {
    let mut state = 0x243f_6a88_85a3_08d3u64;
    let mut next = move |m: u64| {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (state >> 33) % m
    };
    for case in 0..1000 {
        let n1 = next(40) as usize;
        let n2 = next(40) as usize;
        let bin_width = [5u64, 25, 40][next(3) as usize];
        let n_bins = [8usize, 16, 56][next(3) as usize];
        let mut d1: Vec<u64> = (0..n1).map(|_| next(20_000)).collect();
        let mut d2: Vec<u64> = (0..n2).map(|_| next(20_000)).collect();
        d1.sort_unstable();
        d2.sort_unstable();
        let fast = delay_histogram(&d1, &d2, bin_width, n_bins);
        let mut slow = vec![0u64; n_bins];
        for &a in &d1 {
            for &b in &d2 {
                if b >= a && b - a < bin_width * n_bins as u64 {
                    slow[((b - a) / bin_width) as usize] += 1;
                }
            }
        }
        assert_eq!(fast, slow, "case {case}: n1={n1} n2={n2} bw={bin_width}");
    }
    println!("acceptance pair-histogram-brute-force: pass (1000 random instances)");
}

#[test]
fn a9_analysis_is_fast_and_thread_invariant() {
    let run = long_run();
    let bytes = fs::read(&run.run_file).unwrap();
    let (meta, events) = decode_run(&bytes).unwrap();
    drop(bytes);
    assert!(
        events.len() >= 10_000_000,
        "run has only {} events",
        events.len()
    );
    let cfg = AnalysisConfig::default();
    let t0 = Instant::now();
    let hist = analyze_events(&events, &cfg, &meta.clock, 1).unwrap();
    let elapsed = t0.elapsed().as_secs_f64();
    assert!(hist.n_start > 0 && hist.n_stop > 0);
    assert!(
        elapsed <= 60.0,
        "single-threaded analysis of {} events took {elapsed:.1} s",
        events.len()
    );

    // Same input analyzed under different thread counts: identical bytes.
    let dir = workdir();
    let cfg_file = dir.join("long.cfg");
    let mut outputs = Vec::new();
    for (label, threads, env_threads) in
        [("t1", "1", None), ("t3", "3", None), ("env2", "7", Some("2"))]
    {
        let out_file = dir.join(format!("threads_{label}.csv"));
        let mut cmd = Command::new(bin());
        cmd.args([
            "analyze",
            "-c",
            cfg_file.to_str().unwrap(),
            "-i",
            run.run_file.to_str().unwrap(),
            "-o",
            out_file.to_str().unwrap(),
            "--threads",
            threads,
        ]);
        if let Some(n) = env_threads {
            cmd.env("FERMI_HBT_THREADS", n);
        }
        let out = cmd.output().expect("spawn CLI");
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push(fs::read(&out_file).unwrap());
    }
    assert!(
        outputs[0] == outputs[1] && outputs[1] == outputs[2],
        "thread count changed the output bytes"
    );
    println!(
        "acceptance analysis-performance: pass \
         ({} events in {elapsed:.1} s single-threaded, outputs thread-invariant)",
        events.len()
    );
}

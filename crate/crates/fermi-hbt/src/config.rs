//! Run configuration: a flat `key = value` file with `[section]` headers.
//!
//! Sections mirror the pipeline stages — `[beam]`, `[detector]`,
//! `[analysis]`, `[fit]`. Unknown sections or keys are hard errors so a
//! typo can never silently fall back to a default. All values carry their
//! unit in the key name (`_ns`, `_s`, `_ms`, `_hz`).
//!
//! Two presets are bundled, `in10` and `t13c`. They differ only in the
//! beam coherence time (120 ns vs 0.03 ns) and the source label; detector
//! and analysis settings are identical so both run through exactly the
//! same processing.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use crate::errors::CliError;
use beam_sim::{BeamConfig, CorrelationModel};
use coincidence::AnalysisConfig;
use detector_sim::{CrosstalkModel, DetectorConfig, ScintillatorModel, PIXEL_COUNT};
use model_fit::{FitOptions, FixedParams, InitParams};
use timetag_core::{ClockConfig, RunMetadata};

/// Beam-line parameters: flux, correlation dip, run length, seed.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamSection {
    pub rate_hz: f64,
    pub alpha: f64,
    pub tau_c_ns: f64,
    pub duration_s: f64,
    pub seed: u64,
    pub source_label: String,
}

/// Pixel selection for the illumination map.
#[derive(Debug, Clone, PartialEq)]
pub enum Illumination {
    /// Every pixel equally lit.
    Uniform,
    /// Equal weight on the listed pixels, zero elsewhere.
    Pixels(Vec<u16>),
}

/// Detector and acquisition parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorSection {
    pub illumination: Illumination,
    pub decay_time_ns: f64,
    pub mean_capture_ns: f64,
    pub max_travel_ns: f64,
    pub mean_decay_ns: f64,
    pub rms_total_ns: f64,
    pub crosstalk_probability: f64,
    pub crosstalk_jitter_ns: f64,
    pub dark_rate_hz: f64,
    pub clock_hz: u64,
    pub cycle_length_s: f64,
    pub dead_time_ms: f64,
}

/// Coincidence-analysis parameters (see the analysis crate for semantics).
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSection {
    pub group1: Vec<u16>,
    pub group2: Vec<u16>,
    pub delta_ns: u64,
    pub delta_s_ns: u64,
    pub bin_width_ns: u64,
    pub max_lag_ns: u64,
    pub norm_region_ns: (u64, u64),
    pub single_group_mode: bool,
}

/// Curve-fit parameters. `None` means "derive from the other sections":
/// the timing spread from the scintillator model plus clock quantization,
/// the window width from the analysis section.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSection {
    pub tau_t_ns: Option<f64>,
    pub delta_ns: Option<f64>,
    pub init_alpha: f64,
    pub init_tau_c_ns: f64,
    pub init_baseline: f64,
    pub decimate: bool,
    pub max_iter: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub beam: BeamSection,
    pub detector: DetectorSection,
    pub analysis: AnalysisSection,
    pub fit: FitSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            beam: BeamSection {
                rate_hz: 3000.0,
                alpha: 1.0,
                tau_c_ns: 120.0,
                duration_s: 1000.0,
                seed: 20117,
                source_label: String::new(),
            },
            detector: DetectorSection {
                illumination: Illumination::Uniform,
                decay_time_ns: 250.0,
                mean_capture_ns: 100.0,
                max_travel_ns: 300.0,
                mean_decay_ns: 100.0,
                rms_total_ns: 140.0,
                crosstalk_probability: 0.0,
                crosstalk_jitter_ns: 150.0,
                dark_rate_hz: 0.0,
                clock_hz: 40_000_000,
                cycle_length_s: 10.0,
                dead_time_ms: 10.0,
            },
            analysis: AnalysisSection {
                group1: vec![0, 8, 16, 24, 32, 40],
                group2: vec![5, 13, 21, 29, 37, 45],
                delta_ns: 400,
                delta_s_ns: 150,
                bin_width_ns: 25,
                max_lag_ns: 1000,
                norm_region_ns: (500, 700),
                single_group_mode: false,
            },
            fit: FitSection {
                tau_t_ns: None,
                delta_ns: None,
                init_alpha: 0.5,
                init_tau_c_ns: 100.0,
                init_baseline: 1.0,
                decimate: false,
                max_iter: 200,
            },
        }
    }
}

impl RunConfig {
    /// A bundled preset by name, or `None` for an unknown name.
    pub fn preset(name: &str) -> Option<RunConfig> {
        let mut cfg = RunConfig::default();
        // Both detection columns lit, nothing else.
        let mut lit = cfg.analysis.group1.clone();
        lit.extend_from_slice(&cfg.analysis.group2);
        cfg.detector.illumination = Illumination::Pixels(lit);
        match name {
            "in10" => {
                cfg.beam.tau_c_ns = 120.0;
                cfg.beam.source_label = "IN10".into();
            }
            "t13c" => {
                cfg.beam.tau_c_ns = 0.03;
                cfg.beam.source_label = "T13C".into();
            }
            _ => return None,
        }
        Some(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        RunConfig::from_text(&text).map_err(CliError::Validation)
    }

    /// Parse config text. Unknown sections, unknown keys, duplicate keys,
    /// and malformed values are all errors naming the offending line.
    pub fn from_text(text: &str) -> Result<RunConfig, String> {
        let mut cfg = RunConfig::default();
        let mut section: Option<String> = None;
        let mut seen: HashSet<String> = HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let n = idx + 1;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or(format!("line {n}: unterminated section header"))?
                    .trim();
                if !["beam", "detector", "analysis", "fit"].contains(&name) {
                    return Err(format!("line {n}: unknown section [{name}]"));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(format!("line {n}: expected `key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            let section = section
                .as_deref()
                .ok_or(format!("line {n}: key `{key}` before any [section] header"))?;
            if !seen.insert(format!("{section}.{key}")) {
                return Err(format!("line {n}: duplicate key {section}.{key}"));
            }
            cfg.apply(section, key, value)
                .map_err(|e| format!("line {n}: {section}.{key}: {e}"))?;
        }
        Ok(cfg)
    }

    fn apply(&mut self, section: &str, key: &str, value: &str) -> Result<(), String> {
        match (section, key) {
            ("beam", "rate_hz") => self.beam.rate_hz = parse_f64(value)?,
            ("beam", "alpha") => self.beam.alpha = parse_f64(value)?,
            ("beam", "tau_c_ns") => self.beam.tau_c_ns = parse_f64(value)?,
            ("beam", "duration_s") => self.beam.duration_s = parse_f64(value)?,
            ("beam", "seed") => self.beam.seed = parse_u64(value)?,
            ("beam", "source_label") => self.beam.source_label = value.to_string(),
            ("detector", "illumination") => self.detector.illumination = parse_illumination(value)?,
            ("detector", "decay_time_ns") => self.detector.decay_time_ns = parse_f64(value)?,
            ("detector", "mean_capture_ns") => self.detector.mean_capture_ns = parse_f64(value)?,
            ("detector", "max_travel_ns") => self.detector.max_travel_ns = parse_f64(value)?,
            ("detector", "mean_decay_ns") => self.detector.mean_decay_ns = parse_f64(value)?,
            ("detector", "rms_total_ns") => self.detector.rms_total_ns = parse_f64(value)?,
            ("detector", "crosstalk_probability") => {
                self.detector.crosstalk_probability = parse_f64(value)?
            }
            ("detector", "crosstalk_jitter_ns") => {
                self.detector.crosstalk_jitter_ns = parse_f64(value)?
            }
            ("detector", "dark_rate_hz") => self.detector.dark_rate_hz = parse_f64(value)?,
            ("detector", "clock_hz") => self.detector.clock_hz = parse_u64(value)?,
            ("detector", "cycle_length_s") => self.detector.cycle_length_s = parse_f64(value)?,
            ("detector", "dead_time_ms") => self.detector.dead_time_ms = parse_f64(value)?,
            ("analysis", "group1") => self.analysis.group1 = parse_u16_list(value)?,
            ("analysis", "group2") => self.analysis.group2 = parse_u16_list(value)?,
            ("analysis", "delta_ns") => self.analysis.delta_ns = parse_u64(value)?,
            ("analysis", "delta_s_ns") => self.analysis.delta_s_ns = parse_u64(value)?,
            ("analysis", "bin_width_ns") => self.analysis.bin_width_ns = parse_u64(value)?,
            ("analysis", "max_lag_ns") => self.analysis.max_lag_ns = parse_u64(value)?,
            ("analysis", "norm_region_ns") => self.analysis.norm_region_ns = parse_pair(value)?,
            ("analysis", "single_group_mode") => {
                self.analysis.single_group_mode = parse_bool(value)?
            }
            ("fit", "tau_t_ns") => self.fit.tau_t_ns = parse_auto_f64(value)?,
            ("fit", "delta_ns") => self.fit.delta_ns = parse_auto_f64(value)?,
            ("fit", "init_alpha") => self.fit.init_alpha = parse_f64(value)?,
            ("fit", "init_tau_c_ns") => self.fit.init_tau_c_ns = parse_f64(value)?,
            ("fit", "init_baseline") => self.fit.init_baseline = parse_f64(value)?,
            ("fit", "decimate") => self.fit.decimate = parse_bool(value)?,
            ("fit", "max_iter") => self.fit.max_iter = parse_u64(value)? as usize,
            _ => return Err("unknown key".to_string()),
        }
        Ok(())
    }

    /// Every setting as `(section.key, value)`, in file order. Used both to
    /// render config files and to echo the configuration into output
    /// artifacts.
    pub fn echo(&self) -> Vec<(String, String)> {
        let b = &self.beam;
        let d = &self.detector;
        let a = &self.analysis;
        let f = &self.fit;
        let auto = |v: &Option<f64>| match v {
            None => "auto".to_string(),
            Some(x) => x.to_string(),
        };
        vec![
            ("beam.rate_hz".into(), b.rate_hz.to_string()),
            ("beam.alpha".into(), b.alpha.to_string()),
            ("beam.tau_c_ns".into(), b.tau_c_ns.to_string()),
            ("beam.duration_s".into(), b.duration_s.to_string()),
            ("beam.seed".into(), b.seed.to_string()),
            ("beam.source_label".into(), b.source_label.clone()),
            (
                "detector.illumination".into(),
                match &d.illumination {
                    Illumination::Uniform => "uniform".to_string(),
                    Illumination::Pixels(list) => format!("pixels:{}", join(list)),
                },
            ),
            ("detector.decay_time_ns".into(), d.decay_time_ns.to_string()),
            ("detector.mean_capture_ns".into(), d.mean_capture_ns.to_string()),
            ("detector.max_travel_ns".into(), d.max_travel_ns.to_string()),
            ("detector.mean_decay_ns".into(), d.mean_decay_ns.to_string()),
            ("detector.rms_total_ns".into(), d.rms_total_ns.to_string()),
            (
                "detector.crosstalk_probability".into(),
                d.crosstalk_probability.to_string(),
            ),
            (
                "detector.crosstalk_jitter_ns".into(),
                d.crosstalk_jitter_ns.to_string(),
            ),
            ("detector.dark_rate_hz".into(), d.dark_rate_hz.to_string()),
            ("detector.clock_hz".into(), d.clock_hz.to_string()),
            ("detector.cycle_length_s".into(), d.cycle_length_s.to_string()),
            ("detector.dead_time_ms".into(), d.dead_time_ms.to_string()),
            ("analysis.group1".into(), join(&a.group1)),
            ("analysis.group2".into(), join(&a.group2)),
            ("analysis.delta_ns".into(), a.delta_ns.to_string()),
            ("analysis.delta_s_ns".into(), a.delta_s_ns.to_string()),
            ("analysis.bin_width_ns".into(), a.bin_width_ns.to_string()),
            ("analysis.max_lag_ns".into(), a.max_lag_ns.to_string()),
            (
                "analysis.norm_region_ns".into(),
                format!("{},{}", a.norm_region_ns.0, a.norm_region_ns.1),
            ),
            (
                "analysis.single_group_mode".into(),
                a.single_group_mode.to_string(),
            ),
            ("fit.tau_t_ns".into(), auto(&f.tau_t_ns)),
            ("fit.delta_ns".into(), auto(&f.delta_ns)),
            ("fit.init_alpha".into(), f.init_alpha.to_string()),
            ("fit.init_tau_c_ns".into(), f.init_tau_c_ns.to_string()),
            ("fit.init_baseline".into(), f.init_baseline.to_string()),
            ("fit.decimate".into(), f.decimate.to_string()),
            ("fit.max_iter".into(), f.max_iter.to_string()),
        ]
    }

    /// Render as a config file that parses back to `self`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut current = String::new();
        for (path, value) in self.echo() {
            let (section, key) = path.split_once('.').expect("echo paths are section.key");
            if section != current {
                if !out.is_empty() {
                    out.push('\n');
                }
                out.push_str(&format!("[{section}]\n"));
                current = section.to_string();
            }
            out.push_str(&format!("{key} = {value}\n"));
        }
        out
    }

    pub fn beam_config(&self) -> Result<BeamConfig, CliError> {
        let cfg = BeamConfig {
            rate_hz: self.beam.rate_hz,
            duration_s: self.beam.duration_s,
            model: CorrelationModel {
                alpha: self.beam.alpha,
                tau_c: self.beam.tau_c_ns,
            },
            seed: self.beam.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn detector_config(&self) -> Result<DetectorConfig, CliError> {
        let d = &self.detector;
        let illumination = match &d.illumination {
            Illumination::Uniform => vec![1.0; PIXEL_COUNT as usize],
            Illumination::Pixels(list) => {
                let mut weights = vec![0.0; PIXEL_COUNT as usize];
                if list.is_empty() {
                    return Err(CliError::Validation(
                        "detector.illumination pixel list is empty".into(),
                    ));
                }
                for &p in list {
                    if p >= PIXEL_COUNT {
                        return Err(CliError::Validation(format!(
                            "detector.illumination pixel {p} outside the {PIXEL_COUNT}-pixel grid"
                        )));
                    }
                    if weights[p as usize] != 0.0 {
                        return Err(CliError::Validation(format!(
                            "detector.illumination lists pixel {p} twice"
                        )));
                    }
                    weights[p as usize] = 1.0;
                }
                weights
            }
        };
        let cycle_length_ns = seconds_to_ns(d.cycle_length_s, "detector.cycle_length_s")?;
        let dead_ns = seconds_to_ns(d.dead_time_ms / 1e3, "detector.dead_time_ms")?;
        let dead_time_ns = u32::try_from(dead_ns).map_err(|_| {
            CliError::Validation(format!(
                "detector.dead_time_ms = {} exceeds the 32-bit ns range",
                d.dead_time_ms
            ))
        })?;
        let cfg = DetectorConfig {
            illumination,
            scintillator: ScintillatorModel {
                decay_time: d.decay_time_ns,
                mean_capture: d.mean_capture_ns,
                max_travel: d.max_travel_ns,
                mean_decay: d.mean_decay_ns,
                rms_total: d.rms_total_ns,
            },
            crosstalk: CrosstalkModel {
                probability: d.crosstalk_probability,
                jitter_window_ns: d.crosstalk_jitter_ns,
            },
            dark_rate_hz: d.dark_rate_hz,
            clock: ClockConfig::from_frequency(d.clock_hz)?,
            cycle_length_ns,
            dead_time_ns,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn analysis_config(&self) -> Result<AnalysisConfig, CliError> {
        let a = &self.analysis;
        let cfg = AnalysisConfig {
            group1: a.group1.clone(),
            group2: a.group2.clone(),
            delta_ns: a.delta_ns,
            delta_s_ns: a.delta_s_ns,
            bin_width_ns: a.bin_width_ns,
            max_lag_ns: a.max_lag_ns,
            norm_region_ns: a.norm_region_ns,
            single_group_mode: a.single_group_mode,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Run metadata for files this configuration produces.
    pub fn run_metadata(&self, detector: &DetectorConfig) -> RunMetadata {
        RunMetadata {
            clock: detector.clock,
            pixel_count: PIXEL_COUNT,
            seed: self.beam.seed,
            cycle_length_ns: detector.cycle_length_ns,
            dead_time_ns: detector.dead_time_ns,
            source_label: self.beam.source_label.clone(),
        }
    }

    /// Fixed fit parameters, resolving `auto` entries.
    ///
    /// An automatic timing spread folds the scintillator pair-difference
    /// broadening together with clock quantization noise; an automatic
    /// window width copies the analysis window.
    pub fn fit_fixed(&self) -> Result<FixedParams, CliError> {
        let tau_t = match self.fit.tau_t_ns {
            Some(v) => v,
            None => {
                let det = self.detector_config()?;
                det.scintillator
                    .effective_fit_spread(det.clock.tick_ns() as f64)?
            }
        };
        let delta = match self.fit.delta_ns {
            Some(v) => v,
            None => self.analysis.delta_ns as f64,
        };
        Ok(FixedParams { tau_t, delta })
    }

    pub fn fit_init(&self) -> InitParams {
        InitParams {
            alpha: self.fit.init_alpha,
            tau_c: self.fit.init_tau_c_ns,
            baseline: self.fit.init_baseline,
        }
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            decimate: self.fit.decimate,
            max_iter: self.fit.max_iter,
            ..FitOptions::default()
        }
    }
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn seconds_to_ns(seconds: f64, what: &str) -> Result<u64, CliError> {
    if !(seconds >= 0.0) || !seconds.is_finite() {
        return Err(CliError::Validation(format!(
            "{what} = {seconds} must be finite and nonnegative"
        )));
    }
    let ns = seconds * 1e9;
    if ns > u64::MAX as f64 {
        return Err(CliError::Validation(format!("{what} = {seconds} overflows")));
    }
    Ok(ns.round() as u64)
}

fn parse_f64(v: &str) -> Result<f64, String> {
    v.parse::<f64>().map_err(|e| e.to_string())
}

fn parse_u64(v: &str) -> Result<u64, String> {
    v.parse::<u64>().map_err(|e| e.to_string())
}

fn parse_bool(v: &str) -> Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got `{v}`")),
    }
}

fn parse_auto_f64(v: &str) -> Result<Option<f64>, String> {
    if v == "auto" {
        Ok(None)
    } else {
        parse_f64(v).map(Some)
    }
}

fn parse_u16_list(v: &str) -> Result<Vec<u16>, String> {
    v.split(',')
        .map(|p| p.trim().parse::<u16>().map_err(|e| e.to_string()))
        .collect()
}

fn parse_pair(v: &str) -> Result<(u64, u64), String> {
    let (lo, hi) = v
        .split_once(',')
        .ok_or("expected two comma-separated values")?;
    Ok((parse_u64(lo.trim())?, parse_u64(hi.trim())?))
}

fn parse_illumination(v: &str) -> Result<Illumination, String> {
    if v == "uniform" {
        return Ok(Illumination::Uniform);
    }
    if let Some(list) = v.strip_prefix("pixels:") {
        return Ok(Illumination::Pixels(parse_u16_list(list)?));
    }
    Err(format!(
        "expected `uniform` or `pixels:<comma list>`, got `{v}`"
    ))
}

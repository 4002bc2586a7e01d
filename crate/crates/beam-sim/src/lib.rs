//! Arrival-time generator with a prescribed pair correlation.
//!
//! Events come from a homogeneous Poisson candidate stream thinned against
//! the previously *accepted* event: a candidate a delay `tau` after the last
//! accepted arrival survives with probability `g2(tau) / M`. In the dilute
//! regime the generator targets (mean spacing much longer than the
//! correlation time) at most one earlier arrival sits within range, so the
//! pairwise correlation of the output matches `g2` and higher-order effects
//! are negligible. The candidate rate is pre-boosted by the analytically
//! computed acceptance deficit so the realized rate lands on the requested
//! flux.
//!
//! Times are continuous nanoseconds; clock quantization belongs to the
//! detector stage, not the source.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const NS_PER_S: f64 = 1e9;
/// Correlations are generated in independent wall-clock slices of this
/// length; each slice draws its random stream from (seed, slice index).
pub const SEGMENT_NS: f64 = 1e9;
/// Hard ceiling on flux times coherence time (both per ns) for the thinning
/// construction to represent the target correlation faithfully.
pub const MAX_RATE_COHERENCE_PRODUCT: f64 = 1e-2;

/// Target pair correlation: a Gaussian dip (or bump) of amplitude `alpha`
/// and width `tau_c` on an otherwise flat unit background.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationModel {
    /// Dip amplitude in [-1, 1]; positive suppresses close pairs
    /// (antibunching), zero is uncorrelated, negative enhances them.
    pub alpha: f64,
    /// Correlation time in ns (> 0).
    pub tau_c: f64,
}

impl CorrelationModel {
    pub fn validate(&self) -> Result<(), BeamError> {
        if !self.alpha.is_finite() || self.alpha.abs() > 1.0 {
            return Err(BeamError::InvalidModel(format!(
                "amplitude {} outside [-1, 1]",
                self.alpha
            )));
        }
        if !(self.tau_c > 0.0) || !self.tau_c.is_finite() {
            return Err(BeamError::InvalidModel(format!(
                "correlation time {} must be positive and finite",
                self.tau_c
            )));
        }
        Ok(())
    }

    /// Gaussian-width parameter 1/(2 tau_c^2) in ns^-2.
    pub fn beta(&self) -> f64 {
        1.0 / (2.0 * self.tau_c * self.tau_c)
    }

    /// Acceptance ceiling: 1 for dips, 1 + |alpha| when the correlation
    /// exceeds the background (bunching test mode).
    fn ceiling(&self) -> f64 {
        if self.alpha < 0.0 {
            1.0 - self.alpha
        } else {
            1.0
        }
    }
}

/// Target pair correlation at delay `t_ns`: `1 - alpha * exp(-t^2/(2 tau_c^2))`.
/// Symmetric in `t_ns`; total (never fails).
pub fn g2_target(t_ns: f64, model: &CorrelationModel) -> f64 {
    1.0 - model.alpha * (-model.beta() * t_ns * t_ns).exp()
}

/// Generator parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamConfig {
    /// Mean flux in events per second.
    pub rate_hz: f64,
    /// Stream length in seconds.
    pub duration_s: f64,
    pub model: CorrelationModel,
    pub seed: u64,
}

impl BeamConfig {
    pub fn validate(&self) -> Result<(), BeamError> {
        self.model.validate()?;
        if !(self.rate_hz > 0.0) || !self.rate_hz.is_finite() {
            return Err(BeamError::InvalidConfig(format!(
                "rate {} events/s must be positive and finite",
                self.rate_hz
            )));
        }
        if !(self.duration_s > 0.0) || self.duration_s > 1e7 {
            return Err(BeamError::InvalidConfig(format!(
                "duration {} s outside (0, 1e7]",
                self.duration_s
            )));
        }
        let product = self.rate_hz / NS_PER_S * self.model.tau_c;
        if product > MAX_RATE_COHERENCE_PRODUCT {
            return Err(BeamError::RegimeViolation { product });
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BeamError {
    #[error("invalid correlation model: {0}")]
    InvalidModel(String),
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error(
        "flux times coherence time = {product:.3e} exceeds {MAX_RATE_COHERENCE_PRODUCT:.0e}; \
         the thinning generator is only faithful for dilute streams"
    )]
    RegimeViolation { product: f64 },
    #[error("candidate-rate calibration failed: {0}")]
    CalibrationFailed(String),
    #[error("empty or single-event stream has no pair statistics")]
    EmptyStream,
    #[error("bad pair-histogram binning: {0}")]
    BadBins(String),
}

/// Derived seed for a wall-clock slice: splitmix64 over (seed, index).
fn slice_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(index.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Integral of g2 from 0 to `tau`: `tau - alpha tau_c sqrt(pi/2) erf(tau/(sqrt2 tau_c))`.
fn g2_integral(tau: f64, model: &CorrelationModel) -> f64 {
    tau - model.alpha
        * model.tau_c
        * std::f64::consts::FRAC_PI_2.sqrt()
        * libm::erf(tau / (std::f64::consts::SQRT_2 * model.tau_c))
}

/// Mean spacing of accepted events when candidates arrive at `nu * M` per ns:
/// `integral_0^inf exp(-nu * G(tau)) dtau` with `G` the g2 integral.
///
/// Split at `tau0 = 12 tau_c`, beyond which `G(tau) = tau - D` to double
/// precision; the tail is then analytic and the head is a smooth
/// low-variation integrand handled by composite Simpson.
fn mean_accepted_spacing(nu: f64, model: &CorrelationModel) -> f64 {
    let tau0 = 12.0 * model.tau_c;
    let d = model.alpha * model.tau_c * (std::f64::consts::PI / 2.0).sqrt();
    let f = |tau: f64| (-nu * g2_integral(tau, model)).exp();
    // Composite Simpson over [0, tau0].
    let n = 1024usize; // even
    let h = tau0 / n as f64;
    let mut acc = f(0.0) + f(tau0);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(k as f64 * h);
    }
    let head = acc * h / 3.0;
    let tail = (-nu * (tau0 - d)).exp() / nu;
    head + tail
}

/// Candidate rate (per ns) that makes the realized accepted rate equal the
/// requested flux, found by bisection on the renewal mean-spacing identity.
pub fn calibrated_candidate_rate(cfg: &BeamConfig) -> Result<f64, BeamError> {
    cfg.validate()?;
    let phi = cfg.rate_hz / NS_PER_S;
    let m = cfg.model.ceiling();
    let realized = |nu: f64| 1.0 / mean_accepted_spacing(nu, &cfg.model);
    let (mut lo, mut hi) = (0.5 * phi, 2.0 * phi);
    if (realized(lo) - phi) * (realized(hi) - phi) > 0.0 {
        return Err(BeamError::CalibrationFailed(format!(
            "no bracket around flux {phi:.3e}/ns"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if realized(mid) < phi {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) / phi < 1e-12 {
            break;
        }
    }
    Ok(0.5 * (lo + hi) * m)
}

/// Generate the full stream: strictly increasing continuous times in ns.
///
/// The stream is deterministic in the config (seed included) and is built
/// from independent one-second slices, so a longer run extends a shorter
/// one with the same seed rather than reshuffling it.
pub fn generate_stream(cfg: &BeamConfig) -> Result<Vec<f64>, BeamError> {
    let mut gen = SegmentGenerator::new(cfg)?;
    let mut out = Vec::new();
    while let Some(seg) = gen.next_segment() {
        out.extend_from_slice(&seg);
    }
    Ok(out)
}

/// Slice-at-a-time generator so long runs can stream without holding every
/// arrival in memory.
pub struct SegmentGenerator {
    cfg: BeamConfig,
    lambda_c: f64,
    next_index: u64,
    n_segments: u64,
}

impl SegmentGenerator {
    pub fn new(cfg: &BeamConfig) -> Result<Self, BeamError> {
        let lambda_c = calibrated_candidate_rate(cfg)?;
        let n_segments = (cfg.duration_s * NS_PER_S / SEGMENT_NS).ceil() as u64;
        Ok(SegmentGenerator {
            cfg: *cfg,
            lambda_c,
            next_index: 0,
            n_segments,
        })
    }

    /// Calibrated candidate rate per ns (diagnostic).
    pub fn candidate_rate(&self) -> f64 {
        self.lambda_c
    }

    pub fn segments_total(&self) -> u64 {
        self.n_segments
    }

    /// Arrivals of the next one-second slice, or `None` when done.
    pub fn next_segment(&mut self) -> Option<Vec<f64>> {
        if self.next_index >= self.n_segments {
            return None;
        }
        let k = self.next_index;
        self.next_index += 1;
        let t0 = k as f64 * SEGMENT_NS;
        let t1 = (t0 + SEGMENT_NS).min(self.cfg.duration_s * NS_PER_S);
        Some(generate_slice(&self.cfg, self.lambda_c, k, t0, t1))
    }
}

/// One independent slice [t0, t1): Poisson candidates at `lambda_c`, thinned
/// against the last accepted arrival of the same slice. The first candidate
/// has no predecessor and is accepted with the flat-background probability.
fn generate_slice(cfg: &BeamConfig, lambda_c: f64, index: u64, t0: f64, t1: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(slice_seed(cfg.seed, index));
    let m = cfg.model.ceiling();
    let mut out = Vec::with_capacity((cfg.rate_hz * (t1 - t0) / NS_PER_S * 1.05) as usize + 8);
    let mut t = t0;
    let mut last_accepted: Option<f64> = None;
    loop {
        let u: f64 = rng.random();
        t -= (1.0 - u).ln() / lambda_c;
        if t >= t1 {
            break;
        }
        let accept_p = match last_accepted {
            Some(prev) => g2_target(t - prev, &cfg.model) / m,
            None => 1.0 / m,
        };
        if rng.random::<f64>() < accept_p {
            out.push(t);
            last_accepted = Some(t);
        }
    }
    out
}

/// Pair-density histogram of a stream, normalized by the flat-Poisson
/// expectation at the stream's own realized rate.
#[derive(Debug, Clone)]
pub struct EmpiricalG2 {
    pub bin_width_ns: f64,
    /// Normalized pair density per lag bin (1 = uncorrelated).
    pub value: Vec<f64>,
    /// Poisson one-sigma error per bin (one-count floor).
    pub err: Vec<f64>,
    pub counts: Vec<u64>,
    /// Flat-process expected count per bin.
    pub expected_per_bin: f64,
}

impl EmpiricalG2 {
    /// Center of lag bin `j` in ns.
    pub fn lag_center(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.bin_width_ns
    }
}

/// Count ordered pairs per lag bin over `[0, max_lag_ns)` and normalize by
/// the expectation for an uncorrelated stream of the same rate.
pub fn empirical_g2(
    times: &[f64],
    bin_width_ns: f64,
    max_lag_ns: f64,
) -> Result<EmpiricalG2, BeamError> {
    if times.len() < 2 {
        return Err(BeamError::EmptyStream);
    }
    if !(bin_width_ns > 0.0) || max_lag_ns <= bin_width_ns {
        return Err(BeamError::BadBins(format!(
            "need 0 < bin width ({bin_width_ns}) < max lag ({max_lag_ns})"
        )));
    }
    let n_bins = (max_lag_ns / bin_width_ns).ceil() as usize;
    let span = n_bins as f64 * bin_width_ns;
    let mut counts = vec![0u64; n_bins];
    for (i, &a) in times.iter().enumerate() {
        for &b in &times[i + 1..] {
            let lag = b - a;
            if lag >= span {
                break;
            }
            counts[(lag / bin_width_ns) as usize] += 1;
        }
    }
    let t_span = times[times.len() - 1] - times[0];
    if !(t_span > 0.0) {
        return Err(BeamError::BadBins("stream has zero time span".into()));
    }
    let rate = (times.len() - 1) as f64 / t_span;
    let expected = times.len() as f64 * rate * bin_width_ns;
    let value = counts.iter().map(|&c| c as f64 / expected).collect();
    let err = counts
        .iter()
        .map(|&c| (c.max(1) as f64).sqrt() / expected)
        .collect();
    Ok(EmpiricalG2 {
        bin_width_ns,
        value,
        err,
        counts,
        expected_per_bin: expected,
    })
}

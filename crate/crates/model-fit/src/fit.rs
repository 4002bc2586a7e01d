//! Weighted least-squares fit of the broadened-dip model to a measured curve.
//!
//! Levenberg–Marquardt with an analytic Jacobian, parameter bounds, and an
//! optional Nelder–Mead rescue pass for hostile starting points. Free
//! parameters are the dip amplitude, the coherence time, and the baseline;
//! the timing-spread scale and the coincidence window are fixed inputs.
//!
//! Neighbouring curve points share most of their counts because the window
//! slides one bin at a time, so a fit over all points has optimistic
//! parameter errors. [`FitOptions::decimate`] restricts the fit to every
//! window-length-th point — disjoint windows, independent counts, honest
//! errors. Both chi-square flavours are always reported.

use crate::erf::erf;
use crate::model::BroadenedModel;
use crate::ModelError;
use coincidence::DelayHistogram;

const SQRT_PI: f64 = 1.772_453_850_905_516;
const SQRT_TAU: f64 = 2.506_628_274_631_000_5; // sqrt(2*pi)

/// Quantities held fixed during the fit.
#[derive(Debug, Clone, Copy)]
pub struct FixedParams {
    /// Timing-spread scale of the fit kernel (ns). The kernel variance is
    /// half this value squared, matching the spread of a detection-time
    /// difference when each channel contributes `tau_t / 2` in quadrature.
    pub tau_t: f64,
    /// Coincidence window width (ns); must match the analysis that produced
    /// the curve.
    pub delta: f64,
}

/// Starting point for the optimizer.
#[derive(Debug, Clone, Copy)]
pub struct InitParams {
    pub alpha: f64,
    pub tau_c: f64,
    pub baseline: f64,
}

impl Default for InitParams {
    fn default() -> Self {
        InitParams {
            alpha: 0.5,
            tau_c: 100.0,
            baseline: 1.0,
        }
    }
}

/// Optimizer knobs. The defaults converge in tens of iterations on
/// realistic curves.
#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    /// Fit only every window-length-th point (independent windows).
    pub decimate: bool,
    pub max_iter: usize,
    /// Relative step size below which the fit counts as stationary.
    pub step_tol: f64,
    /// Gradient norm (relative to chi-square scale) declaring convergence.
    pub gradient_tol: f64,
    /// Retry from a Nelder–Mead polish when the gradient descent stalls.
    pub simplex_fallback: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            decimate: false,
            max_iter: 200,
            step_tol: 1e-10,
            gradient_tol: 1e-10,
            simplex_fallback: true,
        }
    }
}

/// Fit outcome: parameters, one-sigma errors, and diagnostics.
#[derive(Debug, Clone, serde::Serialize)]
pub struct FitResult {
    pub alpha: f64,
    pub tau_c: f64,
    pub baseline: f64,
    pub alpha_err: f64,
    pub tau_c_err: f64,
    pub baseline_err: f64,
    /// Covariance of (alpha, tau_c, baseline).
    pub covariance: [[f64; 3]; 3],
    /// Weighted residual sum over every curve point.
    pub chi2: f64,
    pub dof: usize,
    /// Same, restricted to every `decimation_stride`-th point.
    pub chi2_decimated: f64,
    pub dof_decimated: usize,
    pub decimation_stride: usize,
    pub converged: bool,
    pub iterations: usize,
    /// A parameter finished pinned to its bound.
    pub at_boundary: bool,
}

const BOUNDS: [(f64, f64); 3] = [
    (-2.0, 2.0),     // alpha
    (1e-2, 1e5),     // tau_c (ns)
    (1e-6, 1e6),     // baseline
];

/// Fit the broadened-dip model to an analyzed histogram.
pub fn fit(
    hist: &DelayHistogram,
    fixed: &FixedParams,
    init: &InitParams,
    opts: &FitOptions,
) -> Result<FitResult, ModelError> {
    fit_curve(&hist.lag_ns, &hist.c_norm, &hist.err, fixed, init, opts)
}

/// Fit the model to raw curve arrays (e.g. read back from CSV).
///
/// `lag_ns` must be uniformly spaced and ascending; `err` entries must be
/// positive. At least four points are required (three parameters plus one
/// degree of freedom), and at least four must survive decimation when that
/// option is on.
pub fn fit_curve(
    lag_ns: &[f64],
    c_norm: &[f64],
    err: &[f64],
    fixed: &FixedParams,
    init: &InitParams,
    opts: &FitOptions,
) -> Result<FitResult, ModelError> {
    validate_inputs(lag_ns, c_norm, err, fixed)?;

    let stride = decimation_stride(lag_ns, fixed.delta);
    let fit_idx: Vec<usize> = if opts.decimate {
        (0..lag_ns.len()).step_by(stride).collect()
    } else {
        (0..lag_ns.len()).collect()
    };
    if fit_idx.len() < 4 {
        return Err(ModelError::TooFewBins {
            need: 4,
            got: fit_idx.len(),
        });
    }

    let mut p = clamp_params([init.alpha, init.tau_c, init.baseline]);
    let mut state = lm_minimize(lag_ns, c_norm, err, &fit_idx, fixed, p, opts)?;

    if !state.converged && opts.simplex_fallback {
        let rescued = nelder_mead(lag_ns, c_norm, err, &fit_idx, fixed, state.p, 400);
        p = clamp_params(rescued);
        let retry = lm_minimize(lag_ns, c_norm, err, &fit_idx, fixed, p, opts)?;
        if retry.chi2 <= state.chi2 {
            state = retry;
        }
    }

    let p = state.p;
    let cov = covariance(lag_ns, err, &fit_idx, fixed, p)?;
    let chi2_all = chisq(lag_ns, c_norm, err, &(0..lag_ns.len()).collect::<Vec<_>>(), fixed, p);
    let dec_idx: Vec<usize> = (0..lag_ns.len()).step_by(stride).collect();
    let chi2_dec = chisq(lag_ns, c_norm, err, &dec_idx, fixed, p);

    let at_boundary = p
        .iter()
        .zip(BOUNDS.iter())
        .any(|(&v, &(lo, hi))| (v - lo).abs() <= 1e-12 * lo.abs().max(1.0) || (hi - v).abs() <= 1e-12 * hi);

    Ok(FitResult {
        alpha: p[0],
        tau_c: p[1],
        baseline: p[2],
        alpha_err: cov[0][0].max(0.0).sqrt(),
        tau_c_err: cov[1][1].max(0.0).sqrt(),
        baseline_err: cov[2][2].max(0.0).sqrt(),
        covariance: cov,
        chi2: chi2_all,
        dof: lag_ns.len().saturating_sub(3),
        chi2_decimated: chi2_dec,
        dof_decimated: dec_idx.len().saturating_sub(3),
        decimation_stride: stride,
        converged: state.converged,
        iterations: state.iterations,
        at_boundary,
    })
}

fn validate_inputs(
    lag_ns: &[f64],
    c_norm: &[f64],
    err: &[f64],
    fixed: &FixedParams,
) -> Result<(), ModelError> {
    if !(fixed.delta > 0.0) || !fixed.delta.is_finite() {
        return Err(ModelError::InvalidParameter(format!(
            "coincidence window {} must be positive and finite",
            fixed.delta
        )));
    }
    if !(fixed.tau_t >= 0.0) || !fixed.tau_t.is_finite() {
        return Err(ModelError::InvalidParameter(format!(
            "timing spread {} must be nonnegative and finite",
            fixed.tau_t
        )));
    }
    if lag_ns.len() != c_norm.len() || lag_ns.len() != err.len() {
        return Err(ModelError::InvalidParameter(format!(
            "curve arrays disagree in length: {} lags, {} values, {} errors",
            lag_ns.len(),
            c_norm.len(),
            err.len()
        )));
    }
    if lag_ns.len() < 4 {
        return Err(ModelError::TooFewBins {
            need: 4,
            got: lag_ns.len(),
        });
    }
    for (i, (&t, &y)) in lag_ns.iter().zip(c_norm).enumerate() {
        if !t.is_finite() || !y.is_finite() {
            return Err(ModelError::NonFiniteInput { index: i });
        }
    }
    for (i, &e) in err.iter().enumerate() {
        if !(e > 0.0) || !e.is_finite() {
            return Err(ModelError::BadErrorBar { index: i });
        }
    }
    Ok(())
}

/// Points per coincidence window on the curve grid (>= 1).
fn decimation_stride(lag_ns: &[f64], delta: f64) -> usize {
    let dt = lag_ns[1] - lag_ns[0];
    if dt > 0.0 {
        ((delta / dt).round() as usize).max(1)
    } else {
        1
    }
}

fn clamp_params(mut p: [f64; 3]) -> [f64; 3] {
    for (v, &(lo, hi)) in p.iter_mut().zip(BOUNDS.iter()) {
        *v = v.clamp(lo, hi);
    }
    p
}

fn model_at(fixed: &FixedParams, p: [f64; 3], t: f64) -> f64 {
    let m = BroadenedModel {
        alpha: p[0],
        tau_c: p[1],
        tau_t: fixed.tau_t,
        delta: fixed.delta,
        baseline: p[2],
    };
    m.c_exp_closed(t)
}

/// Analytic partials of the model value with respect to
/// (alpha, tau_c, baseline) at lag `t`.
fn jacobian_row(fixed: &FixedParams, p: [f64; 3], t: f64) -> [f64; 3] {
    let [alpha, tau_c, _] = p;
    let delta = fixed.delta;
    let gamma = 1.0 / (2.0 * tau_c * tau_c + fixed.tau_t * fixed.tau_t);
    let sg = gamma.sqrt();
    let k = SQRT_TAU / (2.0 * delta);
    let u1 = sg * (t + delta);
    let u0 = sg * t;
    let e = erf(u1) - erf(u0);

    let d_alpha = -tau_c * k * e;
    // dE/d(tau_c) through d(sqrt(gamma))/d(tau_c) = -2 tau_c gamma^{3/2}.
    let gauss = (t + delta) * (-u1 * u1).exp() - t * (-u0 * u0).exp();
    let de_dtau = -(4.0 * tau_c / SQRT_PI) * gamma * sg * gauss;
    let d_tau = -alpha * k * (e + tau_c * de_dtau);
    [d_alpha, d_tau, 1.0]
}

fn chisq(
    lag_ns: &[f64],
    c_norm: &[f64],
    err: &[f64],
    idx: &[usize],
    fixed: &FixedParams,
    p: [f64; 3],
) -> f64 {
    idx.iter()
        .map(|&j| {
            let r = (model_at(fixed, p, lag_ns[j]) - c_norm[j]) / err[j];
            r * r
        })
        .sum()
}

struct LmState {
    p: [f64; 3],
    chi2: f64,
    converged: bool,
    iterations: usize,
}

fn lm_minimize(
    lag_ns: &[f64],
    c_norm: &[f64],
    err: &[f64],
    idx: &[usize],
    fixed: &FixedParams,
    start: [f64; 3],
    opts: &FitOptions,
) -> Result<LmState, ModelError> {
    let mut p = start;
    let mut chi2 = chisq(lag_ns, c_norm, err, idx, fixed, p);
    let mut lambda = 1e-3;
    let mut small_steps = 0usize;
    let mut converged = false;
    let mut iterations = 0usize;

    for _ in 0..opts.max_iter {
        iterations += 1;
        // Normal equations from the analytic Jacobian.
        let mut a = [[0.0f64; 3]; 3];
        let mut g = [0.0f64; 3];
        for &j in idx {
            let row = jacobian_row(fixed, p, lag_ns[j]);
            let r = (model_at(fixed, p, lag_ns[j]) - c_norm[j]) / err[j];
            for k in 0..3 {
                let jk = row[k] / err[j];
                g[k] += jk * r;
                for l in k..3 {
                    a[k][l] += jk * row[l] / err[j];
                }
            }
        }
        for k in 0..3 {
            for l in 0..k {
                a[k][l] = a[l][k];
            }
        }

        let gnorm = g.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        if gnorm <= opts.gradient_tol * chi2.max(1.0) {
            converged = true;
            break;
        }

        // Damped step; raise lambda until the step improves chi-square.
        let mut accepted = false;
        for _ in 0..40 {
            let mut damped = a;
            for k in 0..3 {
                damped[k][k] += lambda * a[k][k].max(1e-12);
            }
            let rhs = [-g[0], -g[1], -g[2]];
            let Some(step) = solve3(damped, rhs) else {
                lambda *= 10.0;
                continue;
            };
            let trial = clamp_params([p[0] + step[0], p[1] + step[1], p[2] + step[2]]);
            let trial_chi2 = chisq(lag_ns, c_norm, err, idx, fixed, trial);
            if trial_chi2.is_finite() && trial_chi2 <= chi2 {
                let rel_step = (0..3)
                    .map(|k| (trial[k] - p[k]).abs() / (p[k].abs() + 1e-12))
                    .fold(0.0f64, f64::max);
                p = trial;
                chi2 = trial_chi2;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if rel_step < opts.step_tol {
                    small_steps += 1;
                    if small_steps >= 2 {
                        converged = true;
                    }
                } else {
                    small_steps = 0;
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
        if converged {
            break;
        }
        if !accepted {
            // Damping maxed out without progress: stationary to machine
            // precision or a hopeless region; let the caller decide.
            converged = small_steps > 0;
            break;
        }
    }

    Ok(LmState {
        p,
        chi2,
        converged,
        iterations,
    })
}

/// Covariance of the parameter estimates: inverse of J^T W J at the optimum,
/// with a relative ridge retry when the dip amplitude is so small that the
/// coherence time drops out of the model.
fn covariance(
    lag_ns: &[f64],
    err: &[f64],
    idx: &[usize],
    fixed: &FixedParams,
    p: [f64; 3],
) -> Result<[[f64; 3]; 3], ModelError> {
    let mut a = [[0.0f64; 3]; 3];
    for &j in idx {
        let row = jacobian_row(fixed, p, lag_ns[j]);
        for k in 0..3 {
            for l in k..3 {
                a[k][l] += row[k] * row[l] / (err[j] * err[j]);
            }
        }
    }
    for k in 0..3 {
        for l in 0..k {
            a[k][l] = a[l][k];
        }
    }
    if let Some(inv) = invert3(a) {
        return Ok(inv);
    }
    let ridge = 1e-10 * a.iter().enumerate().map(|(k, r)| r[k]).fold(1e-300, f64::max);
    let mut ridged = a;
    for k in 0..3 {
        ridged[k][k] += ridge;
    }
    invert3(ridged).ok_or(ModelError::SingularNormalMatrix)
}

/// Gaussian elimination with partial pivoting on a 3x3 system.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| {
            a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap()
        })?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0f64; 3];
    for row in (0..3).rev() {
        let mut s = b[row];
        for k in row + 1..3 {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
        if !x[row].is_finite() {
            return None;
        }
    }
    Some(x)
}

fn invert3(a: [[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let mut inv = [[0.0f64; 3]; 3];
    for col in 0..3 {
        let mut e = [0.0f64; 3];
        e[col] = 1.0;
        let x = solve3(a, e)?;
        for row in 0..3 {
            inv[row][col] = x[row];
        }
    }
    Some(inv)
}

/// Compact Nelder–Mead used only to escape stalls; returns the best vertex.
fn nelder_mead(
    lag_ns: &[f64],
    c_norm: &[f64],
    err: &[f64],
    idx: &[usize],
    fixed: &FixedParams,
    start: [f64; 3],
    max_iter: usize,
) -> [f64; 3] {
    let f = |p: [f64; 3]| chisq(lag_ns, c_norm, err, idx, fixed, clamp_params(p));
    let mut simplex: Vec<([f64; 3], f64)> = Vec::with_capacity(4);
    simplex.push((start, f(start)));
    for k in 0..3 {
        let mut v = start;
        v[k] += if v[k].abs() > 1e-6 { 0.1 * v[k].abs() } else { 0.1 };
        simplex.push((v, f(v)));
    }
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        let best = simplex[0].1;
        let worst = simplex[3].1;
        if worst - best <= 1e-12 * (best.abs() + 1e-12) {
            break;
        }
        let mut centroid = [0.0f64; 3];
        for v in &simplex[..3] {
            for k in 0..3 {
                centroid[k] += v.0[k] / 3.0;
            }
        }
        let at = |scale: f64| {
            let mut v = [0.0f64; 3];
            for k in 0..3 {
                v[k] = centroid[k] + scale * (centroid[k] - simplex[3].0[k]);
            }
            v
        };
        let refl = at(1.0);
        let f_refl = f(refl);
        if f_refl < simplex[0].1 {
            let exp = at(2.0);
            let f_exp = f(exp);
            simplex[3] = if f_exp < f_refl { (exp, f_exp) } else { (refl, f_refl) };
        } else if f_refl < simplex[2].1 {
            simplex[3] = (refl, f_refl);
        } else {
            let con = at(-0.5);
            let f_con = f(con);
            if f_con < simplex[3].1 {
                simplex[3] = (con, f_con);
            } else {
                let best_v = simplex[0].0;
                for v in &mut simplex[1..] {
                    for k in 0..3 {
                        v.0[k] = best_v[k] + 0.5 * (v.0[k] - best_v[k]);
                    }
                    v.1 = f(v.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    clamp_params(simplex[0].0)
}

//! Built-in oracle suites: closed form vs quadrature, erf accuracy, and
//! generator pair statistics. `--quick` trims grid sizes and stream
//! lengths for a smoke run.

use crate::errors::CliError;
use beam_sim::{empirical_g2, g2_target, generate_stream, BeamConfig, CorrelationModel};
use model_fit::BroadenedModel;

pub struct SelftestOptions {
    pub quick: bool,
    /// Maximum |closed − quadrature| tolerated by the oracle grid.
    pub oracle_tol: f64,
    /// Fault-injection hook: offset the erf values under test so the erf
    /// suite must fail. Proves the suite can fail at all.
    pub perturb_erf: bool,
}

struct Suite {
    name: &'static str,
    passed: bool,
    detail: String,
}

pub fn cmd_selftest(opts: &SelftestOptions) -> Result<(), CliError> {
    let suites = [
        oracle_grid(opts),
        erf_suite(opts),
        generator_suite(opts),
    ];
    let mut all_ok = true;
    for s in &suites {
        println!(
            "suite {}: {} ({})",
            s.name,
            if s.passed { "pass" } else { "FAIL" },
            s.detail
        );
        all_ok &= s.passed;
    }
    if all_ok {
        Ok(())
    } else {
        Err(CliError::Numerical("self-test failed".into()))
    }
}

/// Closed-form curve against nested adaptive quadrature over a parameter
/// grid spanning dips, bunching, narrow and broad coherence times.
fn oracle_grid(opts: &SelftestOptions) -> Suite {
    let (alphas, tau_cs): (&[f64], &[f64]) = if opts.quick {
        (&[1.0, -0.8], &[0.03, 120.0])
    } else {
        (&[1.0, 0.5, -0.8], &[0.03, 5.0, 120.0, 500.0])
    };
    let tau_ts = [140.0, 209.0];
    let deltas = [200.0, 400.0];
    let t_step = if opts.quick { 100 } else { 25 };
    // Evaluate the quadrature a couple of digits past the comparison
    // tolerance so the check probes the closed form, not the integrator.
    let quad_tol = (opts.oracle_tol / 100.0).min(1e-10);

    let mut worst = 0.0f64;
    let mut evals = 0u64;
    for &alpha in alphas {
        for &tau_c in tau_cs {
            for &tau_t in &tau_ts {
                for &delta in &deltas {
                    let m = match BroadenedModel::new(alpha, tau_c, tau_t, delta, 1.0) {
                        Ok(m) => m,
                        Err(e) => {
                            return Suite {
                                name: "oracle-grid",
                                passed: false,
                                detail: format!("model rejected: {e}"),
                            }
                        }
                    };
                    let mut t = 0.0;
                    while t <= 1000.0 {
                        match m.c_exp_quadrature(t, quad_tol) {
                            Ok(q) => worst = worst.max((m.c_exp_closed(t) - q).abs()),
                            Err(e) => {
                                return Suite {
                                    name: "oracle-grid",
                                    passed: false,
                                    detail: format!("quadrature failed at t={t}: {e}"),
                                }
                            }
                        }
                        evals += 1;
                        t += t_step as f64;
                    }
                }
            }
        }
    }
    Suite {
        name: "oracle-grid",
        passed: worst <= opts.oracle_tol,
        detail: format!(
            "max |closed - quadrature| = {worst:.3e} over {evals} points, tol {:.1e}",
            opts.oracle_tol
        ),
    }
}

/// erf under test against the independent libm implementation, plus the
/// oddness identity.
fn erf_suite(opts: &SelftestOptions) -> Suite {
    let n = if opts.quick { 1_000 } else { 10_000 };
    let bump = if opts.perturb_erf { 1e-9 } else { 0.0 };
    let mut worst = 0.0f64;
    let mut worst_odd = 0.0f64;
    for k in 0..=n {
        let x = -6.0 + 12.0 * k as f64 / n as f64;
        let v = model_fit::erf(x) + bump;
        worst = worst.max((v - libm::erf(x)).abs());
        worst_odd = worst_odd.max((model_fit::erf(x) + model_fit::erf(-x)).abs());
    }
    let passed = worst <= 1e-12 && worst_odd <= 1e-15;
    Suite {
        name: "erf",
        passed,
        detail: format!("max |err| = {worst:.3e} (tol 1e-12), oddness {worst_odd:.3e} (tol 1e-15)"),
    }
}

/// Short antibunched stream; empirical pair density must track the target
/// correlation with a sane chi-square.
fn generator_suite(opts: &SelftestOptions) -> Suite {
    let cfg = BeamConfig {
        rate_hz: 2.0e4,
        duration_s: if opts.quick { 20.0 } else { 100.0 },
        model: CorrelationModel {
            alpha: 1.0,
            tau_c: 120.0,
        },
        seed: 9,
    };
    let times = match generate_stream(&cfg) {
        Ok(t) => t,
        Err(e) => {
            return Suite {
                name: "generator",
                passed: false,
                detail: format!("generation failed: {e}"),
            }
        }
    };
    let g2 = match empirical_g2(&times, 25.0, 1000.0) {
        Ok(g) => g,
        Err(e) => {
            return Suite {
                name: "generator",
                passed: false,
                detail: format!("pair histogram failed: {e}"),
            }
        }
    };
    // Chi-square against the bin-averaged target.
    let mut chi2 = 0.0;
    for j in 0..g2.value.len() {
        // 100-point average of the target over the bin.
        let lo = j as f64 * g2.bin_width_ns;
        let mean: f64 = (0..100)
            .map(|i| g2_target(lo + (i as f64 + 0.5) * g2.bin_width_ns / 100.0, &cfg.model))
            .sum::<f64>()
            / 100.0;
        chi2 += ((g2.value[j] - mean) / g2.err[j]).powi(2);
    }
    let dof = g2.value.len() as f64;
    let reduced = chi2 / dof;
    let (lo, hi) = if opts.quick { (0.3, 2.2) } else { (0.4, 1.8) };
    let dip_ok = g2.value[0] < 0.3;
    Suite {
        name: "generator",
        passed: reduced >= lo && reduced <= hi && dip_ok,
        detail: format!(
            "chi2/dof = {reduced:.3} over {} bins (want [{lo}, {hi}]), zero-lag bin {:.3}",
            g2.value.len(),
            g2.value[0]
        ),
    }
}

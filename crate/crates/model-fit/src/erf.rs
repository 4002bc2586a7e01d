//! Error function, accurate to better than 1e-13 absolute on [-6, 6].

use std::f64::consts::FRAC_2_SQRT_PI;

/// |x| at and beyond which erf is clamped to +-1 (|erf| - 1 < 2^-53 there).
pub const CLAMP_AT: f64 = 6.0;

/// Error function, normalized so erf(0) = 0 and erf(+inf) = 1.
///
/// Evaluated through the cancellation-free expansion
/// `erf(x) = (2/sqrt(pi)) x exp(-x^2) * sum_n (2x^2)^n / (2n+1)!!`,
/// which keeps every term positive; clamps to +-1 for |x| >= 6. NaN
/// propagates. Odd symmetry is exact because the sign is folded out.
pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let ax = x.abs();
    if ax >= CLAMP_AT {
        return 1.0f64.copysign(x);
    }
    if ax == 0.0 {
        return x; // preserves signed zero
    }
    let x2 = ax * ax;
    let two_x2 = 2.0 * x2;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut n = 0u32;
    loop {
        n += 1;
        term *= two_x2 / (2.0 * n as f64 + 1.0);
        sum += term;
        if term < sum * 1e-17 || n > 300 {
            break;
        }
    }
    // The series carries a few ULP of round-off near saturation, which can
    // push the value a hair past 1; the true function never does.
    let r = (FRAC_2_SQRT_PI * ax * (-x2).exp() * sum).min(1.0);
    r.copysign(x)
}

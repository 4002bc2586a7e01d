//! Property tests for the stream generator and its pair statistics.

use beam_sim::{
    empirical_g2, g2_target, generate_stream, BeamConfig, BeamError, CorrelationModel,
};
use proptest::prelude::*;

proptest! {
    #[test]
    fn g2_is_bounded_symmetric_and_flat_at_infinity(
        alpha in -1.0f64..1.0,
        tau_c in 1.0f64..500.0,
        t in -5_000.0f64..5_000.0,
    ) {
        let m = CorrelationModel { alpha, tau_c };
        let v = g2_target(t, &m);
        prop_assert!((0.0..=2.0).contains(&v));
        prop_assert_eq!(v, g2_target(-t, &m));
        prop_assert!((g2_target(tau_c * 50.0, &m) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn streams_are_strictly_increasing_and_deterministic(
        seed in any::<u64>(),
        alpha in -1.0f64..1.0,
        rate in 1_000.0f64..50_000.0,
    ) {
        let cfg = BeamConfig {
            rate_hz: rate,
            duration_s: 0.05,
            model: CorrelationModel { alpha, tau_c: 80.0 },
            seed,
        };
        let a = generate_stream(&cfg).unwrap();
        prop_assert!(a.windows(2).all(|w| w[1] > w[0]));
        let b = generate_stream(&cfg).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn regime_bound_is_enforced(rate in 1.0f64..1e9, tau_c in 0.001f64..1e4) {
        let cfg = BeamConfig {
            rate_hz: rate,
            duration_s: 0.01,
            model: CorrelationModel { alpha: 0.5, tau_c },
            seed: 0,
        };
        let product = rate / 1e9 * tau_c;
        match cfg.validate() {
            Ok(()) => prop_assert!(product <= 1e-2),
            Err(BeamError::RegimeViolation { .. }) => prop_assert!(product > 1e-2),
            Err(e) => return Err(TestCaseError::fail(format!("unexpected error {e:?}"))),
        }
    }

    #[test]
    fn pair_counts_match_brute_force(
        seed in any::<u64>(),
        rate in 5_000.0f64..40_000.0,
    ) {
        let cfg = BeamConfig {
            rate_hz: rate,
            duration_s: 0.02,
            model: CorrelationModel { alpha: 0.7, tau_c: 100.0 },
            seed,
        };
        let times = generate_stream(&cfg).unwrap();
        prop_assume!(times.len() >= 2);
        let g2 = empirical_g2(&times, 50.0, 1_000.0).unwrap();
        let mut brute = vec![0u64; g2.counts.len()];
        for (i, &a) in times.iter().enumerate() {
            for &b in &times[i + 1..] {
                let lag = b - a;
                if lag < 1_000.0 {
                    brute[(lag / 50.0) as usize] += 1;
                }
            }
        }
        prop_assert_eq!(&g2.counts, &brute);
    }
}

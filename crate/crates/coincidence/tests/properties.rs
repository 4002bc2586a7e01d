//! Property tests pitting the analysis chain against brute-force oracles.

use coincidence::{
    clean_events, delay_histogram, histogram::delay_histogram_threaded, normalize,
    read_histogram_csv, windowed_sums, write_histogram_csv, AnalysisConfig,
};
use proptest::prelude::*;
use timetag_core::{ClockConfig, Event};

fn ns_clock() -> ClockConfig {
    ClockConfig::from_frequency(1_000_000_000).unwrap()
}

fn test_config() -> AnalysisConfig {
    AnalysisConfig {
        group1: vec![0, 1],
        group2: vec![2, 3],
        ..AnalysisConfig::default()
    }
}

/// O(n^2) veto: any outside event within delta_s on either side.
fn oracle_vetoed(events: &[(u64, u16)], i: usize, outside: impl Fn(u16) -> bool, ds: u64) -> bool {
    let t = events[i].0;
    events
        .iter()
        .enumerate()
        .any(|(j, &(u, p))| j != i && outside(p) && t.abs_diff(u) <= ds)
}

/// Chain dedup by direct scan: keep an event iff it is more than delta_s
/// after the previously kept-or-absorbed event of the same group.
fn oracle_dedup(times: &[u64], ds: u64) -> Vec<u64> {
    let mut kept = Vec::new();
    let mut last: Option<u64> = None;
    for &t in times {
        match last {
            Some(prev) if t - prev <= ds => last = Some(t),
            _ => {
                kept.push(t);
                last = Some(t);
            }
        }
    }
    kept
}

fn sorted_events(max_pixel: u16, n: usize) -> impl Strategy<Value = Vec<Event>> {
    prop::collection::vec((0u64..5_000, 0..=max_pixel), 0..n).prop_map(|mut v| {
        v.sort_unstable();
        v.into_iter().map(|(t, p)| Event::new(t, p)).collect()
    })
}

proptest! {
    #[test]
    fn cleaning_matches_quadratic_oracle(events in sorted_events(5, 60)) {
        let cfg = test_config();
        let clock = ns_clock();
        let out = clean_events(&events, &cfg, &clock).unwrap();

        let pairs: Vec<(u64, u16)> = events.iter().map(|e| (e.tick, e.pixel)).collect();
        let outside = |p: u16| !cfg.group1.contains(&p) && !cfg.group2.contains(&p);
        let survive = |group: &[u16]| -> Vec<u64> {
            let kept: Vec<u64> = pairs
                .iter()
                .enumerate()
                .filter(|(i, (_, p))| {
                    group.contains(p) && !oracle_vetoed(&pairs, *i, outside, cfg.delta_s_ns)
                })
                .map(|(_, (t, _))| *t)
                .collect();
            oracle_dedup(&kept, cfg.delta_s_ns)
        };

        let d1: Vec<u64> = out.d1.iter().map(|t| t.t_ns).collect();
        let d2: Vec<u64> = out.d2.iter().map(|t| t.t_ns).collect();
        prop_assert_eq!(d1, survive(&cfg.group1));
        prop_assert_eq!(d2, survive(&cfg.group2));
    }

    #[test]
    fn cleaning_is_idempotent(events in sorted_events(5, 60)) {
        let cfg = test_config();
        let clock = ns_clock();
        let once = clean_events(&events, &cfg, &clock).unwrap();
        let mut rebuilt: Vec<Event> = once
            .d1
            .iter()
            .chain(once.d2.iter())
            .map(|t| Event::new(t.t_ns, t.pixel))
            .collect();
        rebuilt.sort_by_key(|e| e.key());
        let twice = clean_events(&rebuilt, &cfg, &clock).unwrap();
        prop_assert_eq!(&once.d1, &twice.d1);
        prop_assert_eq!(&once.d2, &twice.d2);
        prop_assert_eq!(twice.stats.n_vetoed1 + twice.stats.n_vetoed2, 0);
        prop_assert_eq!(twice.stats.n_collapsed1 + twice.stats.n_collapsed2, 0);
    }

    #[test]
    fn histogram_counts_every_qualifying_pair(
        mut d1 in prop::collection::vec(0u64..3_000, 0..80),
        mut d2 in prop::collection::vec(0u64..3_000, 0..80),
        threads in 1usize..5,
    ) {
        d1.sort_unstable();
        d2.sort_unstable();
        let (w, n) = (25u64, 40usize);
        let span = w * n as u64;
        let mut oracle = vec![0u64; n];
        for &a in &d1 {
            for &b in &d2 {
                if b >= a && b - a < span {
                    oracle[((b - a) / w) as usize] += 1;
                }
            }
        }
        prop_assert_eq!(&delay_histogram(&d1, &d2, w, n), &oracle);
        prop_assert_eq!(&delay_histogram_threaded(&d1, &d2, w, n, threads), &oracle);
    }

    #[test]
    fn windowed_sums_match_naive(raw in prop::collection::vec(0u64..50, 1..60), m in 1usize..12) {
        prop_assume!(m <= raw.len());
        let fast = windowed_sums(&raw, m).unwrap();
        let naive: Vec<u64> = (0..=raw.len() - m)
            .map(|j| raw[j..j + m].iter().sum())
            .collect();
        prop_assert_eq!(fast, naive);
    }

    #[test]
    fn normalization_scales_but_preserves_shape(
        sums in prop::collection::vec(1u64..500, 12..40),
        m in 1usize..16,
    ) {
        let region = sums.len() - 6..sums.len();
        let out = normalize(&sums, m, region.clone()).unwrap();
        // Mean of c over the region is exactly 1 by construction.
        let mean: f64 = out.c[region].iter().sum::<f64>() / 6.0;
        prop_assert!((mean - 1.0).abs() < 1e-9);
        // Ratios between points equal ratios of the raw sums.
        for j in 1..sums.len() {
            let expect = sums[j] as f64 / sums[0] as f64;
            prop_assert!((out.c[j] / out.c[0] - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn csv_round_trips_exactly(
        c in prop::collection::vec(0.0f64..4.0, 3..30),
        seed in 0u64..1_000,
    ) {
        let n = c.len();
        let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        let hist = coincidence::DelayHistogram {
            bin_width_ns: 25,
            delta_ns: 400,
            max_lag_ns: 25 * (n as u64 - 1),
            norm_region_ns: (0, 75),
            lag_ns: (0..n).map(|j| (25 * j) as f64).collect(),
            raw_counts: (0..n).map(|_| next() % 1000).collect(),
            window_sums: vec![1; n],
            err: c.iter().map(|&x| (x + 0.01) / 7.0).collect(),
            c_norm: c,
            plateau: 3.5,
            n_start: 5,
            n_stop: 9,
            clean_stats: Default::default(),
        };
        let mut buf = Vec::new();
        write_histogram_csv(&mut buf, &hist).unwrap();
        let back = read_histogram_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.lag_ns, hist.lag_ns);
        prop_assert_eq!(back.counts, hist.raw_counts);
        prop_assert_eq!(back.c_norm, hist.c_norm);
        prop_assert_eq!(back.err, hist.err);
    }
}

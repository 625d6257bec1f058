use std::collections::{BTreeMap, BTreeSet};

use chrono::{Duration, NaiveDate};
use moasscope::ingest::SnapshotKey;
use moasscope::lifetime::{kneedle_knee, lifetime_cdf, trim_saturated, KneeConfig, KneeError, LifetimeResult, Longevity};
use moasscope::moas::{MoasObservation, MoasTimeline};
use moasscope::IpPrefix;
use proptest::prelude::*;

fn day(n: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(2022, 6, 1).unwrap() + Duration::days(n as i64 - 1)
}

fn timeline(days: &BTreeSet<u32>) -> MoasTimeline {
    let prefix: IpPrefix = "20.0.0.0/24".parse().unwrap();
    let obs = |d: u32| MoasObservation {
        prefix,
        snapshot: SnapshotKey::new(day(d), 0),
        origin_set: vec![10000, 10001],
        visibility: BTreeMap::from([(10000, 1), (10001, 1)]),
    };
    MoasTimeline { prefix, window: (day(1), day(400)), days: days.iter().map(|d| (day(*d), obs(*d))).collect() }
}

/// Longest run after filling every interior gap of at most `s` days, on a
/// plain boolean calendar.
fn bitmap_max_lifetime(days: &BTreeSet<u32>, s: u32) -> u32 {
    let last = *days.iter().max().unwrap() as usize;
    let mut cal = vec![false; last + 2];
    for d in days {
        cal[*d as usize] = true;
    }
    let mut filled = cal.clone();
    let mut i = 1;
    while i <= last {
        if !cal[i] {
            let start = i;
            while !cal[i] {
                i += 1;
            }
            let interior = start > 1 && cal[..start].iter().any(|b| *b);
            if interior && (i - start) as u32 <= s {
                filled[start..i].iter_mut().for_each(|b| *b = true);
            }
        } else {
            i += 1;
        }
    }
    let (mut best, mut run) = (0, 0);
    for b in filled {
        run = if b { run + 1 } else { 0 };
        best = best.max(run);
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn max_lifetime_grows_with_sensitivity(days in prop::collection::btree_set(1u32..=365, 1..120)) {
        let tl = timeline(&days);
        let m: Vec<u32> = [0, 1, 3].iter().map(|s| LifetimeResult::compute(&tl, *s, 30).unwrap().max_lifetime_days).collect();
        prop_assert!(m[0] <= m[1] && m[1] <= m[2], "{:?}", m);
        for (s, got) in [0, 1, 3].iter().zip(&m) {
            prop_assert_eq!(*got, bitmap_max_lifetime(&days, *s));
        }
    }

    #[test]
    fn observability_is_a_fraction_of_the_span(days in prop::collection::btree_set(1u32..=365, 1..120)) {
        let r = LifetimeResult::compute(&timeline(&days), 1, 30).unwrap();
        let (first, last) = (*days.iter().next().unwrap(), *days.iter().next_back().unwrap());
        prop_assert_eq!(r.observability, days.len() as f64 / (last - first + 1) as f64);
        prop_assert_eq!(r.observed_days as usize, days.len());
    }
}

#[test]
fn single_day_is_fully_observed() {
    let r = LifetimeResult::compute(&timeline(&BTreeSet::from([17])), 0, 30).unwrap();
    assert_eq!(r.observability, 1.0);
    assert_eq!(r.max_lifetime_days, 1);
    assert_eq!(r.longevity, Longevity::ShortLived);
}

#[test]
fn one_missing_day_in_twenty() {
    let days: BTreeSet<u32> = (1..=10).chain(12..=20).collect();
    let tl = timeline(&days);
    assert_eq!(LifetimeResult::compute(&tl, 0, 30).unwrap().observability, 0.95);
    assert_eq!(LifetimeResult::compute(&tl, 0, 30).unwrap().max_lifetime_days, 10);
    assert_eq!(LifetimeResult::compute(&tl, 1, 30).unwrap().max_lifetime_days, 20);
}

#[test]
fn threshold_is_inclusive() {
    let days: BTreeSet<u32> = (1..=30).collect();
    assert_eq!(LifetimeResult::compute(&timeline(&days), 0, 30).unwrap().longevity, Longevity::LongLived);
    let days: BTreeSet<u32> = (1..=29).collect();
    assert_eq!(LifetimeResult::compute(&timeline(&days), 0, 30).unwrap().longevity, Longevity::ShortLived);
}

/// Chord-difference argmax on min-max normalized coordinates.
fn chord_argmax(curve: &[(f64, f64)]) -> f64 {
    let (x0, x1) = (curve[0].0, curve[curve.len() - 1].0);
    let (y0, y1) = (curve[0].1, curve[curve.len() - 1].1);
    let mut best = (f64::MIN, curve[0].0);
    for &(x, y) in curve {
        let d = (y - y0) / (y1 - y0) - (x - x0) / (x1 - x0);
        if d > best.0 {
            best = (d, x);
        }
    }
    best.1
}

#[test]
fn sqrt_curve_knee() {
    let curve: Vec<(f64, f64)> = (0..=100).map(|i| i as f64 / 100.0).map(|x| (x, x.sqrt())).collect();
    let k = kneedle_knee(&curve, &KneeConfig::default()).unwrap();
    assert!((k - 0.25).abs() <= 0.01 + 1e-12, "{k}");
    assert!((k - chord_argmax(&curve)).abs() <= 0.01 + 1e-12);
}

#[test]
fn straight_line_has_no_knee() {
    let curve: Vec<(f64, f64)> = (0..=100).map(|i| (i as f64, i as f64)).collect();
    assert_eq!(kneedle_knee(&curve, &KneeConfig::default()), Err(KneeError::NoKnee));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn two_population_knee_tracks_the_oracle(
        (short, long) in (20usize..=40).prop_flat_map(|n| (
            prop::collection::vec(1u32..=5, 4 * n),
            prop::collection::vec(60u32..=365, n),
        )),
    ) {
        let mut all = short.clone();
        all.extend(&long);
        let cdf = lifetime_cdf(&all, 365).unwrap();
        let curve = trim_saturated(&cdf);
        let k = kneedle_knee(curve, &KneeConfig::default()).unwrap();
        // oracle curve built independently: y = share of lifetimes <= x
        let n = all.len() as f64;
        let mut raw: Vec<(f64, f64)> = Vec::new();
        for x in 1..=365u32 {
            let y = all.iter().filter(|l| **l <= x).count() as f64 / n;
            raw.push((x as f64, y));
            if y == 1.0 {
                break;
            }
        }
        prop_assert!((k - chord_argmax(&raw)).abs() <= 2.0, "knee {} oracle {}", k, chord_argmax(&raw));
    }
}

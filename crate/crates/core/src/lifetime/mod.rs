//! Gap-tolerant lifetimes, observability and longevity classes.

mod kneedle;

pub use kneedle::{brute_force_knee, kneedle_knee, KneeConfig, KneeError};

use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::moas::MoasTimeline;
use crate::prefix::{Family, IpPrefix};

pub const DEFAULT_THRESHOLD_DAYS: u32 = 30;
pub const DEFAULT_SENSITIVITY: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LifetimeError {
    #[error("timeline has no MOAS days")]
    EmptyTimeline,
    #[error("no lifetimes to build a distribution from")]
    EmptyInput,
    #[error("cap must be at least 2 days, got {0}")]
    BadCap(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Longevity {
    ShortLived,
    LongLived,
}

impl Longevity {
    pub fn as_str(self) -> &'static str {
        match self {
            Longevity::ShortLived => "short",
            Longevity::LongLived => "long",
        }
    }
}

impl fmt::Display for Longevity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Longevity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "short" => Ok(Longevity::ShortLived),
            "long" => Ok(Longevity::LongLived),
            _ => Err(format!("unknown longevity {s:?}")),
        }
    }
}

pub fn classify_longevity(max_lifetime_days: u32, threshold_days: u32) -> Longevity {
    if max_lifetime_days >= threshold_days {
        Longevity::LongLived
    } else {
        Longevity::ShortLived
    }
}

/// Merges sorted, distinct day numbers into closed intervals, bridging runs
/// of at most `s` missing days.
pub fn gap_segments(days: &[i64], s: u32) -> Vec<(i64, i64)> {
    let mut out: Vec<(i64, i64)> = Vec::new();
    for &d in days {
        match out.last_mut() {
            Some((_, last)) if d - *last - 1 <= s as i64 => *last = d,
            _ => out.push((d, d)),
        }
    }
    out
}

fn span(seg: (i64, i64)) -> u32 {
    (seg.1 - seg.0 + 1) as u32
}

fn day_numbers(timeline: &MoasTimeline) -> Vec<i64> {
    timeline.days.keys().map(|d| d.num_days_from_ce() as i64).collect()
}

fn from_day_number(n: i64) -> NaiveDate {
    NaiveDate::from_num_days_from_ce_opt(n as i32).expect("day number came from a valid date")
}

pub fn segments(timeline: &MoasTimeline, s: u32) -> Result<Vec<(NaiveDate, NaiveDate)>, LifetimeError> {
    let days = day_numbers(timeline);
    if days.is_empty() {
        return Err(LifetimeError::EmptyTimeline);
    }
    Ok(gap_segments(&days, s).into_iter().map(|(a, b)| (from_day_number(a), from_day_number(b))).collect())
}

pub fn max_lifetime(timeline: &MoasTimeline, s: u32) -> Result<u32, LifetimeError> {
    let days = day_numbers(timeline);
    gap_segments(&days, s).into_iter().map(span).max().ok_or(LifetimeError::EmptyTimeline)
}

/// Observed MOAS days over the first-to-last span.
pub fn observability(timeline: &MoasTimeline) -> Result<f64, LifetimeError> {
    match (timeline.first_day(), timeline.last_day()) {
        (Some(first), Some(last)) => {
            let span = (last - first).num_days() + 1;
            Ok(timeline.days.len() as f64 / span as f64)
        }
        _ => Err(LifetimeError::EmptyTimeline),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifetimeResult {
    pub prefix: IpPrefix,
    pub first_day: NaiveDate,
    pub last_day: NaiveDate,
    pub segments: Vec<(NaiveDate, NaiveDate)>,
    pub observed_days: u32,
    pub max_lifetime_days: u32,
    pub observability: f64,
    pub longevity: Longevity,
}

impl LifetimeResult {
    pub fn compute(timeline: &MoasTimeline, s: u32, threshold_days: u32) -> Result<Self, LifetimeError> {
        let segments = segments(timeline, s)?;
        let max_lifetime_days = segments
            .iter()
            .map(|(a, b)| (*b - *a).num_days() as u32 + 1)
            .max()
            .expect("segments non-empty");
        Ok(LifetimeResult {
            prefix: timeline.prefix,
            first_day: segments[0].0,
            last_day: segments[segments.len() - 1].1,
            observed_days: timeline.days.len() as u32,
            max_lifetime_days,
            observability: observability(timeline)?,
            longevity: classify_longevity(max_lifetime_days, threshold_days),
            segments,
        })
    }

    pub fn family(&self) -> Family {
        self.prefix.family()
    }
}

/// `(x, y)` for x = 1..=cap, y = fraction of lifetimes (capped at `cap`)
/// that are ≤ x.
pub fn lifetime_cdf(lifetimes: &[u32], cap_days: u32) -> Result<Vec<(f64, f64)>, LifetimeError> {
    if cap_days < 2 {
        return Err(LifetimeError::BadCap(cap_days));
    }
    if lifetimes.is_empty() {
        return Err(LifetimeError::EmptyInput);
    }
    let mut counts = vec![0u64; cap_days as usize + 1];
    for &l in lifetimes {
        counts[l.clamp(1, cap_days) as usize] += 1;
    }
    let n = lifetimes.len() as f64;
    let mut acc = 0u64;
    Ok((1..=cap_days as usize)
        .map(|x| {
            acc += counts[x];
            (x as f64, acc as f64 / n)
        })
        .collect())
}

/// Leading part of a CDF up to and including the first point where it
/// reaches 1. The saturated tail carries no shape information and would
/// otherwise drag the chord.
pub fn trim_saturated(curve: &[(f64, f64)]) -> &[(f64, f64)] {
    match curve.iter().position(|&(_, y)| y >= 1.0) {
        Some(i) => &curve[..=i],
        None => curve,
    }
}

//! Pinning dump timestamps to nominal snapshot slots.

use std::fmt;

use chrono::{DateTime, Duration, NaiveDate, NaiveTime, Utc};
use serde::{Deserialize, Serialize};

/// A calendar day and the index of the intra-day dump within it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SnapshotKey {
    pub date: NaiveDate,
    pub slot: u8,
}

impl SnapshotKey {
    pub fn new(date: NaiveDate, slot: u8) -> Self {
        SnapshotKey { date, slot }
    }
}

impl fmt::Display for SnapshotKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.date.format("%Y-%m-%d"), self.slot)
    }
}

/// Nominal dump times (one slot each) and the accepted deviation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotConfig {
    pub nominal: Vec<NaiveTime>,
    pub tolerance: Duration,
}

impl Default for SlotConfig {
    fn default() -> Self {
        SlotConfig { nominal: vec![NaiveTime::from_hms_opt(8, 0, 0).unwrap()], tolerance: Duration::minutes(30) }
    }
}

impl SlotConfig {
    /// `n` slots per day. One slot is the 08:00 dump; three slots are the
    /// 00:00/08:00/16:00 dumps shared by both collector projects. Other
    /// counts spread evenly from midnight.
    pub fn with_slots(n: u8) -> Self {
        let nominal = match n {
            0 | 1 => return SlotConfig::default(),
            3 => vec![0, 8, 16].into_iter().map(|h| NaiveTime::from_hms_opt(h, 0, 0).unwrap()).collect(),
            n => (0..n as u32)
                .map(|i| {
                    let secs = i * 86_400 / n as u32;
                    NaiveTime::from_num_seconds_from_midnight_opt(secs, 0).unwrap()
                })
                .collect(),
        };
        SlotConfig { nominal, ..SlotConfig::default() }
    }

    pub fn slots_per_day(&self) -> u8 {
        self.nominal.len() as u8
    }
}

/// Assigns `ts` to the nearest nominal slot within tolerance. Candidates on
/// the neighbouring days are considered so that a late-evening dump can be
/// pinned to a midnight slot. Ties go to the earlier slot.
pub fn align_snapshot(ts: DateTime<Utc>, config: &SlotConfig) -> Option<SnapshotKey> {
    let day = ts.date_naive();
    let mut best: Option<(Duration, SnapshotKey)> = None;
    for date in [day.pred_opt(), Some(day), day.succ_opt()].into_iter().flatten() {
        for (slot, time) in config.nominal.iter().enumerate() {
            let nominal = date.and_time(*time).and_utc();
            let delta = (ts - nominal).abs();
            if delta > config.tolerance {
                continue;
            }
            let key = SnapshotKey::new(date, slot as u8);
            if best.as_ref().is_none_or(|(d, k)| delta < *d || (delta == *d && key < *k)) {
                best = Some((delta, key));
            }
        }
    }
    best.map(|(_, k)| k)
}

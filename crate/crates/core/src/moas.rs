//! Per-snapshot origin aggregation, MOAS selection, and per-prefix timelines.

use std::collections::{BTreeMap, BTreeSet};
use std::net::IpAddr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::ingest::{Asn, RibRecord, SnapshotKey};
use crate::prefix::{Family, IpPrefix};

/// One collector session: the same AS peering with two collectors counts
/// twice.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PeerId {
    pub collector: String,
    pub peer_ip: IpAddr,
    pub peer_asn: Asn,
}

impl PeerId {
    pub fn of(rec: &RibRecord) -> Self {
        PeerId { collector: rec.collector.clone(), peer_ip: rec.peer_ip, peer_asn: rec.peer_asn }
    }
}

/// Which peers saw which origin for one exact prefix in one snapshot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OriginView {
    pub prefix: IpPrefix,
    pub snapshot: SnapshotKey,
    pub origins: BTreeMap<Asn, BTreeSet<PeerId>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoasObservation {
    pub prefix: IpPrefix,
    pub snapshot: SnapshotKey,
    /// Sorted, at least two entries.
    pub origin_set: Vec<Asn>,
    /// Distinct peers per origin.
    pub visibility: BTreeMap<Asn, u32>,
}

impl MoasObservation {
    pub fn family(&self) -> Family {
        self.prefix.family()
    }

    pub fn origin_count(&self) -> usize {
        self.origin_set.len()
    }
}

/// Prefix and MOAS counts for one snapshot, per family.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotCounts {
    pub v4_prefixes: u64,
    pub v6_prefixes: u64,
    pub v4_moas: u64,
    pub v6_moas: u64,
    pub peers: u64,
}

impl SnapshotCounts {
    pub fn prefixes(&self, family: Family) -> u64 {
        match family {
            Family::V4 => self.v4_prefixes,
            Family::V6 => self.v6_prefixes,
        }
    }

    pub fn moas(&self, family: Family) -> u64 {
        match family {
            Family::V4 => self.v4_moas,
            Family::V6 => self.v6_moas,
        }
    }
}

/// Groups kept records of one snapshot by exact prefix.
pub fn build_origin_views<'a>(
    snapshot: SnapshotKey,
    records: impl IntoIterator<Item = &'a RibRecord>,
) -> BTreeMap<IpPrefix, OriginView> {
    let mut views: BTreeMap<IpPrefix, OriginView> = BTreeMap::new();
    for rec in records {
        let prefix = rec.prefix.canonical();
        views
            .entry(prefix)
            .or_insert_with(|| OriginView { prefix, snapshot, origins: BTreeMap::new() })
            .origins
            .entry(rec.origin_asn)
            .or_default()
            .insert(PeerId::of(rec));
    }
    views
}

/// Views announced by two or more origins, in prefix order.
pub fn detect_moas<'a>(views: impl IntoIterator<Item = &'a OriginView>) -> Vec<MoasObservation> {
    views
        .into_iter()
        .filter(|v| v.origins.len() >= 2)
        .map(|v| MoasObservation {
            prefix: v.prefix,
            snapshot: v.snapshot,
            origin_set: v.origins.keys().copied().collect(),
            visibility: v.origins.iter().map(|(asn, peers)| (*asn, peers.len() as u32)).collect(),
        })
        .collect()
}

pub fn snapshot_counts(views: &BTreeMap<IpPrefix, OriginView>, records: &[RibRecord]) -> SnapshotCounts {
    let mut c = SnapshotCounts::default();
    for v in views.values() {
        let moas = v.origins.len() >= 2;
        match v.prefix.family() {
            Family::V4 => {
                c.v4_prefixes += 1;
                c.v4_moas += moas as u64;
            }
            Family::V6 => {
                c.v6_prefixes += 1;
                c.v6_moas += moas as u64;
            }
        }
    }
    c.peers = records.iter().map(PeerId::of).collect::<BTreeSet<_>>().len() as u64;
    c
}

/// Day-indexed MOAS history of one prefix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MoasTimeline {
    pub prefix: IpPrefix,
    pub window: (NaiveDate, NaiveDate),
    /// Days on which the prefix was MOAS in at least one slot; the kept
    /// observation is the one from the earliest such slot.
    pub days: BTreeMap<NaiveDate, MoasObservation>,
}

impl MoasTimeline {
    pub fn family(&self) -> Family {
        self.prefix.family()
    }

    pub fn first_day(&self) -> Option<NaiveDate> {
        self.days.keys().next().copied()
    }

    pub fn last_day(&self) -> Option<NaiveDate> {
        self.days.keys().next_back().copied()
    }
}

/// Collapses observations to the day level and groups them per prefix.
/// Observations dated outside `window` are ignored.
pub fn build_timelines(
    observations: impl IntoIterator<Item = MoasObservation>,
    window: (NaiveDate, NaiveDate),
) -> BTreeMap<IpPrefix, MoasTimeline> {
    let mut out: BTreeMap<IpPrefix, MoasTimeline> = BTreeMap::new();
    for obs in observations {
        let day = obs.snapshot.date;
        if day < window.0 || day > window.1 {
            continue;
        }
        let tl = out
            .entry(obs.prefix)
            .or_insert_with(|| MoasTimeline { prefix: obs.prefix, window, days: BTreeMap::new() });
        match tl.days.get(&day) {
            Some(existing) if existing.snapshot.slot <= obs.snapshot.slot => {}
            _ => {
                tl.days.insert(day, obs);
            }
        }
    }
    out
}

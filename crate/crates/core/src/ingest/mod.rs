//! Decoding of RIB snapshots into [`RibRecord`]s.
//!
//! Two sources are supported: binary MRT `TABLE_DUMP_V2` dumps as published
//! by route collector projects, and a line-oriented JSON format used for
//! interchange and synthetic data. Both produce the same record semantics:
//! the origin is the last AS of the final path segment, routes ending in an
//! AS set are dropped and counted, and malformed entries are counted and
//! skipped.

mod mrt;
mod normalized;
mod snapshot;

use std::fmt;
use std::net::IpAddr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::prefix::IpPrefix;

pub use mrt::{parse_mrt_rib, MrtError};
pub use normalized::{parse_normalized, render_normalized, to_normalized_line, NormalizedError};
pub use snapshot::{align_snapshot, SlotConfig, SnapshotKey};

pub type Asn = u32;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Segment {
    Sequence(Vec<Asn>),
    Set(Vec<Asn>),
}

/// An AS path. Adjacent sequence segments are merged and empty segments
/// dropped on construction, so equal paths have equal representations.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct AsPath(Vec<Segment>);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OriginError {
    EmptyPath,
    AsSetOrigin,
}

impl AsPath {
    pub fn new(segments: impl IntoIterator<Item = Segment>) -> Self {
        let mut out: Vec<Segment> = Vec::new();
        for seg in segments {
            match seg {
                Segment::Sequence(v) if v.is_empty() => {}
                Segment::Set(v) if v.is_empty() => {}
                Segment::Sequence(v) => match out.last_mut() {
                    Some(Segment::Sequence(prev)) => prev.extend(v),
                    _ => out.push(Segment::Sequence(v)),
                },
                set => out.push(set),
            }
        }
        AsPath(out)
    }

    pub fn from_sequence(asns: impl IntoIterator<Item = Asn>) -> Self {
        AsPath::new([Segment::Sequence(asns.into_iter().collect())])
    }

    pub fn segments(&self) -> &[Segment] {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Last AS of the final segment, which must be a sequence.
    pub fn origin(&self) -> Result<Asn, OriginError> {
        match self.0.last() {
            None => Err(OriginError::EmptyPath),
            Some(Segment::Set(_)) => Err(OriginError::AsSetOrigin),
            Some(Segment::Sequence(v)) => v.last().copied().ok_or(OriginError::EmptyPath),
        }
    }
}

impl fmt::Display for AsPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for seg in &self.0 {
            if !first {
                f.write_str(" ")?;
            }
            first = false;
            match seg {
                Segment::Sequence(v) => {
                    let parts: Vec<String> = v.iter().map(|a| a.to_string()).collect();
                    f.write_str(&parts.join(" "))?;
                }
                Segment::Set(v) => {
                    let parts: Vec<String> = v.iter().map(|a| a.to_string()).collect();
                    write!(f, "{{{}}}", parts.join(","))?;
                }
            }
        }
        Ok(())
    }
}

/// One RIB entry as seen by one collector peer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RibRecord {
    pub snapshot_ts: DateTime<Utc>,
    pub collector: String,
    pub peer_asn: Asn,
    pub peer_ip: IpAddr,
    pub prefix: IpPrefix,
    pub as_path: AsPath,
    pub origin_asn: Asn,
}

impl RibRecord {
    /// Builds a record, deriving the origin from the path.
    pub fn new(
        snapshot_ts: DateTime<Utc>,
        collector: impl Into<String>,
        peer_asn: Asn,
        peer_ip: IpAddr,
        prefix: IpPrefix,
        as_path: AsPath,
    ) -> Result<Self, OriginError> {
        let origin_asn = as_path.origin()?;
        Ok(RibRecord { snapshot_ts, collector: collector.into(), peer_asn, peer_ip, prefix, as_path, origin_asn })
    }
}

/// A per-line (or per-entry) decode problem kept for diagnostics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryError {
    /// 1-based line number for text input, byte offset for MRT.
    pub location: u64,
    pub message: String,
}

/// Per-file decode accounting: `total = emitted + as_set_origins + malformed`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub total: u64,
    pub emitted: u64,
    pub as_set_origins: u64,
    pub malformed: u64,
    /// First few malformed entries, for diagnostics.
    pub errors: Vec<EntryError>,
}

const MAX_KEPT_ERRORS: usize = 32;

impl IngestStats {
    fn record_malformed(&mut self, location: u64, message: impl Into<String>) {
        self.total += 1;
        self.malformed += 1;
        if self.errors.len() < MAX_KEPT_ERRORS {
            self.errors.push(EntryError { location, message: message.into() });
        }
    }

    fn record_as_set(&mut self) {
        self.total += 1;
        self.as_set_origins += 1;
    }

    fn record_emitted(&mut self) {
        self.total += 1;
        self.emitted += 1;
    }

    pub fn merge(&mut self, other: &IngestStats) {
        self.total += other.total;
        self.emitted += other.emitted;
        self.as_set_origins += other.as_set_origins;
        self.malformed += other.malformed;
        for e in &other.errors {
            if self.errors.len() < MAX_KEPT_ERRORS {
                self.errors.push(e.clone());
            }
        }
    }
}

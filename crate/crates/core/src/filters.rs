//! Removal of route artifacts ahead of MOAS detection.
//!
//! A record is dropped when its prefix is the default route, carries host
//! bits beyond its length, lies in multicast space or in a special-purpose
//! block, or when its origin AS is reserved. Prefix rules are checked first,
//! in that order, and the first match names the verdict.
//!
//! Special-purpose prefixes and reserved AS ranges come from a dated table
//! file (see `data/`); multicast space and the default route are protocol
//! constants.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ingest::{Asn, RibRecord};
use crate::prefix::{Family, IpPrefix};
use crate::trie::PrefixTrie;

pub const BUILTIN_TABLE: &str = include_str!("../data/bogons-2023-01.txt");

const MULTICAST_V4: &str = "224.0.0.0/4";
const MULTICAST_V6: &str = "ff00::/8";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FilterKind {
    Pass,
    ReservedAsn,
    SpecialPurposePrefix,
    DefaultRoute,
    HostBitsSet,
    Multicast,
}

impl FilterKind {
    pub const DROPS: [FilterKind; 5] = [
        FilterKind::DefaultRoute,
        FilterKind::HostBitsSet,
        FilterKind::Multicast,
        FilterKind::SpecialPurposePrefix,
        FilterKind::ReservedAsn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FilterKind::Pass => "Pass",
            FilterKind::ReservedAsn => "ReservedAsn",
            FilterKind::SpecialPurposePrefix => "SpecialPurposePrefix",
            FilterKind::DefaultRoute => "DefaultRoute",
            FilterKind::HostBitsSet => "HostBitsSet",
            FilterKind::Multicast => "Multicast",
        }
    }
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterVerdict {
    pub kind: FilterKind,
    /// The matched table row; empty for `Pass`.
    pub rule_id: String,
}

impl FilterVerdict {
    fn pass() -> Self {
        FilterVerdict { kind: FilterKind::Pass, rule_id: String::new() }
    }

    fn new(kind: FilterKind, rule_id: impl Into<String>) -> Self {
        FilterVerdict { kind, rule_id: rule_id.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct AsnRange {
    pub lo: Asn,
    pub hi: Asn,
}

impl AsnRange {
    pub fn rule_id(&self) -> String {
        if self.lo == self.hi {
            format!("asn {}", self.lo)
        } else {
            format!("asn {}-{}", self.lo, self.hi)
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BogonError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: ASN range {new_lo}-{new_hi} overlaps {lo}-{hi}")]
    Overlap { line: usize, lo: Asn, hi: Asn, new_lo: Asn, new_hi: Asn },
    #[error("reading bogon table: {0}")]
    Io(#[from] std::io::Error),
}

/// Reserved AS ranges and special-purpose prefixes.
#[derive(Debug, Clone)]
pub struct BogonTables {
    pub version: Option<String>,
    /// Sorted, non-overlapping.
    pub asn_ranges: Vec<AsnRange>,
    pub v4_prefixes: Vec<IpPrefix>,
    pub v6_prefixes: Vec<IpPrefix>,
    index: PrefixTrie<()>,
    multicast: [IpPrefix; 2],
}

impl BogonTables {
    /// The table shipped with the crate.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_TABLE).expect("builtin bogon table parses")
    }

    pub fn load(path: &Path) -> Result<Self, BogonError> {
        Self::parse(&crate::io::read_to_string(path)?)
    }

    /// Parses `asn <lo> <hi>` / `v4 <prefix>` / `v6 <prefix>` lines. A
    /// `# version: <tag>` comment names the snapshot.
    pub fn parse(text: &str) -> Result<Self, BogonError> {
        let mut version = None;
        let mut ranges: Vec<(usize, AsnRange)> = Vec::new();
        let mut v4 = Vec::new();
        let mut v6 = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let syntax = |message: String| BogonError::Syntax { line, message };
            let trimmed = raw.trim();
            if let Some(comment) = trimmed.strip_prefix('#') {
                if let Some(v) = comment.trim().strip_prefix("version:") {
                    version = Some(v.trim().to_string());
                }
                continue;
            }
            let content = trimmed.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split_whitespace().collect();
            match fields.as_slice() {
                ["asn", lo, hi] => {
                    let lo: Asn = lo.parse().map_err(|_| syntax(format!("bad ASN {lo:?}")))?;
                    let hi: Asn = hi.parse().map_err(|_| syntax(format!("bad ASN {hi:?}")))?;
                    if lo > hi {
                        return Err(syntax(format!("empty range {lo}-{hi}")));
                    }
                    ranges.push((line, AsnRange { lo, hi }));
                }
                [fam @ ("v4" | "v6"), prefix] => {
                    let p: IpPrefix = prefix.parse().map_err(|e| syntax(format!("{e}")))?;
                    let want = if *fam == "v4" { Family::V4 } else { Family::V6 };
                    if p.family() != want {
                        return Err(syntax(format!("{prefix} is not an {fam} prefix")));
                    }
                    if p.raw_host_bits() {
                        return Err(syntax(format!("{prefix} has host bits set")));
                    }
                    if want == Family::V4 { v4.push(p) } else { v6.push(p) }
                }
                _ => return Err(syntax(format!("unrecognized entry {content:?}"))),
            }
        }
        ranges.sort_by_key(|(_, r)| *r);
        for pair in ranges.windows(2) {
            let (_, a) = pair[0];
            let (line, b) = pair[1];
            if b.lo <= a.hi {
                return Err(BogonError::Overlap { line, lo: a.lo, hi: a.hi, new_lo: b.lo, new_hi: b.hi });
            }
        }
        let index = v4.iter().chain(v6.iter()).map(|p| (*p, ())).collect();
        Ok(BogonTables {
            version,
            asn_ranges: ranges.into_iter().map(|(_, r)| r).collect(),
            v4_prefixes: v4,
            v6_prefixes: v6,
            index,
            multicast: [MULTICAST_V4.parse().unwrap(), MULTICAST_V6.parse().unwrap()],
        })
    }

    pub fn reserved_range(&self, asn: Asn) -> Option<&AsnRange> {
        let i = self.asn_ranges.partition_point(|r| r.hi < asn);
        self.asn_ranges.get(i).filter(|r| r.lo <= asn)
    }
}

pub fn is_reserved_asn(asn: Asn, tables: &BogonTables) -> bool {
    tables.reserved_range(asn).is_some()
}

/// Classifies a prefix: default route, host bits, multicast, special
/// purpose, in that order.
pub fn classify_prefix(prefix: &IpPrefix, tables: &BogonTables) -> FilterVerdict {
    if prefix.is_default_route() {
        return FilterVerdict::new(FilterKind::DefaultRoute, "default-route");
    }
    if prefix.raw_host_bits() {
        return FilterVerdict::new(FilterKind::HostBitsSet, "host-bits");
    }
    if let Some(m) = tables.multicast.iter().find(|m| m.contains(prefix)) {
        return FilterVerdict::new(FilterKind::Multicast, format!("{} {m}", m.family()));
    }
    if let Some((p, _)) = tables.index.covering(prefix).next() {
        return FilterVerdict::new(FilterKind::SpecialPurposePrefix, format!("{} {p}", p.family()));
    }
    FilterVerdict::pass()
}

/// Prefix rules first, then the origin AS.
pub fn classify_record(record: &RibRecord, tables: &BogonTables) -> FilterVerdict {
    let v = classify_prefix(&record.prefix, tables);
    if v.kind != FilterKind::Pass {
        return v;
    }
    match tables.reserved_range(record.origin_asn) {
        Some(r) => FilterVerdict::new(FilterKind::ReservedAsn, r.rule_id()),
        None => FilterVerdict::pass(),
    }
}

/// Drop counts per verdict kind; `input = kept + Σ dropped`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterStats {
    pub input: u64,
    pub kept: u64,
    pub dropped: BTreeMap<FilterKind, u64>,
}

impl FilterStats {
    pub fn dropped_total(&self) -> u64 {
        self.dropped.values().sum()
    }

    pub fn count(&self, kind: FilterKind) -> u64 {
        self.dropped.get(&kind).copied().unwrap_or(0)
    }

    pub fn merge(&mut self, other: &FilterStats) {
        self.input += other.input;
        self.kept += other.kept;
        for (k, v) in &other.dropped {
            *self.dropped.entry(*k).or_default() += v;
        }
    }
}

pub fn filter_records(
    records: impl IntoIterator<Item = RibRecord>,
    tables: &BogonTables,
) -> (Vec<RibRecord>, FilterStats) {
    let mut stats = FilterStats::default();
    let mut kept = Vec::new();
    for rec in records {
        stats.input += 1;
        let v = classify_record(&rec, tables);
        if v.kind == FilterKind::Pass {
            stats.kept += 1;
            kept.push(rec);
        } else {
            *stats.dropped.entry(v.kind).or_default() += 1;
        }
    }
    (kept, stats)
}

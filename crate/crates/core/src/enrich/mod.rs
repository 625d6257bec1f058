//! Attributes attached to long-lived MOAS prefixes.

pub mod datasets;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use datasets::{AnycastList, AnycastMatch, Asdb, DatasetError, HypergiantDb, OrgDb, Rel, RelDb};

use crate::ingest::Asn;
use crate::lifetime::LifetimeResult;
use crate::moas::MoasObservation;
use crate::prefix::{Family, IpPrefix};
use crate::rpki::MoasRovClass;

pub const V4_CIDR_GROUPS: [&str; 4] = ["/8-/20", "/21-/23", "/24", "/25-/32"];
pub const V6_CIDR_GROUPS: [&str; 4] = ["/8-/31", "/32-/47", "/48", "/49-/128"];

pub fn cidr_groups(family: Family) -> &'static [&'static str; 4] {
    match family {
        Family::V4 => &V4_CIDR_GROUPS,
        Family::V6 => &V6_CIDR_GROUPS,
    }
}

/// Size class of a prefix. Lengths shorter than /8 land in the first group.
pub fn cidr_group(prefix: &IpPrefix) -> &'static str {
    let len = prefix.len();
    let groups = cidr_groups(prefix.family());
    let idx = match prefix.family() {
        Family::V4 => match len {
            0..=20 => 0,
            21..=23 => 1,
            24 => 2,
            _ => 3,
        },
        Family::V6 => match len {
            0..=31 => 0,
            32..=47 => 1,
            48 => 2,
            _ => 3,
        },
    };
    groups[idx]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VisibilityBucket {
    Below4,
    From4To9,
    From10To50,
    From51To100,
    Above100,
}

impl VisibilityBucket {
    pub const ALL: [VisibilityBucket; 5] = [
        VisibilityBucket::Below4,
        VisibilityBucket::From4To9,
        VisibilityBucket::From10To50,
        VisibilityBucket::From51To100,
        VisibilityBucket::Above100,
    ];

    pub fn of(peers: u32) -> Self {
        match peers {
            0..=3 => VisibilityBucket::Below4,
            4..=9 => VisibilityBucket::From4To9,
            10..=50 => VisibilityBucket::From10To50,
            51..=100 => VisibilityBucket::From51To100,
            _ => VisibilityBucket::Above100,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            VisibilityBucket::Below4 => "<4",
            VisibilityBucket::From4To9 => "4-9",
            VisibilityBucket::From10To50 => "10-50",
            VisibilityBucket::From51To100 => "51-100",
            VisibilityBucket::Above100 => ">100",
        }
    }
}

impl fmt::Display for VisibilityBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisibilityStats {
    pub buckets: BTreeMap<Asn, VisibilityBucket>,
    pub min: u32,
    pub max: u32,
    pub diff: u32,
}

pub fn visibility_stats(obs: &MoasObservation) -> VisibilityStats {
    let min = obs.visibility.values().copied().min().unwrap_or(0);
    let max = obs.visibility.values().copied().max().unwrap_or(0);
    VisibilityStats {
        buckets: obs.visibility.iter().map(|(a, v)| (*a, VisibilityBucket::of(*v))).collect(),
        min,
        max,
        diff: max - min,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OriginStats {
    /// origin count → number of prefixes
    pub origins_per_prefix: BTreeMap<usize, u64>,
    /// origin set → number of prefixes
    pub prefixes_per_set: BTreeMap<Vec<Asn>, u64>,
}

pub fn origin_stats<'a>(observations: impl IntoIterator<Item = &'a MoasObservation>) -> OriginStats {
    let mut out = OriginStats::default();
    for o in observations {
        *out.origins_per_prefix.entry(o.origin_set.len()).or_default() += 1;
        *out.prefixes_per_set.entry(o.origin_set.clone()).or_default() += 1;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RelClass {
    Siblings,
    C2pP2c,
    Peering,
    NoRelationDetected,
    /// More than two origins.
    NotApplicable,
}

impl RelClass {
    pub const ALL: [RelClass; 5] = [
        RelClass::Siblings,
        RelClass::C2pP2c,
        RelClass::Peering,
        RelClass::NoRelationDetected,
        RelClass::NotApplicable,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RelClass::Siblings => "siblings",
            RelClass::C2pP2c => "c2p-p2c",
            RelClass::Peering => "peering",
            RelClass::NoRelationDetected => "no-relation",
            RelClass::NotApplicable => "not-applicable",
        }
    }
}

impl fmt::Display for RelClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Relationship {
    pub class: RelClass,
    /// Siblings that also have a provider/customer or peering entry.
    pub sibling_overlap: bool,
}

pub fn classify_relationship(a: Asn, b: Asn, rels: &RelDb, orgs: &OrgDb) -> Relationship {
    let rel = rels.lookup(a, b);
    if orgs.siblings(a, b) {
        return Relationship { class: RelClass::Siblings, sibling_overlap: rel.is_some() };
    }
    let class = match rel {
        Some(Rel::ProviderCustomer) => RelClass::C2pP2c,
        Some(Rel::Peer) => RelClass::Peering,
        None => RelClass::NoRelationDetected,
    };
    Relationship { class, sibling_overlap: false }
}

/// Relationship of a MOAS origin set; only two-origin sets are classified.
pub fn classify_origin_set(origins: &[Asn], rels: &RelDb, orgs: &OrgDb) -> Relationship {
    match origins {
        [a, b] => classify_relationship(*a, *b, rels, orgs),
        _ => Relationship { class: RelClass::NotApplicable, sibling_overlap: false },
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BusinessPair {
    /// Sorted pair of layer-1 categories.
    Matched(String, String),
    MultiCategory,
    Unmatched,
    /// More than two origins.
    NotApplicable,
}

impl BusinessPair {
    pub fn status(&self) -> &'static str {
        match self {
            BusinessPair::Matched(..) => "matched",
            BusinessPair::MultiCategory => "multi-category",
            BusinessPair::Unmatched => "unmatched",
            BusinessPair::NotApplicable => "not-applicable",
        }
    }
}

/// An origin missing from the database makes the pair Unmatched even if the
/// other origin has several categories.
pub fn business_pair(a: Asn, b: Asn, asdb: &Asdb) -> BusinessPair {
    match (asdb.categories(a), asdb.categories(b)) {
        (Some(ca), Some(cb)) if ca.len() == 1 && cb.len() == 1 => {
            let x = ca.iter().next().expect("one category").clone();
            let y = cb.iter().next().expect("one category").clone();
            if x <= y {
                BusinessPair::Matched(x, y)
            } else {
                BusinessPair::Matched(y, x)
            }
        }
        (Some(_), Some(_)) => BusinessPair::MultiCategory,
        _ => BusinessPair::Unmatched,
    }
}

pub fn business_for_origins(origins: &[Asn], asdb: &Asdb) -> BusinessPair {
    match origins {
        [a, b] => business_pair(*a, *b, asdb),
        _ => BusinessPair::NotApplicable,
    }
}

/// One long-lived MOAS prefix on one analysis day. `None` marks an attribute
/// whose input dataset was unavailable.
#[derive(Debug, Clone, PartialEq)]
pub struct MoasProfile {
    pub prefix: IpPrefix,
    pub lifetime: LifetimeResult,
    pub origins: Vec<Asn>,
    pub rov_class: Option<MoasRovClass>,
    pub cidr_group: &'static str,
    pub visibility: VisibilityStats,
    pub relationship: Option<Relationship>,
    pub business: Option<BusinessPair>,
    pub hypergiant_orgs: Option<BTreeSet<String>>,
    pub anycast: Option<bool>,
}

impl MoasProfile {
    pub fn new(obs: &MoasObservation, lifetime: LifetimeResult) -> Self {
        MoasProfile {
            prefix: obs.prefix,
            lifetime,
            origins: obs.origin_set.clone(),
            rov_class: None,
            cidr_group: cidr_group(&obs.prefix),
            visibility: visibility_stats(obs),
            relationship: None,
            business: None,
            hypergiant_orgs: None,
            anycast: None,
        }
    }

    pub fn origin_count(&self) -> usize {
        self.origins.len()
    }
}

pub fn tag_hypergiant_and_anycast(
    profile: &mut MoasProfile,
    hypergiants: Option<&HypergiantDb>,
    anycast: Option<&AnycastList>,
    mode: AnycastMatch,
) {
    if let Some(hg) = hypergiants {
        profile.hypergiant_orgs =
            Some(profile.origins.iter().flat_map(|a| hg.orgs_of(*a).cloned()).collect());
    }
    if let Some(list) = anycast {
        profile.anycast = Some(list.matches(&profile.prefix, mode));
    }
}

//! Seeded generator of multi-collector RIB datasets with known answers.
//!
//! A scenario lists collectors, a study window and MOAS events. Generation
//! yields normalized RIB files, auxiliary datasets (ROAs, relationships,
//! organizations, business categories, hypergiants, anycast prefixes) and a
//! manifest of the answers every pipeline stage should reproduce. The
//! manifest is derived from the event plan directly, never from the emitted
//! records.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io;
use std::net::{IpAddr, Ipv4Addr};
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::enrich::{BusinessPair, RelClass};
use crate::filters::{BogonTables, FilterKind};
use crate::ingest::{render_normalized, AsPath, Asn, RibRecord, SlotConfig, SnapshotKey};
use crate::lifetime::Longevity;
use crate::prefix::IpPrefix;
use crate::rpki::MoasRovClass;

/// Sensitivities for which the manifest lists segments.
pub const TRUTH_SENSITIVITIES: [u32; 3] = [0, 1, 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventKind {
    StableMoas,
    MergerMoas,
    ShortHijack,
    Flapping,
    CollectorOutage,
    AnycastMoas,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectorSpec {
    pub name: String,
    pub peers: u32,
}

/// One phenomenon. Days are 1-based window offsets, inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSpec {
    pub kind: EventKind,
    #[serde(default)]
    pub prefix: Option<IpPrefix>,
    #[serde(default)]
    pub origins: Vec<Asn>,
    #[serde(default)]
    pub first_day: Option<u32>,
    #[serde(default)]
    pub last_day: Option<u32>,
    /// Peers per origin, in `origins` order.
    #[serde(default)]
    pub visibility: Vec<u32>,
    /// Restricts an origin's peers to the named collectors.
    #[serde(default)]
    pub origin_collectors: BTreeMap<Asn, Vec<String>>,
    /// Flapping: probability that a day inside the range loses its MOAS.
    #[serde(default)]
    pub gap_rate: Option<f64>,
    /// Merger: days the old origin announces alone before, and the new
    /// origin alone after, the overlap.
    #[serde(default)]
    pub lead_days: Option<u32>,
    /// Slots in which origins other than the first announce.
    #[serde(default)]
    pub slots: Option<Vec<u8>>,
    /// CollectorOutage: the silent collector and its missing days.
    #[serde(default)]
    pub collector: Option<String>,
    #[serde(default)]
    pub days: Vec<u32>,
    #[serde(default)]
    pub rov: Option<MoasRovClass>,
    #[serde(default)]
    pub relationship: Option<RelClass>,
    /// Layer-1 business categories per origin.
    #[serde(default)]
    pub categories: BTreeMap<Asn, Vec<String>>,
}

impl EventSpec {
    pub fn new(kind: EventKind) -> Self {
        EventSpec {
            kind,
            prefix: None,
            origins: Vec::new(),
            first_day: None,
            last_day: None,
            visibility: Vec::new(),
            origin_collectors: BTreeMap::new(),
            gap_rate: None,
            lead_days: None,
            slots: None,
            collector: None,
            days: Vec::new(),
            rov: None,
            relationship: None,
            categories: BTreeMap::new(),
        }
    }
}

/// Records per snapshot carrying each kind of artifact.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BogonInjection {
    #[serde(default)]
    pub reserved_asn: u32,
    #[serde(default)]
    pub special_prefix: u32,
    #[serde(default)]
    pub default_route: u32,
    #[serde(default)]
    pub host_bits: u32,
    #[serde(default)]
    pub multicast: u32,
}

fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2022, 6, 1).expect("valid date")
}

fn default_slots() -> u8 {
    1
}

fn default_background() -> u32 {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub seed: u64,
    #[serde(default = "default_start")]
    pub start: NaiveDate,
    pub window_days: u32,
    #[serde(default = "default_slots")]
    pub slots_per_day: u8,
    pub collectors: Vec<CollectorSpec>,
    #[serde(default)]
    pub events: Vec<EventSpec>,
    /// Single-origin prefixes per MOAS event.
    #[serde(default = "default_background")]
    pub background_per_event: u32,
    #[serde(default)]
    pub bogons: BogonInjection,
    #[serde(default)]
    pub hypergiants: BTreeMap<String, Vec<Asn>>,
}

impl Scenario {
    pub fn end(&self) -> NaiveDate {
        self.day(self.window_days)
    }

    /// Calendar date of 1-based window day `n`.
    pub fn day(&self, n: u32) -> NaiveDate {
        self.start + Duration::days(n as i64 - 1)
    }

    fn total_peers(&self) -> u32 {
        self.collectors.iter().map(|c| c.peers).sum()
    }
}

fn is_moas_kind(kind: EventKind) -> bool {
    kind != EventKind::CollectorOutage
}

fn event_range(ev: &EventSpec, window: u32) -> (u32, u32) {
    (ev.first_day.unwrap_or(1), ev.last_day.unwrap_or(window))
}

/// Lists every violated constraint; empty means the scenario is usable.
pub fn validate_scenario(sc: &Scenario) -> Vec<String> {
    let mut v = Vec::new();
    if sc.window_days == 0 {
        v.push("window_days must be positive".to_string());
    }
    if sc.slots_per_day == 0 || sc.slots_per_day > 24 {
        v.push(format!("slots_per_day must be 1..=24, got {}", sc.slots_per_day));
    }
    if sc.collectors.is_empty() {
        v.push("no collectors".to_string());
    }
    let mut names = BTreeSet::new();
    for c in &sc.collectors {
        if c.peers == 0 {
            v.push(format!("collector {} has no peers", c.name));
        }
        if c.name.is_empty() || c.name.contains(['/', '\\']) {
            v.push(format!("collector name {:?} is not a plain directory name", c.name));
        }
        if !names.insert(c.name.as_str()) {
            v.push(format!("collector {} listed twice", c.name));
        }
    }
    let bogons = BogonTables::builtin();
    let mut footprints: Vec<(IpPrefix, u32, u32, usize)> = Vec::new();
    for (i, ev) in sc.events.iter().enumerate() {
        let tag = format!("event {i} ({:?})", ev.kind);
        let (first, last) = event_range(ev, sc.window_days);
        if first == 0 || first > last || last > sc.window_days {
            v.push(format!("{tag}: day range {first}..{last} outside window 1..{}", sc.window_days));
        }
        let duration = last.saturating_sub(first) + 1;
        match ev.kind {
            EventKind::ShortHijack if duration >= 30 => {
                v.push(format!("{tag}: hijack lasts {duration} days, must be under 30"))
            }
            EventKind::StableMoas | EventKind::MergerMoas if duration < 30 => {
                v.push(format!("{tag}: lasts {duration} days, must be at least 30"))
            }
            _ => {}
        }
        if ev.kind == EventKind::CollectorOutage {
            match &ev.collector {
                Some(c) if names.contains(c.as_str()) => {}
                Some(c) => v.push(format!("{tag}: unknown collector {c}")),
                None => v.push(format!("{tag}: outage needs a collector")),
            }
            if ev.days.is_empty() {
                v.push(format!("{tag}: outage needs days"));
            }
            for d in &ev.days {
                if *d == 0 || *d > sc.window_days {
                    v.push(format!("{tag}: outage day {d} outside window"));
                }
            }
            continue;
        }
        let n = ev.origins.len();
        let want = match ev.kind {
            EventKind::AnycastMoas => (3, usize::MAX),
            EventKind::MergerMoas | EventKind::ShortHijack => (2, 2),
            _ => (2, usize::MAX),
        };
        if n != 0 && (n < want.0 || n > want.1) {
            v.push(format!("{tag}: {n} origins given"));
        }
        if ev.origins.iter().collect::<BTreeSet<_>>().len() != n {
            v.push(format!("{tag}: duplicate origins"));
        }
        for o in &ev.origins {
            if bogons.reserved_range(*o).is_some() {
                v.push(format!("{tag}: origin {o} is a reserved ASN and would be filtered"));
            }
        }
        let effective = match (n, ev.kind) {
            (0, EventKind::AnycastMoas) => 3,
            (0, _) => 2,
            _ => n,
        };
        if !ev.visibility.is_empty() && ev.visibility.len() != effective {
            v.push(format!("{tag}: visibility needs one entry per origin"));
        }
        if ev.visibility.contains(&0) {
            v.push(format!("{tag}: visibility entries must be positive"));
        }
        if ev.visibility.iter().sum::<u32>() > sc.total_peers() {
            v.push(format!("{tag}: visibility exceeds the {} available peers", sc.total_peers()));
        }
        for (asn, cs) in &ev.origin_collectors {
            if !ev.origins.contains(asn) {
                v.push(format!("{tag}: collector restriction for unknown origin {asn}"));
            }
            for c in cs {
                if !names.contains(c.as_str()) {
                    v.push(format!("{tag}: unknown collector {c}"));
                }
            }
        }
        if let Some(r) = ev.gap_rate {
            if !(0.0..1.0).contains(&r) {
                v.push(format!("{tag}: gap_rate must be in [0,1)"));
            }
        }
        if let Some(slots) = &ev.slots {
            if slots.is_empty() || slots.iter().any(|s| *s >= sc.slots_per_day) {
                v.push(format!("{tag}: slots must be non-empty and below {}", sc.slots_per_day));
            }
        }
        if ev.rov == Some(MoasRovClass::MixedInvalidNotFound) {
            v.push(format!("{tag}: a single ROA snapshot cannot mix Invalid and NotFound for one prefix"));
        }
        if let Some(rel) = ev.relationship {
            if n != 0 && n != 2 {
                v.push(format!("{tag}: relationships need exactly two origins"));
            }
            if rel == RelClass::NotApplicable {
                v.push(format!("{tag}: NotApplicable is not a relationship"));
            }
        }
        if let Some(p) = ev.prefix {
            if p.is_default_route() || bogons.v4_prefixes.iter().chain(&bogons.v6_prefixes).any(|b| b.contains(&p)) {
                v.push(format!("{tag}: prefix {p} would be filtered"));
            }
            if p.raw_host_bits() {
                v.push(format!("{tag}: prefix {} has host bits set", p.to_raw_string()));
            }
            let (lo, hi) = footprint(ev, sc.window_days);
            footprints.push((p, lo, hi, i));
        }
    }
    footprints.sort();
    for w in footprints.windows(2) {
        if w[0].0 == w[1].0 && w[1].1 <= w[0].2 {
            v.push(format!("events {} and {} overlap on prefix {}", w[0].3, w[1].3, w[0].0));
        }
    }
    v
}

/// Days on which an event announces anything at all.
fn footprint(ev: &EventSpec, window: u32) -> (u32, u32) {
    let (first, last) = event_range(ev, window);
    match ev.kind {
        EventKind::ShortHijack => (1, window),
        EventKind::MergerMoas => {
            let lead = ev.lead_days.unwrap_or(10);
            (first.saturating_sub(lead).max(1), (last + lead).min(window))
        }
        _ => (first, last),
    }
}

/// Independent deterministic stream for `label`.
fn substream(seed: u64, label: &str) -> ChaCha8Rng {
    let digest = Sha256::digest(format!("{seed}/{label}").as_bytes());
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

#[derive(Debug, Clone, Copy)]
struct Peer {
    collector: usize,
    local: u32,
}

impl Peer {
    fn asn(&self) -> Asn {
        100_000 + self.local
    }

    fn ip(&self) -> IpAddr {
        IpAddr::V4(Ipv4Addr::new(100, self.collector as u8, (self.local >> 8) as u8, self.local as u8))
    }
}

struct Plan {
    prefix: IpPrefix,
    origins: Vec<Asn>,
    /// Global peer indices per origin.
    peers: Vec<Vec<usize>>,
    /// Per origin, per window day (0-based): announced.
    active: Vec<Vec<bool>>,
    slots: Option<Vec<u8>>,
}

impl Plan {
    fn announces(&self, origin: usize, day: usize, slot: u8) -> bool {
        self.active[origin][day] && (origin == 0 || self.slots.as_ref().is_none_or(|s| s.contains(&slot)))
    }
}

fn auto_prefix(i: usize) -> IpPrefix {
    if i % 5 == 4 {
        format!("2a00:{:x}::/48", i + 1).parse().expect("valid prefix")
    } else {
        let len = [24, 22, 24, 20][i % 4];
        // one /16 per event keeps event prefixes and their ROAs disjoint
        format!("{}.{}.0.0/{len}", 20 + (i >> 8), i & 0xff).parse().expect("valid prefix")
    }
}

fn background_prefix(i: u32) -> IpPrefix {
    if i % 4 == 3 {
        format!("2a10:{:x}:{:x}::/48", i >> 16, i & 0xffff).parse().expect("valid prefix")
    } else {
        format!("{}.{}.{}.0/24", 60 + (i >> 16), (i >> 8) & 0xff, i & 0xff).parse().expect("valid prefix")
    }
}

const RESERVED_ORIGINS: [Asn; 6] = [64512, 65000, 4_200_000_001, 23456, 65535, 64496];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrefixTruth {
    pub event: usize,
    pub kind: EventKind,
    pub origins: Vec<Asn>,
    /// Days on which the prefix is MOAS in at least one slot.
    pub moas_days: Vec<NaiveDate>,
    /// Keyed by sensitivity.
    pub segments: BTreeMap<u32, Vec<(NaiveDate, NaiveDate)>>,
    pub max_lifetime: BTreeMap<u32, u32>,
    pub longevity: BTreeMap<u32, Longevity>,
    pub observability: Option<f64>,
    /// Per MOAS day, peers per origin in the earliest MOAS slot.
    pub visibility: BTreeMap<NaiveDate, BTreeMap<Asn, u32>>,
    pub rov_class: MoasRovClass,
    pub rel_class: RelClass,
    pub business: BusinessPair,
    pub anycast: bool,
    pub hypergiant_orgs: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub slots_per_day: u8,
    pub threshold_days: u32,
    pub files: u64,
    pub records: u64,
    /// Injected artifact records per filter verdict.
    pub bogon_census: BTreeMap<FilterKind, u64>,
    pub prefixes: BTreeMap<IpPrefix, PrefixTruth>,
}

impl Manifest {
    /// Prefixes that are MOAS on at least one day.
    pub fn moas_prefixes(&self) -> impl Iterator<Item = (&IpPrefix, &PrefixTruth)> {
        self.prefixes.iter().filter(|(_, t)| !t.moas_days.is_empty())
    }
}

pub struct RibFile {
    pub collector: String,
    pub snapshot: SnapshotKey,
    /// Path relative to the dataset root.
    pub path: String,
    pub records: Vec<RibRecord>,
}

pub struct Generated {
    pub ribs: Vec<RibFile>,
    /// Auxiliary files keyed by relative path.
    pub aux: BTreeMap<String, String>,
    pub manifest: Manifest,
}

impl Generated {
    /// Writes `ribs/`, the auxiliary directories and `manifest.json`.
    pub fn write(&self, root: &Path) -> io::Result<()> {
        for f in &self.ribs {
            let path = root.join(&f.path);
            std::fs::create_dir_all(path.parent().expect("nested path"))?;
            std::fs::write(path, render_normalized(&f.records))?;
        }
        for (rel, text) in &self.aux {
            let path = root.join(rel);
            std::fs::create_dir_all(path.parent().expect("nested path"))?;
            std::fs::write(path, text)?;
        }
        let manifest = serde_json::to_string_pretty(&self.manifest).map_err(io::Error::other)?;
        std::fs::write(root.join("manifest.json"), manifest + "\n")
    }
}

#[derive(Debug, thiserror::Error)]
#[error("invalid scenario: {}", .0.join("; "))]
pub struct ScenarioError(pub Vec<String>);

pub fn generate(sc: &Scenario) -> Result<Generated, ScenarioError> {
    let violations = validate_scenario(sc);
    if !violations.is_empty() {
        return Err(ScenarioError(violations));
    }
    let window = sc.window_days as usize;
    let slots = SlotConfig::with_slots(sc.slots_per_day);

    let peers: Vec<Peer> = sc
        .collectors
        .iter()
        .enumerate()
        .flat_map(|(c, spec)| (0..spec.peers).map(move |local| Peer { collector: c, local }))
        .collect();
    let collector_idx: BTreeMap<&str, usize> =
        sc.collectors.iter().enumerate().map(|(i, c)| (c.name.as_str(), i)).collect();

    let mut outage = vec![vec![false; window]; sc.collectors.len()];
    for ev in sc.events.iter().filter(|e| e.kind == EventKind::CollectorOutage) {
        let c = collector_idx[ev.collector.as_deref().expect("validated")];
        for d in &ev.days {
            outage[c][*d as usize - 1] = true;
        }
    }

    let mut plans: Vec<(usize, Plan)> = Vec::new();
    for (i, ev) in sc.events.iter().enumerate() {
        if !is_moas_kind(ev.kind) {
            continue;
        }
        plans.push((i, plan_event(sc, i, ev, &peers, &collector_idx)?));
    }

    let mut taken: BTreeSet<IpPrefix> = plans.iter().map(|(_, p)| p.prefix).collect();
    let moas_events = plans.len() as u32;
    let mut background: Vec<(IpPrefix, Asn, Vec<usize>)> = Vec::new();
    let mut bg_rng = substream(sc.seed, "background");
    let mut next = 0u32;
    while (background.len() as u32) < sc.background_per_event * moas_events.max(1) {
        let prefix = background_prefix(next);
        let origin = 30_000 + next % 20_000;
        next += 1;
        if !taken.insert(prefix) {
            continue;
        }
        let k = bg_rng.gen_range(1..=peers.len().min(4));
        let mut chosen: Vec<usize> = (0..peers.len()).collect::<Vec<_>>().choose_multiple(&mut bg_rng, k).copied().collect();
        chosen.sort_unstable();
        background.push((prefix, origin, chosen));
    }

    let mut census: BTreeMap<FilterKind, u64> = BTreeMap::new();
    let mut ribs = Vec::new();
    let mut records_total = 0u64;
    for day in 0..window {
        let date = sc.day(day as u32 + 1);
        for slot in 0..sc.slots_per_day {
            let mut per_collector: Vec<Vec<RibRecord>> = vec![Vec::new(); sc.collectors.len()];
            let nominal = date.and_time(slots.nominal[slot as usize]).and_utc();
            let jitter: Vec<i64> = {
                let mut r = substream(sc.seed, &format!("jitter/{date}/{slot}"));
                sc.collectors.iter().map(|_| r.gen_range(-10..=10)).collect()
            };
            let ts = |c: usize| nominal + Duration::minutes(jitter[c]);
            let emit = |peer: &Peer, prefix: IpPrefix, origin: Asn, out: &mut Vec<Vec<RibRecord>>| {
                let mut path = vec![peer.asn()];
                if (peer.local as u64 + origin as u64).is_multiple_of(3) {
                    path.push(3356);
                }
                path.push(origin);
                if origin.is_multiple_of(4) {
                    path.push(origin);
                }
                let rec = RibRecord::new(ts(peer.collector), &sc.collectors[peer.collector].name, peer.asn(), peer.ip(), prefix, AsPath::from_sequence(path))
                    .expect("sequence path has an origin");
                out[peer.collector].push(rec);
            };

            for (_, plan) in &plans {
                for (o, origin) in plan.origins.iter().enumerate() {
                    if !plan.announces(o, day, slot) {
                        continue;
                    }
                    for &p in &plan.peers[o] {
                        if !outage[peers[p].collector][day] {
                            emit(&peers[p], plan.prefix, *origin, &mut per_collector);
                        }
                    }
                }
            }
            for (prefix, origin, chosen) in &background {
                for &p in chosen {
                    if !outage[peers[p].collector][day] {
                        emit(&peers[p], *prefix, *origin, &mut per_collector);
                    }
                }
            }

            let mut r = substream(sc.seed, &format!("bogons/{date}/{slot}"));
            let b = &sc.bogons;
            let injections = [
                (FilterKind::ReservedAsn, b.reserved_asn),
                (FilterKind::SpecialPurposePrefix, b.special_prefix),
                (FilterKind::DefaultRoute, b.default_route),
                (FilterKind::HostBitsSet, b.host_bits),
                (FilterKind::Multicast, b.multicast),
            ];
            for (kind, n) in injections {
                for j in 0..n {
                    let peer = &peers[r.gen_range(0..peers.len())];
                    if outage[peer.collector][day] {
                        continue;
                    }
                    let legit = 30_000 + j;
                    let (prefix, origin): (IpPrefix, Asn) = match kind {
                        FilterKind::ReservedAsn => {
                            let prefix = match background.get(j as usize % background.len().max(1)) {
                                Some(bg) => bg.0,
                                None => format!("61.200.{}.0/24", j % 256).parse().expect("valid prefix"),
                            };
                            (prefix, RESERVED_ORIGINS[j as usize % RESERVED_ORIGINS.len()])
                        }
                        FilterKind::SpecialPurposePrefix => {
                            (format!("192.168.{}.0/24", j % 256).parse().expect("valid prefix"), legit)
                        }
                        FilterKind::DefaultRoute => ("0.0.0.0/0".parse().expect("valid prefix"), legit),
                        FilterKind::HostBitsSet => {
                            (format!("61.{}.3.0/16", j % 256).parse().expect("valid prefix"), legit)
                        }
                        FilterKind::Multicast => {
                            (format!("224.{}.0.0/16", j % 256).parse().expect("valid prefix"), legit)
                        }
                        FilterKind::Pass => unreachable!(),
                    };
                    emit(peer, prefix, origin, &mut per_collector);
                    *census.entry(kind).or_default() += 1;
                }
            }

            let hhmm = slots.nominal[slot as usize].format("%H%M");
            for (c, records) in per_collector.into_iter().enumerate() {
                if outage[c][day] {
                    continue;
                }
                records_total += records.len() as u64;
                let name = &sc.collectors[c].name;
                ribs.push(RibFile {
                    collector: name.clone(),
                    snapshot: SnapshotKey::new(date, slot),
                    path: format!("ribs/{name}/{}.{hhmm}.jsonl", date.format("%Y%m%d")),
                    records,
                });
            }
        }
    }

    let prefixes = plans
        .iter()
        .map(|(i, plan)| (plan.prefix, truth(sc, *i, plan, &peers, &outage)))
        .collect();
    let manifest = Manifest {
        seed: sc.seed,
        start: sc.start,
        end: sc.end(),
        slots_per_day: sc.slots_per_day,
        threshold_days: crate::lifetime::DEFAULT_THRESHOLD_DAYS,
        files: ribs.len() as u64,
        records: records_total,
        bogon_census: census,
        prefixes,
    };
    let aux = aux_files(sc, &plans);
    Ok(Generated { ribs, aux, manifest })
}

fn plan_event(
    sc: &Scenario,
    i: usize,
    ev: &EventSpec,
    peers: &[Peer],
    collector_idx: &BTreeMap<&str, usize>,
) -> Result<Plan, ScenarioError> {
    let window = sc.window_days as usize;
    let prefix = ev.prefix.unwrap_or_else(|| auto_prefix(i));
    let origins: Vec<Asn> = if ev.origins.is_empty() {
        let n = if ev.kind == EventKind::AnycastMoas { 3 } else { 2 };
        (0..n).map(|j| 10_000 + 10 * i as Asn + j).collect()
    } else {
        ev.origins.clone()
    };
    let n = origins.len();
    let visibility: Vec<u32> = if ev.visibility.is_empty() {
        vec![(peers.len() as u32 / (2 * n as u32)).max(1); n]
    } else {
        ev.visibility.clone()
    };

    let mut order: Vec<usize> = (0..peers.len()).collect();
    order.shuffle(&mut substream(sc.seed, &format!("event/{i}/peers")));
    let mut used = vec![false; peers.len()];
    let mut assigned = vec![Vec::new(); n];
    // restricted origins first so unrestricted ones cannot starve them
    let mut by_restriction: Vec<usize> = (0..n).collect();
    by_restriction.sort_by_key(|o| !ev.origin_collectors.contains_key(&origins[*o]));
    for o in by_restriction {
        let allowed: Option<BTreeSet<usize>> = ev
            .origin_collectors
            .get(&origins[o])
            .map(|cs| cs.iter().map(|c| collector_idx[c.as_str()]).collect());
        for &p in &order {
            if assigned[o].len() as u32 == visibility[o] {
                break;
            }
            if !used[p] && allowed.as_ref().is_none_or(|a| a.contains(&peers[p].collector)) {
                used[p] = true;
                assigned[o].push(p);
            }
        }
        if (assigned[o].len() as u32) < visibility[o] {
            return Err(ScenarioError(vec![format!(
                "event {i}: origin {} wants {} peers, only {} available",
                origins[o],
                visibility[o],
                assigned[o].len()
            )]));
        }
        assigned[o].sort_unstable();
    }

    let (first, last) = event_range(ev, sc.window_days);
    let (first, last) = (first as usize - 1, last as usize - 1);
    let span = |a: usize, b: usize| (0..window).map(|d| d >= a && d <= b).collect::<Vec<bool>>();
    let mut active = vec![span(first, last); n];
    match ev.kind {
        EventKind::MergerMoas => {
            let lead = ev.lead_days.unwrap_or(10) as usize;
            active[0] = span(first.saturating_sub(lead), last);
            active[1] = span(first, (last + lead).min(window - 1));
        }
        EventKind::ShortHijack => active[0] = vec![true; window],
        EventKind::Flapping => {
            let rate = ev.gap_rate.unwrap_or(0.3);
            let mut r = substream(sc.seed, &format!("event/{i}/flap"));
            let pattern: Vec<bool> = (0..window)
                .map(|d| d == first || d == last || (d > first && d < last && r.gen::<f64>() >= rate))
                .collect();
            for a in active.iter_mut().skip(1) {
                *a = pattern.clone();
            }
        }
        _ => {}
    }
    Ok(Plan { prefix, origins, peers: assigned, active, slots: ev.slots.clone() })
}

/// Fills interior gaps of at most `s` days, then reads off runs of ones.
fn bitmap_segments(bits: &[bool], s: u32) -> Vec<(usize, usize)> {
    let mut filled = bits.to_vec();
    let mut i = 0;
    while i < bits.len() {
        if bits[i] {
            i += 1;
            continue;
        }
        let start = i;
        while i < bits.len() && !bits[i] {
            i += 1;
        }
        let bounded = start > 0 && i < bits.len();
        if bounded && i - start <= s as usize {
            filled[start..i].iter_mut().for_each(|b| *b = true);
        }
    }
    let mut out = Vec::new();
    let mut i = 0;
    while i < filled.len() {
        if filled[i] {
            let a = i;
            while i < filled.len() && filled[i] {
                i += 1;
            }
            out.push((a, i - 1));
        } else {
            i += 1;
        }
    }
    out
}

fn truth(sc: &Scenario, i: usize, plan: &Plan, peers: &[Peer], outage: &[Vec<bool>]) -> PrefixTruth {
    let ev = &sc.events[i];
    let window = sc.window_days as usize;
    let mut moas = vec![false; window];
    let mut visibility = BTreeMap::new();
    for (day, is_moas) in moas.iter_mut().enumerate() {
        for slot in 0..sc.slots_per_day {
            let vis: BTreeMap<Asn, u32> = plan
                .origins
                .iter()
                .enumerate()
                .filter(|(o, _)| plan.announces(*o, day, slot))
                .map(|(o, asn)| {
                    let seen = plan.peers[o].iter().filter(|p| !outage[peers[**p].collector][day]).count() as u32;
                    (*asn, seen)
                })
                .filter(|(_, seen)| *seen > 0)
                .collect();
            if vis.len() >= 2 {
                *is_moas = true;
                visibility.insert(sc.day(day as u32 + 1), vis);
                break;
            }
        }
    }
    let moas_days: Vec<NaiveDate> =
        moas.iter().enumerate().filter(|(_, m)| **m).map(|(d, _)| sc.day(d as u32 + 1)).collect();
    let mut segments = BTreeMap::new();
    let mut max_lifetime = BTreeMap::new();
    let mut longevity = BTreeMap::new();
    for s in TRUTH_SENSITIVITIES {
        let segs = bitmap_segments(&moas, s);
        if let Some(longest) = segs.iter().map(|(a, b)| (b - a + 1) as u32).max() {
            max_lifetime.insert(s, longest);
            longevity.insert(
                s,
                if longest >= crate::lifetime::DEFAULT_THRESHOLD_DAYS { Longevity::LongLived } else { Longevity::ShortLived },
            );
        }
        segments.insert(
            s,
            segs.into_iter().map(|(a, b)| (sc.day(a as u32 + 1), sc.day(b as u32 + 1))).collect(),
        );
    }
    let observability = match (moas_days.first(), moas_days.last()) {
        (Some(a), Some(b)) => Some(moas_days.len() as f64 / ((*b - *a).num_days() + 1) as f64),
        _ => None,
    };

    let rov_class = ev.rov.unwrap_or(MoasRovClass::NotFound);
    let rel_class = match (plan.origins.len(), ev.relationship) {
        (2, Some(r)) => r,
        (2, None) => RelClass::NoRelationDetected,
        _ => RelClass::NotApplicable,
    };
    let business = match plan.origins.as_slice() {
        [a, b] => match (ev.categories.get(a), ev.categories.get(b)) {
            (Some(x), Some(y)) if !x.is_empty() && !y.is_empty() => {
                let (x, y): (BTreeSet<_>, BTreeSet<_>) = (x.iter().collect(), y.iter().collect());
                if x.len() == 1 && y.len() == 1 {
                    let mut pair = [x.into_iter().next().unwrap().clone(), y.into_iter().next().unwrap().clone()];
                    pair.sort();
                    let [p, q] = pair;
                    BusinessPair::Matched(p, q)
                } else {
                    BusinessPair::MultiCategory
                }
            }
            _ => BusinessPair::Unmatched,
        },
        _ => BusinessPair::NotApplicable,
    };
    let hypergiant_orgs = sc
        .hypergiants
        .iter()
        .filter(|(_, asns)| asns.iter().any(|a| plan.origins.contains(a)))
        .map(|(org, _)| org.clone())
        .collect();
    PrefixTruth {
        event: i,
        kind: ev.kind,
        origins: plan.origins.clone(),
        moas_days,
        segments,
        max_lifetime,
        longevity,
        observability,
        visibility,
        rov_class,
        rel_class,
        business,
        anycast: ev.kind == EventKind::AnycastMoas,
        hypergiant_orgs,
    }
}

fn aux_files(sc: &Scenario, plans: &[(usize, Plan)]) -> BTreeMap<String, String> {
    let mut aux = BTreeMap::new();
    let start = sc.start;

    let mut roas = String::from("URI,ASN,IP Prefix,Max Length,Not Before,Not After\n");
    let mut roa = |asn: Asn, p: &IpPrefix| {
        let _ = writeln!(roas, "rsync://synth.example/repo/{asn}-{}.roa,AS{asn},{p},{},,", p.len(), p.len());
    };
    for (i, plan) in plans {
        match sc.events[*i].rov {
            Some(MoasRovClass::AllValid) => plan.origins.iter().for_each(|o| roa(*o, &plan.prefix)),
            Some(MoasRovClass::AtLeastOneValid) => roa(plan.origins[0], &plan.prefix),
            Some(MoasRovClass::AllInvalid) => roa(0, &plan.prefix),
            _ => {}
        }
    }
    let mut month = NaiveDate::from_ymd_opt(start.year(), start.month(), 1).expect("valid date");
    while month <= sc.end() {
        aux.insert(format!("roas/{}.csv", month.format("%Y-%m")), roas.clone());
        month = month.checked_add_months(chrono::Months::new(1)).expect("date in range");
    }

    let stamp = start.format("%Y%m%d");
    let mut rels = String::from("# synthetic relationships\n");
    let mut orgs = String::from("# format:org_id|changed|org_name|country|source\n");
    let mut auts = String::from("# format:aut|changed|aut_name|org_id|opaque_id|source\n");
    let mut asdb = String::from("ASN,Category 1 - Layer 1,Category 1 - Layer 2,Category 2 - Layer 1,Category 2 - Layer 2\n");
    let mut seen_asn = BTreeSet::new();
    for (i, plan) in plans {
        let ev = &sc.events[*i];
        let o = &plan.origins;
        match ev.relationship {
            Some(RelClass::C2pP2c) => {
                let _ = writeln!(rels, "{}|{}|-1|synth", o[1], o[0]);
            }
            Some(RelClass::Peering) => {
                let _ = writeln!(rels, "{}|{}|0|synth", o[0], o[1]);
            }
            _ => {}
        }
        for (j, asn) in o.iter().enumerate() {
            if !seen_asn.insert(*asn) {
                continue;
            }
            let name = if ev.relationship == Some(RelClass::Siblings) {
                format!("Sibling Group {i}")
            } else {
                format!("Org {asn}")
            };
            let _ = writeln!(orgs, "SYN-{asn}|{stamp}|{name}|ZZ|SYNTH");
            let _ = writeln!(auts, "{asn}|{stamp}|AS-{asn}-{j}|SYN-{asn}||SYNTH");
            if let Some(cats) = ev.categories.get(asn) {
                let mut row = format!("AS{asn}");
                for c in cats {
                    let _ = write!(row, ",{c},");
                }
                let _ = writeln!(asdb, "{row}");
            }
        }
    }
    aux.insert(format!("as-rel/{stamp}.as-rel.txt"), rels);
    aux.insert(format!("as2org/{stamp}.as-org2info.txt"), orgs + &auts);
    aux.insert(format!("asdb/{}_categorized_ases.csv", start.format("%Y-%m-%d")), asdb);
    aux.insert(
        "hypergiants/hypergiants.json".to_string(),
        serde_json::to_string_pretty(&sc.hypergiants).expect("map serializes") + "\n",
    );
    let mut anycast = String::from("# synthetic anycast prefixes\n");
    for (i, plan) in plans {
        if sc.events[*i].kind == EventKind::AnycastMoas {
            let _ = writeln!(anycast, "{}", plan.prefix);
        }
    }
    aux.insert("anycast/anycast-prefixes.txt".to_string(), anycast);
    aux
}

//! Stages that work from the observation store: lifetimes, knee, ROV and
//! enrichment of long-lived MOAS prefixes.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use anyhow::Context;
use chrono::{Datelike, NaiveDate};
use moasscope::enrich::{
    business_for_origins, classify_origin_set, tag_hypergiant_and_anycast, AnycastList, Asdb, HypergiantDb,
    MoasProfile, OrgDb, RelDb,
};
use moasscope::ingest::SnapshotKey;
use moasscope::io::{date_in_path, latest_not_after, list_files, open_input, read_to_string};
use moasscope::lifetime::{
    brute_force_knee, kneedle_knee, lifetime_cdf, trim_saturated, KneeConfig, KneeError, LifetimeResult, Longevity,
};
use moasscope::moas::{build_timelines, MoasObservation, MoasTimeline};
use moasscope::rpki::{classify_moas_rov, load_roas, validate, MoasRovClass, RoaSet, RovState};
use moasscope::{Asn, Family, IpPrefix};

use crate::config::{usage, RunConfig};
use crate::output::{f6, write_csv, Table, NA};
use crate::store::{SnapshotMeta, Store};

pub struct Analysis {
    pub window: (NaiveDate, NaiveDate),
    pub metas: BTreeMap<SnapshotKey, SnapshotMeta>,
    pub timelines: BTreeMap<IpPrefix, MoasTimeline>,
}

impl Analysis {
    pub fn load(cfg: &RunConfig) -> anyhow::Result<Self> {
        let store = Store::new(&cfg.out);
        let mut metas = store.metas()?;
        let start = cfg.start.or_else(|| metas.keys().next().map(|k| k.date));
        let end = cfg.end.or_else(|| metas.keys().next_back().map(|k| k.date));
        let window = match (start, end) {
            (Some(s), Some(e)) if s <= e => (s, e),
            (Some(s), Some(e)) => return Err(usage(format!("empty window: start {s} is after end {e}"))),
            _ => return Err(usage(format!("no observations under {}; run `detect` first", store.dir().display()))),
        };
        metas.retain(|k, _| k.date >= window.0 && k.date <= window.1);
        let mut observations = Vec::new();
        for key in metas.keys() {
            observations.extend(store.observations(*key)?);
        }
        let timelines = build_timelines(observations, window);
        Ok(Analysis { window, metas, timelines })
    }

    pub fn days(&self) -> impl Iterator<Item = NaiveDate> {
        self.window.0.iter_days().take_while(|d| *d <= self.window.1).collect::<Vec<_>>().into_iter()
    }

    pub fn lifetimes(&self, s: u32, threshold_days: u32) -> BTreeMap<IpPrefix, LifetimeResult> {
        self.timelines
            .iter()
            .map(|(p, tl)| (*p, LifetimeResult::compute(tl, s, threshold_days).expect("timelines are non-empty")))
            .collect()
    }

    /// Long-lived MOAS observations of `day`, in prefix order.
    pub fn long_lived_on<'a>(
        &'a self,
        day: NaiveDate,
        lifetimes: &'a BTreeMap<IpPrefix, LifetimeResult>,
    ) -> impl Iterator<Item = (&'a MoasObservation, &'a LifetimeResult)> + 'a {
        self.timelines.iter().filter_map(move |(p, tl)| {
            let lt = &lifetimes[p];
            match tl.days.get(&day) {
                Some(obs) if lt.longevity == Longevity::LongLived => Some((obs, lt)),
                _ => None,
            }
        })
    }
}

/// First window day, the first day of every later month in the window, and
/// the last window day.
pub fn analysis_days(window: (NaiveDate, NaiveDate)) -> Vec<NaiveDate> {
    let mut days = vec![window.0];
    let mut d = NaiveDate::from_ymd_opt(window.0.year(), window.0.month(), 1).expect("valid date");
    loop {
        d = match d.checked_add_months(chrono::Months::new(1)) {
            Some(n) => n,
            None => break,
        };
        if d > window.1 {
            break;
        }
        days.push(d);
    }
    if *days.last().expect("non-empty") != window.1 {
        days.push(window.1);
    }
    days
}

pub fn lifetime_table(results: &BTreeMap<IpPrefix, LifetimeResult>) -> (Table, Table) {
    let mut lt = Table::new(&[
        "prefix", "family", "first_day", "last_day", "max_lifetime_days", "observability", "longevity", "n_segments",
    ]);
    let mut seg = Table::new(&["prefix", "segment", "first_day", "last_day", "days"]);
    for (p, r) in results {
        lt.row([
            p.to_string(),
            r.family().to_string(),
            r.first_day.to_string(),
            r.last_day.to_string(),
            r.max_lifetime_days.to_string(),
            f6(r.observability),
            r.longevity.to_string(),
            r.segments.len().to_string(),
        ]);
        for (i, (a, b)) in r.segments.iter().enumerate() {
            seg.row([p.to_string(), i.to_string(), a.to_string(), b.to_string(), ((*b - *a).num_days() + 1).to_string()]);
        }
    }
    (lt, seg)
}

/// Writes `lifetimes.csv` and `segments.csv` for the configured sensitivity.
pub fn lifetime_stage(cfg: &RunConfig) -> anyhow::Result<BTreeMap<IpPrefix, LifetimeResult>> {
    let analysis = Analysis::load(cfg)?;
    let results = analysis.lifetimes(cfg.sensitivity, cfg.threshold_days);
    let (lt, seg) = lifetime_table(&results);
    write_csv(&cfg.out.join("lifetimes.csv"), &lt)?;
    write_csv(&cfg.out.join("segments.csv"), &seg)?;
    Ok(results)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Knee {
    pub knee: f64,
    /// Point maximizing the chord difference, for comparison.
    pub oracle: f64,
    pub short_fraction: f64,
    pub long_fraction: f64,
    pub population: usize,
}

/// Knee of the capped lifetime CDF, with the short/long split at the knee.
pub fn lifetime_knee(lifetimes: &[u32], cfg: &KneeConfig) -> Result<Knee, KneeError> {
    // an empty population or a cap below 2 leaves no curve to inspect
    let cdf = lifetime_cdf(lifetimes, cfg.cap_days).map_err(|_| KneeError::TooFewPoints(0))?;
    let curve = trim_saturated(&cdf);
    let knee = kneedle_knee(curve, cfg)?;
    let oracle = brute_force_knee(curve)?;
    let n = lifetimes.len() as f64;
    let short = lifetimes.iter().filter(|l| (**l as f64) < knee).count() as f64 / n;
    Ok(Knee { knee, oracle, short_fraction: short, long_fraction: 1.0 - short, population: lifetimes.len() })
}

/// Reads `max_lifetime_days` (optionally of one family) from a lifetimes CSV.
pub fn read_lifetimes(path: &Path, family: Option<Family>) -> anyhow::Result<Vec<u32>> {
    let t = crate::output::read_csv(path)?;
    let col = |n: &str| t.column(n).ok_or_else(|| usage(format!("{} has no {n} column", path.display())));
    let (lc, fc) = (col("max_lifetime_days")?, col("family")?);
    let mut out = Vec::new();
    for r in &t.rows {
        if family.is_some_and(|f| f.as_str() != r[fc]) {
            continue;
        }
        out.push(r[lc].parse().with_context(|| format!("bad lifetime {:?} in {}", r[lc], path.display()))?);
    }
    Ok(out)
}

/// Reads an `x,y` curve (header required).
pub fn read_curve(path: &Path) -> anyhow::Result<Vec<(f64, f64)>> {
    let t = crate::output::read_csv(path)?;
    t.rows
        .iter()
        .map(|r| -> anyhow::Result<(f64, f64)> {
            match r.as_slice() {
                [x, y, ..] => Ok((x.trim().parse()?, y.trim().parse()?)),
                _ => Err(usage(format!("{}: curve rows need x and y", path.display()))),
            }
        })
        .collect()
}

fn dated_files(dir: Option<PathBuf>) -> anyhow::Result<Vec<(NaiveDate, PathBuf)>> {
    let Some(dir) = dir.filter(|d| d.is_dir()) else {
        return Ok(Vec::new());
    };
    Ok(list_files(&dir)?.into_iter().filter_map(|p| date_in_path(&p).map(|d| (d, p))).collect())
}

fn all_files(dir: Option<PathBuf>) -> anyhow::Result<Vec<PathBuf>> {
    match dir.filter(|d| d.is_dir()) {
        Some(d) => Ok(list_files(&d)?),
        None => Ok(Vec::new()),
    }
}

/// Auxiliary datasets, loaded lazily per analysis day and cached by file.
pub struct Datasets {
    roas: Vec<(NaiveDate, PathBuf)>,
    rels: Vec<(NaiveDate, PathBuf)>,
    orgs: Vec<(NaiveDate, PathBuf)>,
    asdbs: Vec<(NaiveDate, PathBuf)>,
    pub hypergiants: Option<HypergiantDb>,
    pub anycast: Option<AnycastList>,
    roa_cache: BTreeMap<PathBuf, RoaSet>,
    rel_cache: BTreeMap<PathBuf, RelDb>,
    org_cache: BTreeMap<PathBuf, OrgDb>,
    asdb_cache: BTreeMap<PathBuf, Asdb>,
    missing: BTreeSet<String>,
}

impl Datasets {
    pub fn open(cfg: &RunConfig) -> anyhow::Result<Self> {
        let hg_files = all_files(cfg.hypergiants_dir())?;
        let hypergiants = if hg_files.is_empty() {
            None
        } else {
            let mut merged: BTreeMap<String, Vec<Asn>> = BTreeMap::new();
            for f in &hg_files {
                let map: BTreeMap<String, Vec<Asn>> = serde_json::from_str(&read_to_string(f)?)
                    .with_context(|| format!("parsing hypergiant list {}", f.display()))?;
                for (org, asns) in map {
                    merged.entry(org).or_default().extend(asns);
                }
            }
            Some(HypergiantDb::from_map(merged))
        };
        let ac_files = all_files(cfg.anycast_dir())?;
        let anycast = if ac_files.is_empty() {
            None
        } else {
            let mut text = String::new();
            for f in &ac_files {
                text.push_str(&read_to_string(f)?);
                text.push('\n');
            }
            Some(AnycastList::parse(text.as_bytes()).context("parsing anycast list")?)
        };
        Ok(Datasets {
            roas: dated_files(cfg.roas_dir())?,
            rels: dated_files(cfg.as_rel_dir())?,
            orgs: dated_files(cfg.as2org_dir())?,
            asdbs: dated_files(cfg.asdb_dir())?,
            hypergiants,
            anycast,
            roa_cache: BTreeMap::new(),
            rel_cache: BTreeMap::new(),
            org_cache: BTreeMap::new(),
            asdb_cache: BTreeMap::new(),
            missing: BTreeSet::new(),
        })
    }

    fn note_missing(&mut self, what: String) {
        self.missing.insert(what);
    }

    /// Datasets that were unavailable for some analysis day.
    pub fn missing(&self) -> &BTreeSet<String> {
        &self.missing
    }

    /// The ROA snapshot of `day`'s calendar month: the latest file of that
    /// month dated on or before `day`, else the month's earliest file.
    pub fn roas(&mut self, day: NaiveDate) -> anyhow::Result<Option<&RoaSet>> {
        let month: Vec<(NaiveDate, PathBuf)> = self
            .roas
            .iter()
            .filter(|(d, _)| d.year() == day.year() && d.month() == day.month())
            .cloned()
            .collect();
        let pick = latest_not_after(&month, day).or_else(|| month.iter().min_by_key(|(d, _)| *d).map(|(_, p)| p));
        let Some(path) = pick.cloned() else {
            self.note_missing(format!("ROA snapshot for {}", day.format("%Y-%m")));
            return Ok(None);
        };
        if !self.roa_cache.contains_key(&path) {
            let set = load_roas(open_input(&path)?).with_context(|| format!("loading ROAs {}", path.display()))?;
            if set.skipped > 0 {
                log::warn!("{}: skipped {} malformed ROA rows", path.display(), set.skipped);
            }
            self.roa_cache.insert(path.clone(), set);
        }
        Ok(self.roa_cache.get(&path))
    }

    pub fn rels_and_orgs(&mut self, day: NaiveDate) -> anyhow::Result<Option<(&RelDb, &OrgDb)>> {
        let rel = latest_not_after(&self.rels, day).cloned();
        let org = latest_not_after(&self.orgs, day).cloned();
        let (Some(rel), Some(org)) = (rel, org) else {
            self.note_missing(format!("as-rel/as2org snapshot on or before {day}"));
            return Ok(None);
        };
        if !self.rel_cache.contains_key(&rel) {
            let db = RelDb::parse(open_input(&rel)?).with_context(|| format!("loading {}", rel.display()))?;
            self.rel_cache.insert(rel.clone(), db);
        }
        if !self.org_cache.contains_key(&org) {
            let db = OrgDb::parse(open_input(&org)?).with_context(|| format!("loading {}", org.display()))?;
            self.org_cache.insert(org.clone(), db);
        }
        Ok(Some((&self.rel_cache[&rel], &self.org_cache[&org])))
    }

    pub fn asdb(&mut self, day: NaiveDate) -> anyhow::Result<Option<&Asdb>> {
        let Some(path) = latest_not_after(&self.asdbs, day).cloned() else {
            self.note_missing(format!("ASdb snapshot on or before {day}"));
            return Ok(None);
        };
        if !self.asdb_cache.contains_key(&path) {
            let db = Asdb::parse(open_input(&path)?).with_context(|| format!("loading {}", path.display()))?;
            self.asdb_cache.insert(path.clone(), db);
        }
        Ok(self.asdb_cache.get(&path))
    }
}

pub fn rov_of(obs: &MoasObservation, roas: &RoaSet, day: NaiveDate) -> (Vec<RovState>, MoasRovClass) {
    let states: Vec<RovState> = obs.origin_set.iter().map(|o| validate(&obs.prefix, *o, roas, Some(day))).collect();
    let class = classify_moas_rov(&states).expect("MOAS observations have at least two origins");
    (states, class)
}

pub struct DayProfiles {
    pub day: NaiveDate,
    pub profiles: Vec<MoasProfile>,
    /// Per-origin peer counts, parallel to `profiles`.
    pub visibility: Vec<BTreeMap<Asn, u32>>,
}

/// Enriched long-lived MOAS prefixes for every analysis day.
pub fn build_profiles(
    cfg: &RunConfig,
    analysis: &Analysis,
    lifetimes: &BTreeMap<IpPrefix, LifetimeResult>,
    data: &mut Datasets,
) -> anyhow::Result<Vec<DayProfiles>> {
    let mut out = Vec::new();
    for day in analysis_days(analysis.window) {
        let selected: Vec<(&MoasObservation, &LifetimeResult)> = analysis.long_lived_on(day, lifetimes).collect();
        let mut profiles: Vec<MoasProfile> =
            selected.iter().map(|(obs, lt)| MoasProfile::new(obs, (*lt).clone())).collect();
        if let Some(roas) = data.roas(day)? {
            for (p, (obs, _)) in profiles.iter_mut().zip(&selected) {
                p.rov_class = Some(rov_of(obs, roas, day).1);
            }
        }
        if let Some((rels, orgs)) = data.rels_and_orgs(day)? {
            for p in profiles.iter_mut() {
                p.relationship = Some(classify_origin_set(&p.origins, rels, orgs));
            }
        }
        if let Some(asdb) = data.asdb(day)? {
            for p in profiles.iter_mut() {
                p.business = Some(business_for_origins(&p.origins, asdb));
            }
        }
        for p in profiles.iter_mut() {
            tag_hypergiant_and_anycast(p, data.hypergiants.as_ref(), data.anycast.as_ref(), cfg.anycast_match.into());
        }
        let visibility = selected.iter().map(|(obs, _)| obs.visibility.clone()).collect();
        out.push(DayProfiles { day, profiles, visibility });
    }
    if data.hypergiants.is_none() {
        data.note_missing("hypergiant list".to_string());
    }
    if data.anycast.is_none() {
        data.note_missing("anycast list".to_string());
    }
    Ok(out)
}

fn origins_cell(origins: &[Asn]) -> String {
    origins.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(" ")
}

fn opt<T>(v: Option<T>, f: impl FnOnce(T) -> String) -> String {
    v.map_or_else(|| NA.to_string(), f)
}

pub const PROFILE_COLUMNS: [&str; 22] = [
    "day",
    "prefix",
    "family",
    "origins",
    "origin_count",
    "max_lifetime_days",
    "observability",
    "longevity",
    "rov_class",
    "cidr_group",
    "vis_min",
    "vis_max",
    "vis_diff",
    "rel_class",
    "rel_sibling_overlap",
    "business_status",
    "business_cat_a",
    "business_cat_b",
    "hypergiant",
    "hypergiant_orgs",
    "anycast",
    "n_segments",
];

pub fn profile_tables(days: &[DayProfiles]) -> (Table, Table) {
    let mut t = Table::new(&PROFILE_COLUMNS);
    let mut po = Table::new(&["day", "prefix", "origin", "peers", "bucket"]);
    for dp in days {
        for (p, vis) in dp.profiles.iter().zip(&dp.visibility) {
            let (cat_a, cat_b) = match &p.business {
                Some(moasscope::enrich::BusinessPair::Matched(a, b)) => (a.clone(), b.clone()),
                Some(_) => (String::new(), String::new()),
                None => (NA.to_string(), NA.to_string()),
            };
            t.row([
                dp.day.to_string(),
                p.prefix.to_string(),
                p.prefix.family().to_string(),
                origins_cell(&p.origins),
                p.origin_count().to_string(),
                p.lifetime.max_lifetime_days.to_string(),
                f6(p.lifetime.observability),
                p.lifetime.longevity.to_string(),
                opt(p.rov_class, |c| c.to_string()),
                p.cidr_group.to_string(),
                p.visibility.min.to_string(),
                p.visibility.max.to_string(),
                p.visibility.diff.to_string(),
                opt(p.relationship, |r| r.class.to_string()),
                opt(p.relationship, |r| r.sibling_overlap.to_string()),
                opt(p.business.as_ref(), |b| b.status().to_string()),
                cat_a,
                cat_b,
                opt(p.hypergiant_orgs.as_ref(), |o| (!o.is_empty()).to_string()),
                opt(p.hypergiant_orgs.as_ref(), |o| o.iter().cloned().collect::<Vec<_>>().join(";")),
                opt(p.anycast, |a| a.to_string()),
                p.lifetime.segments.len().to_string(),
            ]);
            for (asn, peers) in vis {
                po.row([
                    dp.day.to_string(),
                    p.prefix.to_string(),
                    asn.to_string(),
                    peers.to_string(),
                    p.visibility.buckets[asn].label().to_string(),
                ]);
            }
        }
    }
    (t, po)
}

fn warn_missing(data: &Datasets) {
    for m in data.missing() {
        log::warn!("missing {m}; the dependent columns are NA");
    }
}

/// Writes `rov.csv`: per analysis day, every long-lived MOAS prefix with its
/// per-origin states and class.
pub fn rpki_stage(cfg: &RunConfig) -> anyhow::Result<Table> {
    let analysis = Analysis::load(cfg)?;
    let lifetimes = analysis.lifetimes(cfg.sensitivity, cfg.threshold_days);
    let mut data = Datasets::open(cfg)?;
    let mut t = Table::new(&["day", "prefix", "family", "origins", "states", "rov_class"]);
    for day in analysis_days(analysis.window) {
        let selected: Vec<&MoasObservation> = analysis.long_lived_on(day, &lifetimes).map(|(o, _)| o).collect();
        let roas = data.roas(day)?;
        for obs in selected {
            let (states, class) = match roas {
                Some(r) => {
                    let (s, c) = rov_of(obs, r, day);
                    (s.iter().map(|x| x.as_str()).collect::<Vec<_>>().join(" "), c.to_string())
                }
                None => (NA.to_string(), NA.to_string()),
            };
            t.row([
                day.to_string(),
                obs.prefix.to_string(),
                obs.prefix.family().to_string(),
                origins_cell(&obs.origin_set),
                states,
                class,
            ]);
        }
    }
    warn_missing(&data);
    write_csv(&cfg.out.join("rov.csv"), &t)?;
    Ok(t)
}

/// Writes `profiles.csv` and `po_visibility.csv`.
pub fn enrich_stage(cfg: &RunConfig) -> anyhow::Result<Vec<DayProfiles>> {
    let analysis = Analysis::load(cfg)?;
    let lifetimes = analysis.lifetimes(cfg.sensitivity, cfg.threshold_days);
    let mut data = Datasets::open(cfg)?;
    let days = build_profiles(cfg, &analysis, &lifetimes, &mut data)?;
    warn_missing(&data);
    let (profiles, po) = profile_tables(&days);
    write_csv(&cfg.out.join("profiles.csv"), &profiles)?;
    write_csv(&cfg.out.join("po_visibility.csv"), &po)?;
    Ok(days)
}

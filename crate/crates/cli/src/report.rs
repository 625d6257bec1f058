//! Figure tables and the reconciliation of report row counts.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use moasscope::enrich::{cidr_groups, BusinessPair, MoasProfile, RelClass, VisibilityBucket};
use moasscope::lifetime::{lifetime_cdf, LifetimeResult, Longevity};
use moasscope::rpki::MoasRovClass;
use moasscope::{Family, IpPrefix};

use crate::analysis::{analysis_days, build_profiles, lifetime_knee, Analysis, DayProfiles, Datasets};
use crate::config::{usage, RunConfig};
use crate::output::{f6, read_csv, write_csv, Table, NA};

pub const FIGURES: [&str; 14] = [
    "fig1",
    "fig2-lifetime",
    "fig2-observability",
    "fig3",
    "fig4",
    "fig5",
    "fig6",
    "fig7-left",
    "fig7-right",
    "fig8",
    "fig9",
    "fig10",
    "fig11",
    "hypergiant-anycast",
];

const FAMILIES: [Family; 2] = [Family::V4, Family::V6];
const FIG2_SENSITIVITIES: [u32; 3] = [0, 1, 3];

struct Inputs<'a> {
    cfg: &'a RunConfig,
    analysis: &'a Analysis,
    lifetimes: &'a BTreeMap<IpPrefix, LifetimeResult>,
    days: &'a [DayProfiles],
}

impl Inputs<'_> {
    fn reference(&self) -> Option<&DayProfiles> {
        self.days.last()
    }
}

fn count_by<K: Ord>(keys: impl IntoIterator<Item = K>) -> BTreeMap<K, u64> {
    let mut m = BTreeMap::new();
    for k in keys {
        *m.entry(k).or_insert(0) += 1;
    }
    m
}

/// Sorted distinct values with the fraction of the population at or below
/// each.
fn empirical_cdf(values: &mut [f64]) -> Vec<(f64, f64)> {
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, v) in values.iter().enumerate() {
        let y = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == *v => last.1 = y,
            _ => out.push((*v, y)),
        }
    }
    out
}

fn fig1(x: &Inputs) -> Table {
    let mut t = Table::new(&["day", "family", "moas_prefixes", "long_lived_moas"]);
    for day in x.analysis.days() {
        for fam in FAMILIES {
            let (mut moas, mut long) = (0u64, 0u64);
            for (p, tl) in x.analysis.timelines.iter().filter(|(p, _)| p.family() == fam) {
                if tl.days.contains_key(&day) {
                    moas += 1;
                    long += (x.lifetimes[p].longevity == Longevity::LongLived) as u64;
                }
            }
            t.row([day.to_string(), fam.to_string(), moas.to_string(), long.to_string()]);
        }
    }
    t
}

fn fig2_lifetime(x: &Inputs) -> Table {
    let mut t = Table::new(&["sensitivity", "family", "days", "cdf"]);
    let span = ((x.analysis.window.1 - x.analysis.window.0).num_days() + 1).max(2) as u32;
    for s in FIG2_SENSITIVITIES {
        let results = x.analysis.lifetimes(s, x.cfg.threshold_days);
        for fam in FAMILIES {
            let l: Vec<u32> = results.values().filter(|r| r.family() == fam).map(|r| r.max_lifetime_days).collect();
            let Ok(cdf) = lifetime_cdf(&l, span) else { continue };
            for (d, y) in cdf {
                t.row([s.to_string(), fam.to_string(), (d as u32).to_string(), f6(y)]);
            }
        }
    }
    t
}

fn fig2_observability(x: &Inputs) -> Table {
    let mut t = Table::new(&["family", "observability", "cdf"]);
    for fam in FAMILIES {
        let mut v: Vec<f64> = x.lifetimes.values().filter(|r| r.family() == fam).map(|r| r.observability).collect();
        for (o, y) in empirical_cdf(&mut v) {
            t.row([fam.to_string(), f6(o), f6(y)]);
        }
    }
    t
}

fn fig3(x: &Inputs) -> Table {
    let mut t = Table::new(&["family", "kind", "days", "value"]);
    let cfg = x.cfg.knee_config();
    let groups: [(&str, Option<Family>); 3] = [("v4", Some(Family::V4)), ("v6", Some(Family::V6)), ("all", None)];
    for (label, fam) in groups {
        let l: Vec<u32> = x
            .lifetimes
            .values()
            .filter(|r| fam.is_none_or(|f| r.family() == f))
            .map(|r| r.max_lifetime_days)
            .collect();
        let Ok(cdf) = lifetime_cdf(&l, cfg.cap_days) else { continue };
        for (d, y) in cdf {
            t.row([label.to_string(), "cdf".to_string(), (d as u32).to_string(), f6(y)]);
        }
        match lifetime_knee(&l, &cfg) {
            Ok(k) => {
                t.row([label.to_string(), "knee".to_string(), f6(k.knee), f6(k.short_fraction)]);
                t.row([label.to_string(), "oracle".to_string(), f6(k.oracle), NA.to_string()]);
            }
            Err(_) => t.row([label.to_string(), "knee".to_string(), NA.to_string(), NA.to_string()]),
        }
    }
    t
}

fn fig4(x: &Inputs) -> Table {
    let mut t = Table::new(&["date", "slot", "family", "prefixes", "moas", "fraction"]);
    for (key, m) in &x.analysis.metas {
        for fam in FAMILIES {
            let (p, mo) = (m.counts.prefixes(fam), m.counts.moas(fam));
            let frac = if p == 0 { NA.to_string() } else { f6(mo as f64 / p as f64) };
            t.row([key.date.to_string(), key.slot.to_string(), fam.to_string(), p.to_string(), mo.to_string(), frac]);
        }
    }
    t
}

/// One row per (day, family, label) with zero rows kept, so every series is
/// present for plotting.
fn over_time<F>(x: &Inputs, header: &[&str], labels: &dyn Fn(Family) -> Vec<String>, key: F) -> Table
where
    F: Fn(&MoasProfile, &BTreeMap<moasscope::Asn, u32>) -> Vec<String>,
{
    let mut t = Table::new(header);
    for dp in x.days {
        for fam in FAMILIES {
            let counts = count_by(
                dp.profiles
                    .iter()
                    .zip(&dp.visibility)
                    .filter(|(p, _)| p.prefix.family() == fam)
                    .flat_map(|(p, v)| key(p, v)),
            );
            let mut all = labels(fam);
            for k in counts.keys() {
                if !all.contains(k) {
                    all.push(k.clone());
                }
            }
            for l in all {
                let n = counts.get(&l).copied().unwrap_or(0);
                t.row([dp.day.to_string(), fam.to_string(), l, n.to_string()]);
            }
        }
    }
    t
}

fn fig5(x: &Inputs) -> Table {
    let labels = |_| MoasRovClass::ALL.iter().map(|c| c.to_string()).chain([NA.to_string()]).collect();
    over_time(x, &["day", "family", "rov_class", "prefixes"], &labels, |p, _| {
        vec![p.rov_class.map_or_else(|| NA.to_string(), |c| c.to_string())]
    })
}

fn fig6(x: &Inputs) -> Table {
    let labels = |f| cidr_groups(f).iter().map(|g| g.to_string()).collect();
    over_time(x, &["day", "family", "cidr_group", "prefixes"], &labels, |p, _| vec![p.cidr_group.to_string()])
}

fn fig8(x: &Inputs) -> Table {
    let labels = |_| VisibilityBucket::ALL.iter().map(|b| b.label().to_string()).collect();
    over_time(x, &["day", "family", "bucket", "po_pairs"], &labels, |_, vis| {
        vis.values().map(|v| VisibilityBucket::of(*v).label().to_string()).collect()
    })
}

fn fig10(x: &Inputs) -> Table {
    let labels = |_| RelClass::ALL.iter().map(|c| c.to_string()).chain([NA.to_string()]).collect();
    over_time(x, &["day", "family", "rel_class", "prefixes"], &labels, |p, _| {
        vec![p.relationship.map_or_else(|| NA.to_string(), |r| r.class.to_string())]
    })
}

fn fig7_left(x: &Inputs) -> Table {
    let mut t = Table::new(&["family", "origins", "prefixes"]);
    if let Some(dp) = x.reference() {
        for fam in FAMILIES {
            let h = count_by(dp.profiles.iter().filter(|p| p.prefix.family() == fam).map(|p| p.origin_count()));
            for (n, c) in h {
                t.row([fam.to_string(), n.to_string(), c.to_string()]);
            }
        }
    }
    t
}

fn fig7_right(x: &Inputs) -> Table {
    let mut t = Table::new(&["family", "origin_set", "prefixes"]);
    if let Some(dp) = x.reference() {
        for fam in FAMILIES {
            let h = count_by(dp.profiles.iter().filter(|p| p.prefix.family() == fam).map(|p| p.origins.clone()));
            for (set, c) in h {
                let set = set.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(" ");
                t.row([fam.to_string(), set, c.to_string()]);
            }
        }
    }
    t
}

fn fig9(x: &Inputs) -> Table {
    let mut t = Table::new(&["family", "metric", "value", "cdf"]);
    if let Some(dp) = x.reference() {
        for fam in FAMILIES {
            let ps: Vec<&MoasProfile> = dp.profiles.iter().filter(|p| p.prefix.family() == fam).collect();
            let metrics: [(&str, fn(&MoasProfile) -> u32); 3] =
                [("min", |p| p.visibility.min), ("max", |p| p.visibility.max), ("diff", |p| p.visibility.diff)];
            for (name, get) in metrics {
                let mut v: Vec<f64> = ps.iter().map(|p| get(p) as f64).collect();
                for (val, y) in empirical_cdf(&mut v) {
                    t.row([fam.to_string(), name.to_string(), (val as u32).to_string(), f6(y)]);
                }
            }
        }
    }
    t
}

fn matched_pairs(dp: &DayProfiles) -> Vec<(String, String)> {
    dp.profiles
        .iter()
        .filter_map(|p| match &p.business {
            Some(BusinessPair::Matched(a, b)) => Some((a.clone(), b.clone())),
            _ => None,
        })
        .collect()
}

fn fig11(x: &Inputs) -> Table {
    let pairs = x.reference().map(matched_pairs).unwrap_or_default();
    let cats: Vec<String> =
        pairs.iter().flat_map(|(a, b)| [a.clone(), b.clone()]).collect::<BTreeSet<_>>().into_iter().collect();
    let mut header = vec!["category".to_string()];
    header.extend(cats.iter().cloned());
    let mut t = Table::new(&header);
    let counts = count_by(pairs.iter().cloned());
    for r in &cats {
        let mut row = vec![r.clone()];
        for c in &cats {
            let key = if r <= c { (r.clone(), c.clone()) } else { (c.clone(), r.clone()) };
            row.push(counts.get(&key).copied().unwrap_or(0).to_string());
        }
        t.row(row);
    }
    t
}

fn hypergiant_anycast(x: &Inputs) -> Table {
    let mut t = Table::new(&["day", "family", "profiles", "hypergiant", "anycast", "anycast_fraction"]);
    for dp in x.days {
        for fam in FAMILIES {
            let ps: Vec<&MoasProfile> = dp.profiles.iter().filter(|p| p.prefix.family() == fam).collect();
            let n = ps.len();
            let hg = if ps.iter().any(|p| p.hypergiant_orgs.is_none()) {
                NA.to_string()
            } else {
                ps.iter().filter(|p| p.hypergiant_orgs.as_ref().is_some_and(|o| !o.is_empty())).count().to_string()
            };
            let (ac, frac) = if ps.iter().any(|p| p.anycast.is_none()) {
                (NA.to_string(), NA.to_string())
            } else {
                let a = ps.iter().filter(|p| p.anycast == Some(true)).count();
                (a.to_string(), if n == 0 { NA.to_string() } else { f6(a as f64 / n as f64) })
            };
            t.row([dp.day.to_string(), fam.to_string(), n.to_string(), hg, ac, frac]);
        }
    }
    t
}

fn figure(id: &str, x: &Inputs) -> Table {
    match id {
        "fig1" => fig1(x),
        "fig2-lifetime" => fig2_lifetime(x),
        "fig2-observability" => fig2_observability(x),
        "fig3" => fig3(x),
        "fig4" => fig4(x),
        "fig5" => fig5(x),
        "fig6" => fig6(x),
        "fig7-left" => fig7_left(x),
        "fig7-right" => fig7_right(x),
        "fig8" => fig8(x),
        "fig9" => fig9(x),
        "fig10" => fig10(x),
        "fig11" => fig11(x),
        "hypergiant-anycast" => hypergiant_anycast(x),
        _ => unreachable!("figure ids are checked by the caller"),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub check: String,
    pub scope: String,
    pub expected: String,
    pub actual: String,
    pub pass: Option<bool>,
}

impl Check {
    fn eq(check: &str, scope: impl Into<String>, expected: u64, actual: u64) -> Self {
        Check {
            check: check.to_string(),
            scope: scope.into(),
            expected: expected.to_string(),
            actual: actual.to_string(),
            pass: Some(expected == actual),
        }
    }

    fn skipped(check: &str, scope: impl Into<String>, why: &str) -> Self {
        Check { check: check.to_string(), scope: scope.into(), expected: why.to_string(), actual: NA.to_string(), pass: None }
    }

    fn status(&self) -> &'static str {
        match self.pass {
            Some(true) => "pass",
            Some(false) => "fail",
            None => "skip",
        }
    }
}

/// Sum of the `value` column over rows whose `key` column equals `want`
/// (all rows when `key` is `None`).
fn column_sum(t: &Table, value: &str, key: Option<(&str, &str)>) -> u64 {
    let vi = t.column(value).expect("known column");
    let ki = key.map(|(k, v)| (t.column(k).expect("known column"), v));
    t.rows
        .iter()
        .filter(|r| ki.is_none_or(|(i, v)| r[i] == v))
        .map(|r| r[vi].parse::<u64>().unwrap_or(0))
        .sum()
}

fn reconcile(x: &Inputs, figs: &BTreeMap<&str, Table>, out: &Path) -> anyhow::Result<Vec<Check>> {
    let mut checks = Vec::new();
    let a = x.analysis;

    let mut ingest_ok = true;
    let (mut total, mut parts) = (0u64, 0u64);
    let (mut f_in, mut f_parts) = (0u64, 0u64);
    let mut filter_ok = true;
    let mut moas_ok = true;
    for m in a.metas.values() {
        for f in &m.files {
            let s = &f.ingest;
            total += s.total;
            parts += s.emitted + s.as_set_origins + s.malformed;
            ingest_ok &= s.total == s.emitted + s.as_set_origins + s.malformed;
        }
        f_in += m.filter.input;
        f_parts += m.filter.kept + m.filter.dropped_total();
        filter_ok &= m.filter.input == m.filter.kept + m.filter.dropped_total();
        moas_ok &= FAMILIES.iter().all(|f| m.counts.moas(*f) <= m.counts.prefixes(*f));
    }
    let mut c = Check::eq("ingest-partition", "all-files", total, parts);
    c.pass = Some(ingest_ok && total == parts);
    checks.push(c);
    let mut c = Check::eq("filter-partition", "all-snapshots", f_in, f_parts);
    c.pass = Some(filter_ok && f_in == f_parts);
    checks.push(c);
    let mut c = Check::eq("moas-within-prefixes", "all-snapshots", 1, moas_ok as u64);
    c.pass = Some(moas_ok);
    checks.push(c);

    for fam in FAMILIES {
        let all: Vec<&LifetimeResult> = x.lifetimes.values().filter(|r| r.family() == fam).collect();
        let short = all.iter().filter(|r| r.longevity == Longevity::ShortLived).count() as u64;
        let long = all.iter().filter(|r| r.longevity == Longevity::LongLived).count() as u64;
        checks.push(Check::eq("longevity-partition", fam.as_str(), all.len() as u64, short + long));
    }
    let lifetimes_csv = out.join("lifetimes.csv");
    if lifetimes_csv.is_file() {
        let t = read_csv(&lifetimes_csv)?;
        checks.push(Check::eq("lifetimes-rows", "lifetimes.csv", a.timelines.len() as u64, t.len() as u64));
    } else {
        checks.push(Check::skipped("lifetimes-rows", "lifetimes.csv", "absent"));
    }

    let profiles_csv = out.join("profiles.csv");
    let profile_rows = if profiles_csv.is_file() { Some(read_csv(&profiles_csv)?) } else { None };
    let rov_csv = out.join("rov.csv");
    let rov_rows = if rov_csv.is_file() { Some(read_csv(&rov_csv)?) } else { None };
    for dp in x.days {
        let day = dp.day.to_string();
        let expected = a.long_lived_on(dp.day, x.lifetimes).count() as u64;
        match &profile_rows {
            Some(t) => {
                let day_col = t.column("day").unwrap_or(0);
                let n = t.rows.iter().filter(|r| r[day_col] == day).count() as u64;
                checks.push(Check::eq("profiles-rows", format!("profiles.csv {day}"), expected, n));
            }
            None => checks.push(Check::skipped("profiles-rows", format!("profiles.csv {day}"), "absent")),
        }
        if let Some(t) = &rov_rows {
            let day_col = t.column("day").unwrap_or(0);
            let n = t.rows.iter().filter(|r| r[day_col] == day).count() as u64;
            checks.push(Check::eq("rov-rows", format!("rov.csv {day}"), expected, n));
        }
        for fam in FAMILIES {
            let scope = format!("{day} {fam}");
            let ps: Vec<(&MoasProfile, &BTreeMap<moasscope::Asn, u32>)> =
                dp.profiles.iter().zip(&dp.visibility).filter(|(p, _)| p.prefix.family() == fam).collect();
            let n = ps.len() as u64;
            let po: u64 = ps.iter().map(|(_, v)| v.len() as u64).sum();
            let sum_in = |fig: &str, value: &str| {
                figs.get(fig).map(|t| {
                    let di = t.column("day").expect("day column");
                    let fi = t.column("family").expect("family column");
                    let vi = t.column(value).expect("value column");
                    t.rows
                        .iter()
                        .filter(|r| r[di] == day && r[fi] == fam.as_str())
                        .map(|r| r[vi].parse::<u64>().unwrap_or(0))
                        .sum::<u64>()
                })
            };
            for (check, fig, value, expected) in [
                ("rov-class-partition", "fig5", "prefixes", n),
                ("cidr-group-partition", "fig6", "prefixes", n),
                ("visibility-bucket-partition", "fig8", "po_pairs", po),
                ("relationship-partition", "fig10", "prefixes", n),
            ] {
                if let Some(actual) = sum_in(fig, value) {
                    checks.push(Check::eq(check, scope.clone(), expected, actual));
                }
            }
        }
    }

    if let Some(dp) = x.reference() {
        let day = dp.day.to_string();
        for fam in FAMILIES {
            let n = dp.profiles.iter().filter(|p| p.prefix.family() == fam).count() as u64;
            for fig in ["fig7-left", "fig7-right"] {
                if let Some(t) = figs.get(fig) {
                    let actual = column_sum(t, "prefixes", Some(("family", fam.as_str())));
                    checks.push(Check::eq(&format!("{fig}-total"), format!("{day} {fam}"), n, actual));
                }
            }
        }
        if let Some(t) = figs.get("fig11") {
            // the matrix is symmetric, so only the upper triangle counts pairs once
            let mut upper = 0u64;
            for (i, row) in t.rows.iter().enumerate() {
                for cell in &row[i + 1..] {
                    upper += cell.parse::<u64>().unwrap_or(0);
                }
            }
            let symmetric = t.rows.iter().enumerate().all(|(i, r)| {
                t.rows.iter().enumerate().all(|(j, s)| r[j + 1] == s[i + 1])
            });
            let mut c = Check::eq("fig11-matched-pairs", day, matched_pairs(dp).len() as u64, upper);
            c.pass = c.pass.map(|p| p && symmetric);
            checks.push(c);
        }
    }
    Ok(checks)
}

#[derive(Debug, Clone, Default)]
pub struct ReportOutcome {
    pub written: Vec<String>,
    pub failures: usize,
}

/// Writes `figures/<id>.csv` for the requested figure (all when `None`)
/// and, for a full report, `reconciliation.csv`.
pub fn report(cfg: &RunConfig, only: Option<&str>) -> anyhow::Result<ReportOutcome> {
    if let Some(id) = only {
        if !FIGURES.contains(&id) {
            return Err(usage(format!("unknown figure {id:?}; known: {}", FIGURES.join(", "))));
        }
    }
    let analysis = Analysis::load(cfg)?;
    let lifetimes = analysis.lifetimes(cfg.sensitivity, cfg.threshold_days);
    let mut data = Datasets::open(cfg)?;
    let days = build_profiles(cfg, &analysis, &lifetimes, &mut data)?;
    debug_assert_eq!(days.len(), analysis_days(analysis.window).len());
    let x = Inputs { cfg, analysis: &analysis, lifetimes: &lifetimes, days: &days };

    let ids: Vec<&str> = match only {
        Some(id) => vec![FIGURES.iter().copied().find(|f| *f == id).expect("checked above")],
        None => FIGURES.to_vec(),
    };
    let mut outcome = ReportOutcome::default();
    let mut figs = BTreeMap::new();
    for id in ids {
        let t = figure(id, &x);
        let rel = format!("figures/{id}.csv");
        write_csv(&cfg.out.join(&rel), &t)?;
        outcome.written.push(rel);
        figs.insert(id, t);
    }
    if only.is_none() {
        let checks = reconcile(&x, &figs, &cfg.out)?;
        let mut t = Table::new(&["check", "scope", "expected", "actual", "status"]);
        for c in &checks {
            t.row([c.check.clone(), c.scope.clone(), c.expected.clone(), c.actual.clone(), c.status().to_string()]);
        }
        write_csv(&cfg.out.join("reconciliation.csv"), &t)?;
        outcome.written.push("reconciliation.csv".to_string());
        outcome.failures = checks.iter().filter(|c| c.pass == Some(false)).count();
        for c in checks.iter().filter(|c| c.pass == Some(false)) {
            log::error!("reconciliation failed: {} [{}] expected {} got {}", c.check, c.scope, c.expected, c.actual);
        }
    }
    Ok(outcome)
}

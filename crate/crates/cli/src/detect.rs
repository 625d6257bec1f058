//! Detection stage: RIB files → aligned snapshots → filtered records → MOAS
//! observations in the store.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, Read};
use std::path::{Path, PathBuf};

use anyhow::Context;
use chrono::{DateTime, NaiveDate, Utc};
use moasscope::filters::{filter_records, BogonTables, FilterKind, FilterStats};
use moasscope::ingest::{align_snapshot, parse_mrt_rib, parse_normalized, SnapshotKey};
use moasscope::io::{decompressing, list_files, timestamp_in_name};
use moasscope::moas::{build_origin_views, detect_moas, snapshot_counts};
use moasscope::RibRecord;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::config::{relative, usage, RunConfig};
use crate::output::{write_csv, Table};
use crate::store::{FileEntry, SnapshotMeta, Store, STORE_FORMAT};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DetectSummary {
    pub files: usize,
    pub rejected: usize,
    pub snapshots: usize,
    pub reused: usize,
    pub window: Option<(NaiveDate, NaiveDate)>,
}

struct Candidate {
    path: PathBuf,
    rel: String,
    collector: String,
    sha256: String,
    ts: Option<DateTime<Utc>>,
}

/// Collector of a RIB file: its top-level directory below the RIB root, or
/// the part of the file name before the first dot for files placed directly
/// in the root.
fn collector_of(rel: &str) -> String {
    match rel.split_once('/') {
        Some((dir, _)) => dir.to_string(),
        None => rel.split('.').next().unwrap_or(rel).to_string(),
    }
}

fn is_normalized(head: &[u8]) -> bool {
    head.iter().find(|b| !b.is_ascii_whitespace()) == Some(&b'{')
}

/// Dump time from the first record: the `ts` field of the first JSON line or
/// the MRT common-header timestamp.
fn peek_timestamp(bytes: &[u8]) -> Option<DateTime<Utc>> {
    let (_, mut r) = decompressing(bytes).ok()?;
    let head = r.fill_buf().ok()?;
    if is_normalized(head) {
        #[derive(serde::Deserialize)]
        struct Ts {
            ts: DateTime<Utc>,
        }
        let mut line = String::new();
        while line.trim().is_empty() {
            line.clear();
            if r.read_line(&mut line).ok()? == 0 {
                return None;
            }
        }
        serde_json::from_str::<Ts>(&line).ok().map(|t| t.ts)
    } else {
        let mut hdr = [0u8; 4];
        r.read_exact(&mut hdr).ok()?;
        DateTime::from_timestamp(u32::from_be_bytes(hdr) as i64, 0)
    }
}

fn parse_file(path: &Path, collector: &str) -> anyhow::Result<(Vec<RibRecord>, moasscope::ingest::IngestStats)> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let (_, mut r) = decompressing(&bytes[..])?;
    let normalized = is_normalized(r.fill_buf()?);
    let parsed = if normalized {
        parse_normalized(r, collector).map_err(anyhow::Error::from)
    } else {
        parse_mrt_rib(r, collector).map_err(anyhow::Error::from)
    };
    parsed.with_context(|| format!("decoding {}", path.display()))
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn fingerprint(config_fp: &str, files: &[&Candidate]) -> String {
    let mut h = Sha256::new();
    h.update(config_fp.as_bytes());
    for f in files {
        h.update(format!("\n{}\0{}\0{}", f.rel, f.collector, f.sha256).as_bytes());
    }
    hex::encode(h.finalize())
}

fn process(key: SnapshotKey, files: &[&Candidate], tables: &BogonTables, fp: String) -> anyhow::Result<(SnapshotMeta, Vec<moasscope::moas::MoasObservation>)> {
    let mut entries = Vec::new();
    let mut filter = FilterStats::default();
    let mut kept = Vec::new();
    for f in files {
        let (records, ingest) = parse_file(&f.path, &f.collector)?;
        let (k, stats) = filter_records(records, tables);
        filter.merge(&stats);
        kept.extend(k);
        entries.push(FileEntry { path: f.rel.clone(), collector: f.collector.clone(), sha256: f.sha256.clone(), ingest });
    }
    let views = build_origin_views(key, &kept);
    let observations = detect_moas(views.values());
    let counts = snapshot_counts(&views, &kept);
    let meta = SnapshotMeta { format: STORE_FORMAT, fingerprint: fp, snapshot: key, files: entries, filter, counts };
    Ok((meta, observations))
}

/// Runs detection. `shuffle` permutes file discovery order (used to check
/// that nothing downstream depends on it).
pub fn detect(cfg: &RunConfig, shuffle: Option<u64>) -> anyhow::Result<DetectSummary> {
    let ribs = cfg.ribs_dir().ok_or_else(|| usage("no RIB directory given (--ribs or --data)"))?;
    if !ribs.is_dir() {
        return Err(usage(format!("RIB directory {} does not exist", ribs.display())));
    }
    let (tables, table_text) = cfg.bogon_tables()?;
    let slots = cfg.slot_config();
    let pool = cfg.thread_pool()?;

    let mut paths = list_files(&ribs)?;
    if let Some(seed) = shuffle {
        paths.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }

    let candidates: Vec<Candidate> = pool.install(|| {
        paths
            .par_iter()
            .map(|path| {
                let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
                let rel = relative(path, &ribs);
                let ts = timestamp_in_name(path).or_else(|| peek_timestamp(&bytes));
                Ok(Candidate { path: path.clone(), collector: collector_of(&rel), rel, sha256: sha256_hex(&bytes), ts })
            })
            .collect::<anyhow::Result<Vec<_>>>()
    })?;

    let mut rejected: BTreeMap<String, &'static str> = BTreeMap::new();
    let mut by_key: BTreeMap<SnapshotKey, Vec<&Candidate>> = BTreeMap::new();
    for c in &candidates {
        match c.ts.map(|ts| align_snapshot(ts, &slots)) {
            None => {
                rejected.insert(c.rel.clone(), "no timestamp");
            }
            Some(None) => {
                rejected.insert(c.rel.clone(), "outside slot tolerance");
            }
            Some(Some(key)) => by_key.entry(key).or_default().push(c),
        }
    }
    let start = cfg.start.or_else(|| by_key.keys().next().map(|k| k.date));
    let end = cfg.end.or_else(|| by_key.keys().next_back().map(|k| k.date));
    let (start, end) = match (start, end) {
        (Some(s), Some(e)) if s <= e => (s, e),
        (Some(s), Some(e)) => return Err(usage(format!("empty window: start {s} is after end {e}"))),
        _ => return Err(usage(format!("no usable RIB snapshots under {}", ribs.display()))),
    };
    by_key.retain(|k, files| {
        let inside = k.date >= start && k.date <= end;
        if !inside {
            for f in files.iter() {
                rejected.insert(f.rel.clone(), "outside window");
            }
        }
        inside
    });
    if by_key.is_empty() {
        return Err(usage(format!("no RIB snapshots between {start} and {end}")));
    }
    for files in by_key.values_mut() {
        files.sort_by(|a, b| a.rel.cmp(&b.rel));
    }

    let config_fp = format!(
        "store-format {STORE_FORMAT}\nslots {:?}\nbogons {}",
        slots,
        sha256_hex(table_text.as_bytes())
    );
    let store = Store::new(&cfg.out);
    fs::create_dir_all(store.dir())?;
    let keys: Vec<SnapshotKey> = by_key.keys().copied().collect();
    let results: Vec<(SnapshotMeta, bool)> = pool.install(|| {
        by_key
            .par_iter()
            .map(|(key, files)| {
                let fp = fingerprint(&config_fp, files);
                if let Some(meta) = store.cached(*key, &fp) {
                    return Ok((meta, true));
                }
                let (meta, observations) = process(*key, files, &tables, fp)?;
                store.write(&meta, &observations)?;
                Ok((meta, false))
            })
            .collect::<anyhow::Result<Vec<_>>>()
    })?;
    store.prune(&keys)?;

    if !rejected.is_empty() {
        log::warn!("{} of {} RIB files rejected; see rejected_files.csv", rejected.len(), candidates.len());
    }
    let metas: Vec<&SnapshotMeta> = results.iter().map(|(m, _)| m).collect();
    write_detect_tables(&cfg.out, &metas, &rejected)?;
    Ok(DetectSummary {
        files: candidates.len(),
        rejected: rejected.len(),
        snapshots: results.len(),
        reused: results.iter().filter(|(_, r)| *r).count(),
        window: Some((start, end)),
    })
}

fn write_detect_tables(out: &Path, metas: &[&SnapshotMeta], rejected: &BTreeMap<String, &str>) -> anyhow::Result<()> {
    let mut snapshots = Table::new(&[
        "date", "slot", "files", "records", "v4_prefixes", "v6_prefixes", "v4_moas", "v6_moas", "peers",
    ]);
    let mut ingest = Table::new(&["file", "collector", "date", "slot", "total", "emitted", "as_set_origins", "malformed"]);
    let mut header = vec!["date", "slot", "input", "kept"];
    header.extend(FilterKind::DROPS.iter().map(|k| k.as_str()));
    let mut filter = Table::new(&header);
    for m in metas {
        let (date, slot) = (m.snapshot.date.to_string(), m.snapshot.slot.to_string());
        let c = &m.counts;
        snapshots.row([
            date.clone(),
            slot.clone(),
            m.files.len().to_string(),
            m.filter.input.to_string(),
            c.v4_prefixes.to_string(),
            c.v6_prefixes.to_string(),
            c.v4_moas.to_string(),
            c.v6_moas.to_string(),
            c.peers.to_string(),
        ]);
        for f in &m.files {
            let s = &f.ingest;
            ingest.row([
                f.path.clone(),
                f.collector.clone(),
                date.clone(),
                slot.clone(),
                s.total.to_string(),
                s.emitted.to_string(),
                s.as_set_origins.to_string(),
                s.malformed.to_string(),
            ]);
        }
        let mut row = vec![date, slot, m.filter.input.to_string(), m.filter.kept.to_string()];
        row.extend(FilterKind::DROPS.iter().map(|k| m.filter.count(*k).to_string()));
        filter.row(row);
    }
    let mut rej = Table::new(&["file", "reason"]);
    for (f, reason) in rejected {
        rej.row([f.clone(), reason.to_string()]);
    }
    write_csv(&out.join("snapshots.csv"), &snapshots)?;
    write_csv(&out.join("ingest_stats.csv"), &ingest)?;
    write_csv(&out.join("filter_stats.csv"), &filter)?;
    write_csv(&out.join("rejected_files.csv"), &rej)?;
    Ok(())
}

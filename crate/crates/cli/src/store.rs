//! Per-snapshot observation cache: `observations/<date>_<slot>.jsonl` holds
//! the MOAS observations and `<date>_<slot>.meta.json` the counts and the
//! input fingerprint they were computed from.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use chrono::NaiveDate;
use moasscope::filters::FilterStats;
use moasscope::ingest::{IngestStats, SnapshotKey};
use moasscope::moas::{MoasObservation, SnapshotCounts};
use moasscope::{Asn, IpPrefix};
use serde::{Deserialize, Serialize};

/// Bumped whenever the store layout or detection semantics change.
pub const STORE_FORMAT: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct StoredOrigin {
    asn: Asn,
    peers: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct StoredLine {
    prefix: IpPrefix,
    origins: Vec<StoredOrigin>,
    date: NaiveDate,
    slot: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the RIB directory.
    pub path: String,
    pub collector: String,
    pub sha256: String,
    pub ingest: IngestStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub format: u32,
    pub fingerprint: String,
    pub snapshot: SnapshotKey,
    pub files: Vec<FileEntry>,
    pub filter: FilterStats,
    pub counts: SnapshotCounts,
}

pub struct Store {
    dir: PathBuf,
}

impl Store {
    pub fn new(out: &Path) -> Self {
        Store { dir: out.join("observations") }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn observations_path(&self, key: SnapshotKey) -> PathBuf {
        self.dir.join(format!("{key}.jsonl"))
    }

    pub fn meta_path(&self, key: SnapshotKey) -> PathBuf {
        self.dir.join(format!("{key}.meta.json"))
    }

    /// The cached meta for `key` if it was built from `fingerprint` and its
    /// observation file is present.
    pub fn cached(&self, key: SnapshotKey, fingerprint: &str) -> Option<SnapshotMeta> {
        let text = fs::read_to_string(self.meta_path(key)).ok()?;
        let meta: SnapshotMeta = serde_json::from_str(&text).ok()?;
        (meta.format == STORE_FORMAT && meta.fingerprint == fingerprint && self.observations_path(key).is_file())
            .then_some(meta)
    }

    pub fn write(&self, meta: &SnapshotMeta, observations: &[MoasObservation]) -> anyhow::Result<()> {
        fs::create_dir_all(&self.dir)?;
        let mut buf = Vec::new();
        for obs in observations {
            let line = StoredLine {
                prefix: obs.prefix,
                origins: obs.visibility.iter().map(|(asn, peers)| StoredOrigin { asn: *asn, peers: *peers }).collect(),
                date: obs.snapshot.date,
                slot: obs.snapshot.slot,
            };
            serde_json::to_writer(&mut buf, &line)?;
            buf.push(b'\n');
        }
        let key = meta.snapshot;
        fs::write(self.observations_path(key), buf)?;
        let mut f = fs::File::create(self.meta_path(key))?;
        serde_json::to_writer_pretty(&mut f, meta)?;
        f.write_all(b"\n")?;
        Ok(())
    }

    /// Removes store files for snapshots not in `keep`.
    pub fn prune(&self, keep: &[SnapshotKey]) -> anyhow::Result<()> {
        if !self.dir.is_dir() {
            return Ok(());
        }
        let wanted: Vec<String> = keep.iter().map(|k| k.to_string()).collect();
        for entry in fs::read_dir(&self.dir)? {
            let path = entry?.path();
            let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            let stem = name.trim_end_matches(".meta.json").trim_end_matches(".jsonl");
            if !wanted.iter().any(|w| w == stem) {
                fs::remove_file(&path).with_context(|| format!("removing stale {}", path.display()))?;
            }
        }
        Ok(())
    }

    /// All metas, keyed and therefore sorted by snapshot.
    pub fn metas(&self) -> anyhow::Result<BTreeMap<SnapshotKey, SnapshotMeta>> {
        let mut out = BTreeMap::new();
        if !self.dir.is_dir() {
            return Ok(out);
        }
        for entry in fs::read_dir(&self.dir)? {
            let path = entry?.path();
            if !path.to_string_lossy().ends_with(".meta.json") {
                continue;
            }
            let text = fs::read_to_string(&path)?;
            let meta: SnapshotMeta =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            out.insert(meta.snapshot, meta);
        }
        Ok(out)
    }

    pub fn observations(&self, key: SnapshotKey) -> anyhow::Result<Vec<MoasObservation>> {
        let path = self.observations_path(key);
        let f = fs::File::open(&path).with_context(|| format!("opening {}", path.display()))?;
        let mut out = Vec::new();
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let l: StoredLine =
                serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 1))?;
            out.push(MoasObservation {
                prefix: l.prefix,
                snapshot: SnapshotKey::new(l.date, l.slot),
                origin_set: l.origins.iter().map(|o| o.asn).collect(),
                visibility: l.origins.iter().map(|o| (o.asn, o.peers)).collect(),
            });
        }
        Ok(out)
    }
}

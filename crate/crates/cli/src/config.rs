//! Run configuration: a TOML file (named by `MOASSCOPE_CONFIG` or `--config`)
//! with command-line overrides on top.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::Context;
use chrono::NaiveDate;
use moasscope::enrich::AnycastMatch;
use moasscope::filters::{BogonTables, BUILTIN_TABLE};
use moasscope::ingest::SlotConfig;
use moasscope::lifetime::{KneeConfig, DEFAULT_SENSITIVITY, DEFAULT_THRESHOLD_DAYS};
use serde::Deserialize;

pub const CONFIG_ENV: &str = "MOASSCOPE_CONFIG";

/// Bad invocation or unusable inputs; the binary exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AnycastMode {
    #[default]
    Exact,
    Contains,
}

impl From<AnycastMode> for AnycastMatch {
    fn from(m: AnycastMode) -> Self {
        match m {
            AnycastMode::Exact => AnycastMatch::Exact,
            AnycastMode::Contains => AnycastMatch::Contains,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Dataset root; unset input directories default to its subdirectories
    /// `ribs`, `roas`, `as-rel`, `as2org`, `asdb`, `hypergiants`, `anycast`.
    pub data: Option<PathBuf>,
    pub ribs: Option<PathBuf>,
    pub roas: Option<PathBuf>,
    pub as_rel: Option<PathBuf>,
    pub as2org: Option<PathBuf>,
    pub asdb: Option<PathBuf>,
    pub hypergiants: Option<PathBuf>,
    pub anycast: Option<PathBuf>,
    /// Bogon table file; the shipped table when unset.
    pub bogons: Option<PathBuf>,
    pub start: Option<NaiveDate>,
    pub end: Option<NaiveDate>,
    pub slots_per_day: u8,
    pub sensitivity: u32,
    pub threshold_days: u32,
    pub cap_days: u32,
    pub kneedle_sensitivity: f64,
    pub anycast_match: AnycastMode,
    /// 0 means one worker per core.
    pub workers: usize,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: None,
            ribs: None,
            roas: None,
            as_rel: None,
            as2org: None,
            asdb: None,
            hypergiants: None,
            anycast: None,
            bogons: None,
            start: None,
            end: None,
            slots_per_day: 1,
            sensitivity: DEFAULT_SENSITIVITY,
            threshold_days: DEFAULT_THRESHOLD_DAYS,
            cap_days: KneeConfig::default().cap_days,
            kneedle_sensitivity: KneeConfig::default().sensitivity,
            anycast_match: AnycastMode::Exact,
            workers: 0,
            out: PathBuf::from("moasscope-out"),
        }
    }
}

/// Flag values that override the file.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct Overrides {
    /// Run-config TOML file [env: MOASSCOPE_CONFIG]
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Dataset root holding ribs/, roas/, as-rel/, ... subdirectories
    #[arg(long, global = true)]
    pub data: Option<PathBuf>,
    #[arg(long, global = true)]
    pub ribs: Option<PathBuf>,
    #[arg(long, global = true)]
    pub roas: Option<PathBuf>,
    #[arg(long, global = true)]
    pub as_rel: Option<PathBuf>,
    #[arg(long, global = true)]
    pub as2org: Option<PathBuf>,
    #[arg(long, global = true)]
    pub asdb: Option<PathBuf>,
    #[arg(long, global = true)]
    pub hypergiants: Option<PathBuf>,
    #[arg(long, global = true)]
    pub anycast: Option<PathBuf>,
    #[arg(long, global = true)]
    pub bogons: Option<PathBuf>,
    /// First day of the study window (YYYY-MM-DD)
    #[arg(long, global = true)]
    pub start: Option<NaiveDate>,
    /// Last day of the study window (YYYY-MM-DD)
    #[arg(long, global = true)]
    pub end: Option<NaiveDate>,
    #[arg(long, global = true)]
    pub slots_per_day: Option<u8>,
    /// Missing days bridged inside one lifetime segment
    #[arg(long, global = true)]
    pub sensitivity: Option<u32>,
    /// Minimum max-lifetime (days) of a long-lived MOAS
    #[arg(long, global = true)]
    pub threshold_days: Option<u32>,
    #[arg(long, global = true)]
    pub cap_days: Option<u32>,
    #[arg(long, global = true)]
    pub kneedle_sensitivity: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub anycast_match: Option<AnycastMode>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        toml::from_str(text).map_err(|e| usage(format!("bad run config: {e}")))
    }

    /// Reads the file named by `--config` or the environment, then applies
    /// the flags.
    pub fn resolve(o: &Overrides) -> anyhow::Result<Self> {
        let path = o.config.clone().or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(&p)
                    .map_err(|e| usage(format!("cannot read run config {}: {e}", p.display())))?;
                Self::from_toml(&text)?
            }
            None => RunConfig::default(),
        };
        cfg.apply(o);
        cfg.check()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        fn set<T: Clone>(dst: &mut T, v: &Option<T>) {
            if let Some(v) = v {
                *dst = v.clone();
            }
        }
        fn set_opt<T: Clone>(dst: &mut Option<T>, v: &Option<T>) {
            if v.is_some() {
                *dst = v.clone();
            }
        }
        set_opt(&mut self.data, &o.data);
        set_opt(&mut self.ribs, &o.ribs);
        set_opt(&mut self.roas, &o.roas);
        set_opt(&mut self.as_rel, &o.as_rel);
        set_opt(&mut self.as2org, &o.as2org);
        set_opt(&mut self.asdb, &o.asdb);
        set_opt(&mut self.hypergiants, &o.hypergiants);
        set_opt(&mut self.anycast, &o.anycast);
        set_opt(&mut self.bogons, &o.bogons);
        set_opt(&mut self.start, &o.start);
        set_opt(&mut self.end, &o.end);
        set(&mut self.slots_per_day, &o.slots_per_day);
        set(&mut self.sensitivity, &o.sensitivity);
        set(&mut self.threshold_days, &o.threshold_days);
        set(&mut self.cap_days, &o.cap_days);
        set(&mut self.kneedle_sensitivity, &o.kneedle_sensitivity);
        set(&mut self.anycast_match, &o.anycast_match);
        set(&mut self.workers, &o.workers);
        set(&mut self.out, &o.out);
    }

    pub fn check(&self) -> anyhow::Result<()> {
        if let (Some(s), Some(e)) = (self.start, self.end) {
            if s > e {
                return Err(usage(format!("empty window: start {s} is after end {e}")));
            }
        }
        if self.slots_per_day == 0 || self.slots_per_day > 24 {
            return Err(usage(format!("slots-per-day must be 1..=24, got {}", self.slots_per_day)));
        }
        if self.cap_days < 2 {
            return Err(usage(format!("cap-days must be at least 2, got {}", self.cap_days)));
        }
        if self.kneedle_sensitivity.is_nan() || self.kneedle_sensitivity <= 0.0 {
            return Err(usage("kneedle-sensitivity must be positive"));
        }
        Ok(())
    }

    fn input(&self, explicit: &Option<PathBuf>, sub: &str) -> Option<PathBuf> {
        explicit.clone().or_else(|| self.data.as_ref().map(|d| d.join(sub)))
    }

    pub fn ribs_dir(&self) -> Option<PathBuf> {
        self.input(&self.ribs, "ribs")
    }

    pub fn roas_dir(&self) -> Option<PathBuf> {
        self.input(&self.roas, "roas")
    }

    pub fn as_rel_dir(&self) -> Option<PathBuf> {
        self.input(&self.as_rel, "as-rel")
    }

    pub fn as2org_dir(&self) -> Option<PathBuf> {
        self.input(&self.as2org, "as2org")
    }

    pub fn asdb_dir(&self) -> Option<PathBuf> {
        self.input(&self.asdb, "asdb")
    }

    pub fn hypergiants_dir(&self) -> Option<PathBuf> {
        self.input(&self.hypergiants, "hypergiants")
    }

    pub fn anycast_dir(&self) -> Option<PathBuf> {
        self.input(&self.anycast, "anycast")
    }

    pub fn slot_config(&self) -> SlotConfig {
        SlotConfig::with_slots(self.slots_per_day)
    }

    pub fn knee_config(&self) -> KneeConfig {
        KneeConfig { cap_days: self.cap_days, sensitivity: self.kneedle_sensitivity }
    }

    /// The table and the text it came from (the text feeds cache keys).
    pub fn bogon_tables(&self) -> anyhow::Result<(BogonTables, String)> {
        match &self.bogons {
            None => Ok((BogonTables::builtin(), BUILTIN_TABLE.to_string())),
            Some(p) => {
                let text = moasscope::io::read_to_string(p)
                    .with_context(|| format!("reading bogon table {}", p.display()))?;
                let tables = BogonTables::parse(&text).with_context(|| format!("parsing {}", p.display()))?;
                Ok((tables, text))
            }
        }
    }

    pub fn thread_pool(&self) -> anyhow::Result<rayon::ThreadPool> {
        Ok(rayon::ThreadPoolBuilder::new().num_threads(self.workers).build()?)
    }
}

/// `path` shown relative to `root` with `/` separators.
pub fn relative(path: &Path, root: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/")
}

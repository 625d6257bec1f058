//! Input helpers: transparent decompression and dated-file discovery.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, NaiveTime, Utc};
use regex::Regex;
use std::sync::OnceLock;

const GZIP_MAGIC: &[u8] = &[0x1f, 0x8b];
const BZIP2_MAGIC: &[u8] = b"BZh";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Compression {
    None,
    Gzip,
    Bzip2,
}

/// Wraps `reader` in the decoder its leading magic bytes call for.
pub fn decompressing<'a, R: Read + 'a>(reader: R) -> io::Result<(Compression, Box<dyn BufRead + 'a>)> {
    let mut buffered = BufReader::with_capacity(1 << 16, reader);
    let head = buffered.fill_buf()?;
    let kind = if head.starts_with(GZIP_MAGIC) {
        Compression::Gzip
    } else if head.starts_with(BZIP2_MAGIC) {
        Compression::Bzip2
    } else {
        Compression::None
    };
    let out: Box<dyn BufRead + 'a> = match kind {
        Compression::None => Box::new(buffered),
        Compression::Gzip => Box::new(BufReader::new(flate2::bufread::MultiGzDecoder::new(buffered))),
        Compression::Bzip2 => Box::new(BufReader::new(bzip2::bufread::MultiBzDecoder::new(buffered))),
    };
    Ok((kind, out))
}

pub fn open_input(path: &Path) -> io::Result<Box<dyn BufRead>> {
    let file = File::open(path)?;
    Ok(decompressing(file)?.1)
}

pub fn read_to_string(path: &Path) -> io::Result<String> {
    let mut s = String::new();
    open_input(path)?.read_to_string(&mut s)?;
    Ok(s)
}

/// Regular files under `dir`, recursively, sorted by path. Hidden files
/// (leading dot) are skipped.
pub fn list_files(dir: &Path) -> io::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d)? {
            let entry = entry?;
            let name = entry.file_name();
            if name.to_string_lossy().starts_with('.') {
                continue;
            }
            let ft = entry.file_type()?;
            if ft.is_dir() {
                stack.push(entry.path());
            } else if ft.is_file() {
                out.push(entry.path());
            }
        }
    }
    out.sort();
    Ok(out)
}

fn date_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?:^|[^0-9])((?:19|20)\d{2})[-_/.]?(0[1-9]|1[0-2])(?:[-_/.]?(0[1-9]|[12]\d|3[01]))?(?:[^0-9]|$)")
            .unwrap()
    })
}

/// `YYYY[-]MM[[-]DD]` date embedded in a path; the day defaults to 1. The
/// file name wins, otherwise the match closest to it (archives such as
/// `2022/11/30/roas.csv` date the directory).
pub fn date_in_path(path: &Path) -> Option<NaiveDate> {
    let name = path.file_name()?.to_string_lossy();
    let full = path.to_string_lossy();
    let c = date_re().captures(&name).or_else(|| date_re().captures_iter(&full).last())?;
    let y: i32 = c[1].parse().ok()?;
    let m: u32 = c[2].parse().ok()?;
    let d: u32 = c.get(3).map_or(Some(1), |d| d.as_str().parse().ok())?;
    NaiveDate::from_ymd_opt(y, m, d)
}

/// Dump time in names such as `bview.20220601.0800.gz` or
/// `rib.20220601.0800.bz2`.
pub fn timestamp_in_name(path: &Path) -> Option<DateTime<Utc>> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"(?:^|[^0-9])(\d{8})[._-](\d{4})(?:[^0-9]|$)").unwrap());
    let name = path.file_name()?.to_string_lossy();
    let c = re.captures(&name)?;
    let date = NaiveDate::parse_from_str(&c[1], "%Y%m%d").ok()?;
    let time = NaiveTime::parse_from_str(&c[2], "%H%M").ok()?;
    Some(date.and_time(time).and_utc())
}

/// Of the `(date, item)` pairs, the one with the latest date not after `day`.
pub fn latest_not_after<T>(dated: &[(NaiveDate, T)], day: NaiveDate) -> Option<&T> {
    dated.iter().filter(|(d, _)| *d <= day).max_by_key(|(d, _)| *d).map(|(_, t)| t)
}

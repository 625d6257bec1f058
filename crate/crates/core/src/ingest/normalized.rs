//! Line-oriented JSON RIB format.
//!
//! ```text
//! {"ts":"2023-01-01T08:00:00Z","collector":"rrc00","peer_ip":"192.0.2.1","peer_asn":65010,"prefix":"193.0.0.0/21","path":[65010,3333]}
//! ```
//!
//! A nested array in `path` is an AS set. Unknown fields are ignored.

use std::fmt::Write as _;
use std::io::{self, BufRead};
use std::net::IpAddr;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::Deserialize;

use super::{AsPath, IngestStats, OriginError, RibRecord, Segment};
use crate::prefix::IpPrefix;

#[derive(Debug, thiserror::Error)]
pub enum NormalizedError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("{malformed} of {total} lines malformed (more than 10%); first error at line {first_line}: {first_message}")]
    TooManyMalformed { malformed: u64, total: u64, first_line: u64, first_message: String },
}

#[derive(Deserialize)]
struct Line {
    ts: DateTime<Utc>,
    #[serde(default)]
    collector: Option<String>,
    peer_ip: IpAddr,
    peer_asn: u32,
    prefix: String,
    path: Vec<PathElem>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PathElem {
    Asn(u32),
    Set(Vec<u32>),
}

fn to_path(elems: Vec<PathElem>) -> AsPath {
    AsPath::new(elems.into_iter().map(|e| match e {
        PathElem::Asn(a) => Segment::Sequence(vec![a]),
        PathElem::Set(s) => Segment::Set(s),
    }))
}

/// Parses normalized lines. `collector` is used for lines that omit the
/// field. Blank lines are ignored; malformed lines are counted with their
/// line number, and more than 10% malformed lines is fatal.
pub fn parse_normalized<R: BufRead>(lines: R, collector: &str) -> Result<(Vec<RibRecord>, IngestStats), NormalizedError> {
    let mut stats = IngestStats::default();
    let mut out = Vec::new();
    let mut first_error: Option<(u64, String)> = None;
    for (i, line) in lines.lines().enumerate() {
        let line = line?;
        let line_no = i as u64 + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fail = |msg: String| {
            if first_error.is_none() {
                first_error = Some((line_no, msg.clone()));
            }
            stats.record_malformed(line_no, msg);
        };
        let parsed: Line = match serde_json::from_str(&line) {
            Ok(l) => l,
            Err(e) => {
                fail(e.to_string());
                continue;
            }
        };
        let prefix: IpPrefix = match parsed.prefix.parse() {
            Ok(p) => p,
            Err(e) => {
                fail(format!("{e}"));
                continue;
            }
        };
        let collector = parsed.collector.as_deref().unwrap_or(collector);
        match RibRecord::new(parsed.ts, collector, parsed.peer_asn, parsed.peer_ip, prefix, to_path(parsed.path)) {
            Ok(rec) => {
                stats.record_emitted();
                out.push(rec);
            }
            Err(OriginError::AsSetOrigin) => stats.record_as_set(),
            Err(OriginError::EmptyPath) => fail("empty AS path".to_string()),
        }
    }
    if stats.malformed * 10 > stats.total {
        let (first_line, first_message) = first_error.unwrap_or_default();
        return Err(NormalizedError::TooManyMalformed {
            malformed: stats.malformed,
            total: stats.total,
            first_line,
            first_message,
        });
    }
    Ok((out, stats))
}

/// Renders one record as a normalized line (no trailing newline). The prefix
/// keeps its source form so that host-bit records survive a round trip.
pub fn to_normalized_line(rec: &RibRecord) -> String {
    let mut path = String::from("[");
    let mut first = true;
    for seg in rec.as_path.segments() {
        let (asns, set) = match seg {
            Segment::Sequence(v) => (v, false),
            Segment::Set(v) => (v, true),
        };
        if set {
            if !first {
                path.push(',');
            }
            first = false;
            path.push('[');
            let parts: Vec<String> = asns.iter().map(|a| a.to_string()).collect();
            path.push_str(&parts.join(","));
            path.push(']');
        } else {
            for a in asns {
                if !first {
                    path.push(',');
                }
                first = false;
                let _ = write!(path, "{a}");
            }
        }
    }
    path.push(']');
    format!(
        "{{\"ts\":\"{}\",\"collector\":{},\"peer_ip\":\"{}\",\"peer_asn\":{},\"prefix\":\"{}\",\"path\":{}}}",
        rec.snapshot_ts.to_rfc3339_opts(SecondsFormat::AutoSi, true),
        serde_json::to_string(&rec.collector).expect("string serializes"),
        rec.peer_ip,
        rec.peer_asn,
        rec.prefix.to_raw_string(),
        path
    )
}

/// Renders records as newline-terminated normalized lines.
pub fn render_normalized<'a>(records: impl IntoIterator<Item = &'a RibRecord>) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&to_normalized_line(r));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EXAMPLE: &str = r#"{"ts":"2023-01-01T08:00:00Z","collector":"rrc00","peer_ip":"192.0.2.1","peer_asn":65010,"prefix":"193.0.0.0/21","path":[65010,3333]}"#;

    #[test]
    fn direct_field_mapping() {
        let (recs, stats) = parse_normalized(EXAMPLE.as_bytes(), "ignored").unwrap();
        assert_eq!(recs.len(), 1);
        let r = &recs[0];
        assert_eq!(r.origin_asn, 3333);
        assert_eq!(r.peer_asn, 65010);
        assert_eq!(r.collector, "rrc00");
        assert_eq!(r.prefix.to_string(), "193.0.0.0/21");
        assert_eq!(r.snapshot_ts.to_rfc3339(), "2023-01-01T08:00:00+00:00");
        assert_eq!(stats.emitted, 1);
        assert_eq!(to_normalized_line(r), EXAMPLE);
    }

    #[test]
    fn host_bits_flagged() {
        let line = EXAMPLE.replace("193.0.0.0/21", "1.2.3.0/16");
        let (recs, _) = parse_normalized(line.as_bytes(), "x").unwrap();
        assert!(recs[0].prefix.raw_host_bits());
        assert_eq!(recs[0].prefix.to_string(), "1.2.0.0/16");
    }

    #[test]
    fn trailing_set_dropped() {
        let line = EXAMPLE.replace("[65010,3333]", "[65010,[3333,3356]]");
        let (recs, stats) = parse_normalized(line.as_bytes(), "x").unwrap();
        assert!(recs.is_empty());
        assert_eq!(stats.as_set_origins, 1);
        assert_eq!(stats.total, 1);
    }

    #[test]
    fn unknown_fields_and_missing_collector() {
        let line = r#"{"ts":"2023-01-01T08:00:00Z","peer_ip":"2001:db8::1","peer_asn":1,"prefix":"2001:db8::/32","path":[1,2],"extra":true}"#;
        let (recs, _) = parse_normalized(line.as_bytes(), "route-views2").unwrap();
        assert_eq!(recs[0].collector, "route-views2");
    }

    #[test]
    fn malformed_lines_counted_until_ten_percent() {
        let mut text = String::new();
        for _ in 0..9 {
            text.push_str(EXAMPLE);
            text.push('\n');
        }
        text.push_str("{not json\n\n");
        let (recs, stats) = parse_normalized(text.as_bytes(), "x").unwrap();
        assert_eq!(recs.len(), 9);
        assert_eq!(stats.malformed, 1);
        assert_eq!(stats.errors[0].location, 10);

        text.push_str(r#"{"ts":"2023-01-01T08:00:00Z","peer_ip":"1.1.1.1","peer_asn":1,"prefix":"1.0.0.0/8","path":[]}"#);
        match parse_normalized(text.as_bytes(), "x") {
            Err(NormalizedError::TooManyMalformed { malformed: 2, total: 11, first_line: 10, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    fn arb_record() -> impl Strategy<Value = RibRecord> {
        let seg = prop_oneof![
            prop::collection::vec(any::<u32>(), 1..4).prop_map(Segment::Sequence),
            prop::collection::vec(any::<u32>(), 1..3).prop_map(Segment::Set),
        ];
        (
            0i64..4_000_000_000,
            "[a-z0-9-]{1,10}",
            any::<u32>(),
            any::<[u8; 4]>(),
            (any::<u32>(), 0u8..=32),
            prop::collection::vec(seg, 0..4),
            any::<u32>(),
        )
            .prop_map(|(ts, collector, peer_asn, ip, (addr, len), mut segs, origin)| {
                segs.push(Segment::Sequence(vec![origin]));
                let prefix = IpPrefix::from_bits(crate::prefix::Family::V4, addr as u128, len).unwrap();
                RibRecord::new(
                    DateTime::from_timestamp(ts, 0).unwrap(),
                    collector,
                    peer_asn,
                    IpAddr::from(ip),
                    prefix,
                    AsPath::new(segs),
                )
                .unwrap()
            })
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(records in prop::collection::vec(arb_record(), 0..8)) {
            let text = render_normalized(&records);
            let (parsed, stats) = parse_normalized(text.as_bytes(), "unused").unwrap();
            prop_assert_eq!(stats.malformed, 0);
            prop_assert_eq!(parsed, records);
        }
    }
}

//! ROA archives and route origin validation (RFC 6811).

use std::collections::BTreeSet;
use std::fmt;
use std::io::Read;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::ingest::Asn;
use crate::prefix::IpPrefix;
use crate::trie::PrefixTrie;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RoaRecord {
    pub prefix: IpPrefix,
    pub max_length: u8,
    pub asn: Asn,
    pub not_before: Option<NaiveDate>,
    pub not_after: Option<NaiveDate>,
}

impl RoaRecord {
    fn in_force(&self, at: Option<NaiveDate>) -> bool {
        match at {
            None => true,
            Some(day) => self.not_before.is_none_or(|nb| nb <= day) && self.not_after.is_none_or(|na| day <= na),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RoaError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column {0:?}")]
    MissingColumn(&'static str),
}

/// Covering-prefix index over one ROA snapshot.
#[derive(Debug, Default)]
pub struct RoaSet {
    index: PrefixTrie<Vec<RoaRecord>>,
    len: usize,
    /// Rows rejected as malformed.
    pub skipped: u64,
}

impl RoaSet {
    pub fn from_records(records: impl IntoIterator<Item = RoaRecord>) -> Self {
        let unique: BTreeSet<RoaRecord> = records.into_iter().collect();
        let mut set = RoaSet { len: unique.len(), ..RoaSet::default() };
        let mut cur: Option<(IpPrefix, Vec<RoaRecord>)> = None;
        for r in unique {
            match &mut cur {
                Some((p, v)) if *p == r.prefix => v.push(r),
                _ => {
                    if let Some((p, v)) = cur.take() {
                        set.index.insert(p, v);
                    }
                    cur = Some((r.prefix, vec![r]));
                }
            }
        }
        if let Some((p, v)) = cur {
            set.index.insert(p, v);
        }
        set
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn covering<'a>(&'a self, prefix: &IpPrefix) -> impl Iterator<Item = &'a RoaRecord> + 'a {
        self.index.covering(prefix).flat_map(|(_, v)| v.iter())
    }
}

fn parse_asn(s: &str) -> Option<Asn> {
    let s = s.trim();
    let digits = s.strip_prefix("AS").or_else(|| s.strip_prefix("as")).unwrap_or(s);
    digits.parse().ok()
}

fn parse_day(s: &str) -> Option<Option<NaiveDate>> {
    let s = s.trim();
    if s.is_empty() {
        return Some(None);
    }
    s.get(..10).and_then(|d| NaiveDate::parse_from_str(d, "%Y-%m-%d").ok()).map(Some)
}

/// Reads a ROA CSV with header `URI,ASN,IP Prefix,Max Length,Not Before,Not
/// After`. Column order is taken from the header; the date columns may be
/// missing or empty. An empty max length means the prefix length.
pub fn load_roas<R: Read>(input: R) -> Result<RoaSet, RoaError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(input);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let asn_col = col("ASN").ok_or(RoaError::MissingColumn("ASN"))?;
    let prefix_col = col("IP Prefix").ok_or(RoaError::MissingColumn("IP Prefix"))?;
    let maxlen_col = col("Max Length").ok_or(RoaError::MissingColumn("Max Length"))?;
    let nb_col = col("Not Before");
    let na_col = col("Not After");

    let mut records = Vec::new();
    let mut skipped = 0;
    for row in rdr.records() {
        let row = row?;
        let field = |i: Option<usize>| i.and_then(|i| row.get(i)).unwrap_or("");
        let parsed = (|| {
            let asn = parse_asn(field(Some(asn_col)))?;
            let prefix: IpPrefix = field(Some(prefix_col)).parse().ok()?;
            let max_length = match field(Some(maxlen_col)) {
                "" => prefix.len(),
                m => m.parse().ok()?,
            };
            if max_length < prefix.len() || max_length > prefix.family().bits() {
                return None;
            }
            Some(RoaRecord {
                prefix,
                max_length,
                asn,
                not_before: parse_day(field(nb_col))?,
                not_after: parse_day(field(na_col))?,
            })
        })();
        match parsed {
            Some(r) => records.push(r),
            None => skipped += 1,
        }
    }
    let mut set = RoaSet::from_records(records);
    set.skipped = skipped;
    Ok(set)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RovState {
    Valid,
    Invalid,
    NotFound,
}

impl RovState {
    pub fn as_str(self) -> &'static str {
        match self {
            RovState::Valid => "valid",
            RovState::Invalid => "invalid",
            RovState::NotFound => "not-found",
        }
    }
}

impl fmt::Display for RovState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `at` restricts the ROAs to those in force on that day when they carry
/// validity dates.
pub fn validate(prefix: &IpPrefix, origin: Asn, roas: &RoaSet, at: Option<NaiveDate>) -> RovState {
    let mut covered = false;
    for roa in roas.covering(prefix).filter(|r| r.in_force(at)) {
        covered = true;
        if roa.asn == origin && prefix.len() <= roa.max_length {
            return RovState::Valid;
        }
    }
    if covered {
        RovState::Invalid
    } else {
        RovState::NotFound
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MoasRovClass {
    AllValid,
    AtLeastOneValid,
    AllInvalid,
    NotFound,
    MixedInvalidNotFound,
}

impl MoasRovClass {
    pub const ALL: [MoasRovClass; 5] = [
        MoasRovClass::AllValid,
        MoasRovClass::AtLeastOneValid,
        MoasRovClass::AllInvalid,
        MoasRovClass::NotFound,
        MoasRovClass::MixedInvalidNotFound,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MoasRovClass::AllValid => "all-valid",
            MoasRovClass::AtLeastOneValid => "at-least-one-valid",
            MoasRovClass::AllInvalid => "all-invalid",
            MoasRovClass::NotFound => "not-found",
            MoasRovClass::MixedInvalidNotFound => "mixed-invalid-not-found",
        }
    }
}

impl fmt::Display for MoasRovClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("a MOAS class needs at least two origin states, got {0}")]
pub struct TooFewStates(pub usize);

pub fn classify_moas_rov(states: &[RovState]) -> Result<MoasRovClass, TooFewStates> {
    if states.len() < 2 {
        return Err(TooFewStates(states.len()));
    }
    let all = |s| states.iter().all(|x| *x == s);
    Ok(if all(RovState::Valid) {
        MoasRovClass::AllValid
    } else if states.contains(&RovState::Valid) {
        MoasRovClass::AtLeastOneValid
    } else if all(RovState::Invalid) {
        MoasRovClass::AllInvalid
    } else if all(RovState::NotFound) {
        MoasRovClass::NotFound
    } else {
        MoasRovClass::MixedInvalidNotFound
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "URI,ASN,IP Prefix,Max Length,Not Before,Not After\n";

    fn roas(rows: &str) -> RoaSet {
        load_roas(format!("{HEADER}{rows}").as_bytes()).unwrap()
    }

    fn p(s: &str) -> IpPrefix {
        s.parse().unwrap()
    }

    #[test]
    fn load_examples() {
        let set = roas("rsync://x/a.roa,AS65001,10.0.0.0/16,24,,\n");
        assert_eq!(set.len(), 1);
        assert_eq!(set.covering(&p("10.0.255.0/24")).count(), 1);
        assert_eq!(set.covering(&p("10.1.0.0/24")).count(), 0);

        let set = roas("u,AS65001,10.0.0.0/16,24,,\nu,AS65001,10.0.0.0/16,24,,\n");
        assert_eq!(set.len(), 1);

        let set = roas("u,AS65001,10.0.0.0/24,16,,\n");
        assert_eq!((set.len(), set.skipped), (0, 1));
    }

    #[test]
    fn tolerant_columns() {
        let text = "ASN,IP Prefix,Max Length\n65001,2001:db8::/32,48\nbogus,1.0.0.0/8,8\n";
        let set = load_roas(text.as_bytes()).unwrap();
        assert_eq!((set.len(), set.skipped), (1, 1));
        let set = roas("u,AS1,10.0.0.0/8,,,\n");
        assert_eq!(validate(&p("10.0.0.0/8"), 1, &set, None), RovState::Valid);
        assert_eq!(validate(&p("10.0.0.0/9"), 1, &set, None), RovState::Invalid);
    }

    #[test]
    fn validation_examples() {
        let set = roas("u,AS65001,10.0.0.0/16,24,,\n");
        assert_eq!(validate(&p("10.0.5.0/24"), 65001, &set, None), RovState::Valid);
        assert_eq!(validate(&p("10.0.5.0/25"), 65001, &set, None), RovState::Invalid);
        assert_eq!(validate(&p("192.0.2.0/24"), 65001, &set, None), RovState::NotFound);
        assert_eq!(validate(&p("10.0.5.0/24"), 65002, &set, None), RovState::Invalid);
    }

    #[test]
    fn validity_window() {
        let set = roas("u,AS1,10.0.0.0/8,8,2022-01-01 00:00:00,2022-12-31 23:59:59\n");
        let d = |s: &str| Some(s.parse::<NaiveDate>().unwrap());
        assert_eq!(validate(&p("10.0.0.0/8"), 1, &set, d("2022-06-01")), RovState::Valid);
        assert_eq!(validate(&p("10.0.0.0/8"), 1, &set, d("2023-01-01")), RovState::NotFound);
        assert_eq!(validate(&p("10.0.0.0/8"), 1, &set, None), RovState::Valid);
    }

    #[test]
    fn class_examples() {
        use RovState::*;
        assert_eq!(classify_moas_rov(&[Valid, Valid]), Ok(MoasRovClass::AllValid));
        assert_eq!(classify_moas_rov(&[Valid, Invalid]), Ok(MoasRovClass::AtLeastOneValid));
        assert_eq!(classify_moas_rov(&[Invalid, Invalid]), Ok(MoasRovClass::AllInvalid));
        assert_eq!(classify_moas_rov(&[NotFound, NotFound, NotFound]), Ok(MoasRovClass::NotFound));
        assert_eq!(classify_moas_rov(&[Invalid, NotFound]), Ok(MoasRovClass::MixedInvalidNotFound));
        assert_eq!(classify_moas_rov(&[Valid]), Err(TooFewStates(1)));
    }
}

//! Readers for the auxiliary datasets: AS relationships, AS-to-organization
//! mapping, business categories, hypergiants and anycast prefixes.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{self, BufRead, Read};

use serde::Deserialize;

use crate::ingest::Asn;
use crate::prefix::IpPrefix;
use crate::trie::PrefixTrie;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    /// The first AS of the stored pair is the provider.
    ProviderCustomer,
    Peer,
}

/// AS relationships in the `a|b|rel[|source]` convention: -1 means a is a
/// provider of b, 0 means peers.
#[derive(Debug, Default, Clone)]
pub struct RelDb {
    pairs: HashMap<(Asn, Asn), Rel>,
    pub skipped: u64,
}

impl RelDb {
    pub fn parse<R: BufRead>(input: R) -> Result<Self, DatasetError> {
        let mut db = RelDb::default();
        for line in input.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut f = line.split('|');
            let parsed = match (f.next(), f.next(), f.next()) {
                (Some(a), Some(b), Some(r)) => match (a.parse::<Asn>(), b.parse::<Asn>(), r.trim()) {
                    (Ok(a), Ok(b), "-1") => Some((a, b, Rel::ProviderCustomer)),
                    (Ok(a), Ok(b), "0") => Some((a, b, Rel::Peer)),
                    _ => None,
                },
                _ => None,
            };
            match parsed {
                Some((a, b, rel)) => db.insert(a, b, rel),
                None => db.skipped += 1,
            }
        }
        Ok(db)
    }

    pub fn insert(&mut self, a: Asn, b: Asn, rel: Rel) {
        self.pairs.insert((a, b), rel);
    }

    /// Relationship between two ASes in either stored direction.
    pub fn lookup(&self, a: Asn, b: Asn) -> Option<Rel> {
        self.pairs.get(&(a, b)).or_else(|| self.pairs.get(&(b, a))).copied()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Org {
    pub id: String,
    pub name: String,
}

/// AS-to-organization mapping. Reads the pipe-separated release format
/// (`# format:` lines announce the fields of the following organization or
/// ASN records) and the JSON-lines format with `type` tags.
#[derive(Debug, Default, Clone)]
pub struct OrgDb {
    orgs: HashMap<String, String>,
    asn_org: HashMap<Asn, String>,
}

#[derive(Deserialize)]
struct JsonRecord {
    #[serde(rename = "type")]
    kind: String,
    #[serde(default, rename = "organizationId")]
    organization_id: Option<String>,
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    asn: Option<serde_json::Value>,
}

impl OrgDb {
    pub fn parse<R: BufRead>(input: R) -> Result<Self, DatasetError> {
        let mut db = OrgDb::default();
        let mut format: Vec<String> = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("# format:") {
                format = rest.trim().split('|').map(str::to_string).collect();
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            if line.starts_with('{') {
                let rec: JsonRecord = serde_json::from_str(line)?;
                let Some(org_id) = rec.organization_id else { continue };
                match rec.kind.as_str() {
                    "Organization" => {
                        db.orgs.insert(org_id, rec.name.unwrap_or_default());
                    }
                    "ASN" => {
                        let asn = match rec.asn {
                            Some(serde_json::Value::Number(n)) => n.as_u64().and_then(|n| Asn::try_from(n).ok()),
                            Some(serde_json::Value::String(s)) => s.parse().ok(),
                            _ => None,
                        };
                        if let Some(asn) = asn {
                            db.asn_org.insert(asn, org_id);
                        }
                    }
                    _ => {}
                }
                continue;
            }
            let fields: Vec<&str> = line.split('|').collect();
            let get = |name: &str| format.iter().position(|f| f == name).and_then(|i| fields.get(i).copied());
            if format.first().map(String::as_str) == Some("aut") {
                let asn = fields[0].parse::<Asn>().map_err(|e| DatasetError::Syntax {
                    line: i + 1,
                    message: format!("bad ASN {:?}: {e}", fields[0]),
                })?;
                if let Some(org) = get("org_id") {
                    db.asn_org.insert(asn, org.to_string());
                }
            } else if format.first().map(String::as_str) == Some("org_id") {
                db.orgs.insert(fields[0].to_string(), get("org_name").unwrap_or("").to_string());
            } else {
                return Err(DatasetError::Syntax { line: i + 1, message: "record before any '# format:' line".into() });
            }
        }
        Ok(db)
    }

    pub fn insert_org(&mut self, id: &str, name: &str) {
        self.orgs.insert(id.to_string(), name.to_string());
    }

    pub fn insert_asn(&mut self, asn: Asn, org_id: &str) {
        self.asn_org.insert(asn, org_id.to_string());
    }

    pub fn org_of(&self, asn: Asn) -> Option<Org> {
        let id = self.asn_org.get(&asn)?;
        Some(Org { id: id.clone(), name: self.orgs.get(id).cloned().unwrap_or_default() })
    }

    /// Same organization id, or same non-empty organization name.
    pub fn siblings(&self, a: Asn, b: Asn) -> bool {
        match (self.org_of(a), self.org_of(b)) {
            (Some(x), Some(y)) => {
                x.id == y.id || (!x.name.trim().is_empty() && x.name.trim().eq_ignore_ascii_case(y.name.trim()))
            }
            _ => false,
        }
    }

    pub fn len(&self) -> usize {
        self.asn_org.len()
    }

    pub fn is_empty(&self) -> bool {
        self.asn_org.is_empty()
    }
}

/// Layer-1 business categories per AS. Rows are `asn,l1,l2,l1,l2,...`; the
/// ASN may carry an `AS` prefix and a header row is skipped.
#[derive(Debug, Default, Clone)]
pub struct Asdb {
    categories: HashMap<Asn, BTreeSet<String>>,
}

impl Asdb {
    pub fn parse<R: Read>(input: R) -> Result<Self, DatasetError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(input);
        let mut db = Asdb::default();
        for row in rdr.records() {
            let row = row?;
            let Some(first) = row.get(0) else { continue };
            let digits = first.strip_prefix("AS").unwrap_or(first);
            let Ok(asn) = digits.parse::<Asn>() else { continue };
            let cats = db.categories.entry(asn).or_default();
            for (i, cell) in row.iter().enumerate().skip(1) {
                if i % 2 == 1 && !cell.is_empty() {
                    cats.insert(cell.to_string());
                }
            }
        }
        Ok(db)
    }

    pub fn insert(&mut self, asn: Asn, layer1: &str) {
        self.categories.entry(asn).or_default().insert(layer1.to_string());
    }

    pub fn categories(&self, asn: Asn) -> Option<&BTreeSet<String>> {
        self.categories.get(&asn).filter(|c| !c.is_empty())
    }
}

/// Organization name → ASNs.
#[derive(Debug, Default, Clone)]
pub struct HypergiantDb {
    by_asn: BTreeMap<Asn, BTreeSet<String>>,
}

impl HypergiantDb {
    pub fn parse<R: Read>(input: R) -> Result<Self, DatasetError> {
        let map: BTreeMap<String, Vec<Asn>> = serde_json::from_reader(input)?;
        Ok(Self::from_map(map))
    }

    pub fn from_map(map: BTreeMap<String, Vec<Asn>>) -> Self {
        let mut by_asn: BTreeMap<Asn, BTreeSet<String>> = BTreeMap::new();
        for (org, asns) in map {
            for a in asns {
                by_asn.entry(a).or_default().insert(org.clone());
            }
        }
        HypergiantDb { by_asn }
    }

    pub fn orgs_of(&self, asn: Asn) -> impl Iterator<Item = &String> {
        self.by_asn.get(&asn).into_iter().flatten()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AnycastMatch {
    #[default]
    Exact,
    /// A list entry equal to or covering the prefix.
    Contains,
}

#[derive(Debug, Default)]
pub struct AnycastList {
    index: PrefixTrie<()>,
}

impl AnycastList {
    pub fn parse<R: BufRead>(input: R) -> Result<Self, DatasetError> {
        let mut index = PrefixTrie::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let entry = line.split('#').next().unwrap_or("").trim();
            if entry.is_empty() {
                continue;
            }
            let p: IpPrefix = entry
                .parse()
                .map_err(|e| DatasetError::Syntax { line: i + 1, message: format!("{e}") })?;
            if index.exact(&p).next().is_none() {
                index.insert(p, ());
            }
        }
        Ok(AnycastList { index })
    }

    pub fn from_prefixes(prefixes: impl IntoIterator<Item = IpPrefix>) -> Self {
        let mut index = PrefixTrie::new();
        for p in prefixes {
            if index.exact(&p).next().is_none() {
                index.insert(p, ());
            }
        }
        AnycastList { index }
    }

    pub fn matches(&self, prefix: &IpPrefix, mode: AnycastMatch) -> bool {
        match mode {
            AnycastMatch::Exact => self.index.exact(prefix).next().is_some(),
            AnycastMatch::Contains => self.index.contains_covering(prefix),
        }
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }
}

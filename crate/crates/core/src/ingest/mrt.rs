//! MRT `TABLE_DUMP_V2` decoding (RFC 6396).
//!
//! Only the peer index table and the unicast RIB subtypes are interpreted;
//! every other record is skipped using its length field. Offsets in errors
//! refer to the decompressed byte stream.

use std::io::{self, Read};
use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

use chrono::{DateTime, Utc};

use super::{AsPath, IngestStats, OriginError, RibRecord, Segment};
use crate::io::decompressing;
use crate::prefix::{Family, IpPrefix};

const TABLE_DUMP_V2: u16 = 13;
const PEER_INDEX_TABLE: u16 = 1;
const RIB_IPV4_UNICAST: u16 = 2;
const RIB_IPV6_UNICAST: u16 = 4;

const ATTR_AS_PATH: u8 = 2;
const ATTR_FLAG_EXTENDED: u8 = 0x10;

const SEG_AS_SET: u8 = 1;
const SEG_AS_SEQUENCE: u8 = 2;
const SEG_CONFED_SEQUENCE: u8 = 3;
const SEG_CONFED_SET: u8 = 4;

const HEADER_LEN: usize = 12;

#[derive(Debug, thiserror::Error)]
pub enum MrtError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("truncated MRT header at byte offset {offset}: {available} of 12 bytes present")]
    TruncatedHeader { offset: u64, available: usize },
    #[error("truncated MRT record at byte offset {offset}: length field says {declared} bytes, {available} present")]
    TruncatedRecord { offset: u64, declared: u32, available: usize },
    #[error("RIB entry at byte offset {offset} precedes any PEER_INDEX_TABLE")]
    MissingPeerIndex { offset: u64 },
    #[error("unreadable PEER_INDEX_TABLE at byte offset {offset}: {reason}")]
    BadPeerIndex { offset: u64, reason: &'static str },
}

#[derive(Debug, Clone, Copy)]
struct Peer {
    asn: u32,
    ip: IpAddr,
}

/// Big-endian cursor over one record body.
struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Cursor { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let out = self.buf.get(self.pos..end)?;
        self.pos = end;
        Some(out)
    }

    fn u8(&mut self) -> Option<u8> {
        self.take(1).map(|b| b[0])
    }

    fn u16(&mut self) -> Option<u16> {
        self.take(2).map(|b| u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn ip(&mut self, v6: bool) -> Option<IpAddr> {
        if v6 {
            let b: [u8; 16] = self.take(16)?.try_into().ok()?;
            Some(IpAddr::V6(Ipv6Addr::from(b)))
        } else {
            let b: [u8; 4] = self.take(4)?.try_into().ok()?;
            Some(IpAddr::V4(Ipv4Addr::from(b)))
        }
    }
}

/// Reads up to `buf.len()` bytes; returns how many were read before EOF.
fn read_full(r: &mut dyn Read, buf: &mut [u8]) -> io::Result<usize> {
    let mut got = 0;
    while got < buf.len() {
        match r.read(&mut buf[got..]) {
            Ok(0) => break,
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(got)
}

fn parse_peer_index(body: &[u8], offset: u64) -> Result<Vec<Peer>, MrtError> {
    let bad = |reason| MrtError::BadPeerIndex { offset, reason };
    let mut c = Cursor::new(body);
    c.u32().ok_or(bad("missing collector id"))?;
    let name_len = c.u16().ok_or(bad("missing view name length"))?;
    c.take(name_len as usize).ok_or(bad("view name overruns record"))?;
    let count = c.u16().ok_or(bad("missing peer count"))?;
    let mut peers = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let peer_type = c.u8().ok_or(bad("peer entry overruns record"))?;
        c.u32().ok_or(bad("peer entry overruns record"))?;
        let ip = c.ip(peer_type & 0x01 != 0).ok_or(bad("peer entry overruns record"))?;
        let asn = if peer_type & 0x02 != 0 {
            c.u32().ok_or(bad("peer entry overruns record"))?
        } else {
            c.u16().ok_or(bad("peer entry overruns record"))? as u32
        };
        peers.push(Peer { asn, ip });
    }
    Ok(peers)
}

fn parse_as_path(mut c: Cursor<'_>) -> Result<AsPath, &'static str> {
    let mut segments = Vec::new();
    while c.pos < c.buf.len() {
        let seg_type = c.u8().ok_or("truncated path segment")?;
        let count = c.u8().ok_or("truncated path segment")?;
        let mut asns = Vec::with_capacity(count as usize);
        for _ in 0..count {
            asns.push(c.u32().ok_or("truncated path segment")?);
        }
        segments.push(match seg_type {
            SEG_AS_SEQUENCE | SEG_CONFED_SEQUENCE => Segment::Sequence(asns),
            SEG_AS_SET | SEG_CONFED_SET => Segment::Set(asns),
            _ => return Err("unknown path segment type"),
        });
    }
    Ok(AsPath::new(segments))
}

/// Finds and decodes the AS_PATH attribute (4-byte ASNs in TABLE_DUMP_V2).
fn find_as_path(attrs: &[u8]) -> Result<AsPath, &'static str> {
    let mut c = Cursor::new(attrs);
    while c.pos < attrs.len() {
        let flags = c.u8().ok_or("truncated attribute header")?;
        let code = c.u8().ok_or("truncated attribute header")?;
        let len = if flags & ATTR_FLAG_EXTENDED != 0 {
            c.u16().ok_or("truncated attribute header")? as usize
        } else {
            c.u8().ok_or("truncated attribute header")? as usize
        };
        let value = c.take(len).ok_or("attribute overruns entry")?;
        if code == ATTR_AS_PATH {
            return parse_as_path(Cursor::new(value));
        }
    }
    Err("no AS_PATH attribute")
}

fn decode_rib(
    body: &[u8],
    body_offset: u64,
    family: Family,
    ts: DateTime<Utc>,
    collector: &str,
    peers: &[Peer],
    stats: &mut IngestStats,
    out: &mut Vec<RibRecord>,
) {
    let mut c = Cursor::new(body);
    let head = (|| {
        c.u32()?;
        let plen = c.u8()?;
        if plen > family.bits() {
            return None;
        }
        let bytes = c.take((plen as usize).div_ceil(8))?;
        let mut full = [0u8; 16];
        full[..bytes.len()].copy_from_slice(bytes);
        let raw = match family {
            Family::V4 => u32::from_be_bytes([full[0], full[1], full[2], full[3]]) as u128,
            Family::V6 => u128::from_be_bytes(full),
        };
        let prefix = IpPrefix::from_bits(family, raw, plen).ok()?;
        let count = c.u16()?;
        Some((prefix, count))
    })();
    let Some((prefix, count)) = head else {
        stats.record_malformed(body_offset, "unreadable RIB entry header");
        return;
    };

    for i in 0..count {
        let entry_offset = body_offset + c.pos as u64;
        let entry = (|| {
            let peer_index = c.u16()?;
            c.u32()?;
            let attr_len = c.u16()?;
            let attrs = c.take(attr_len as usize)?;
            Some((peer_index, attrs))
        })();
        let Some((peer_index, attrs)) = entry else {
            // the rest of the record is unreadable; account for every entry left
            for _ in i..count {
                stats.record_malformed(entry_offset, "RIB entry overruns record");
            }
            return;
        };
        let Some(peer) = peers.get(peer_index as usize) else {
            stats.record_malformed(entry_offset, format!("peer index {peer_index} out of range"));
            continue;
        };
        let path = match find_as_path(attrs) {
            Ok(p) => p,
            Err(msg) => {
                stats.record_malformed(entry_offset, msg);
                continue;
            }
        };
        match RibRecord::new(ts, collector, peer.asn, peer.ip, prefix, path) {
            Ok(rec) => {
                stats.record_emitted();
                out.push(rec);
            }
            Err(OriginError::AsSetOrigin) => stats.record_as_set(),
            Err(OriginError::EmptyPath) => stats.record_malformed(entry_offset, "empty AS path"),
        }
    }
}

/// Decodes an MRT RIB dump, gzip or bzip2 compressed or plain.
///
/// Records are returned in file order. A torn header or record body, or a RIB
/// entry before the peer index table, aborts decoding with the offending byte
/// offset; problems confined to a single entry are counted in the stats.
pub fn parse_mrt_rib<R: Read>(stream: R, collector: &str) -> Result<(Vec<RibRecord>, IngestStats), MrtError> {
    let (_, mut reader) = decompressing(stream)?;
    let mut stats = IngestStats::default();
    let mut out = Vec::new();
    let mut peers: Option<Vec<Peer>> = None;
    let mut offset: u64 = 0;
    let mut header = [0u8; HEADER_LEN];
    let mut body = Vec::new();

    loop {
        let got = read_full(&mut reader, &mut header)?;
        if got == 0 {
            break;
        }
        if got < HEADER_LEN {
            return Err(MrtError::TruncatedHeader { offset, available: got });
        }
        let timestamp = u32::from_be_bytes([header[0], header[1], header[2], header[3]]);
        let mrt_type = u16::from_be_bytes([header[4], header[5]]);
        let subtype = u16::from_be_bytes([header[6], header[7]]);
        let length = u32::from_be_bytes([header[8], header[9], header[10], header[11]]);

        body.resize(length as usize, 0);
        let got = read_full(&mut reader, &mut body)?;
        if got < length as usize {
            return Err(MrtError::TruncatedRecord { offset, declared: length, available: got });
        }
        let body_offset = offset + HEADER_LEN as u64;

        if mrt_type == TABLE_DUMP_V2 {
            match subtype {
                PEER_INDEX_TABLE => peers = Some(parse_peer_index(&body, offset)?),
                RIB_IPV4_UNICAST | RIB_IPV6_UNICAST => {
                    let peers = peers.as_deref().ok_or(MrtError::MissingPeerIndex { offset })?;
                    let family = if subtype == RIB_IPV4_UNICAST { Family::V4 } else { Family::V6 };
                    let ts = DateTime::from_timestamp(timestamp as i64, 0).unwrap_or_default();
                    decode_rib(&body, body_offset, family, ts, collector, peers, &mut stats, &mut out);
                }
                _ => {}
            }
        }
        offset = body_offset + length as u64;
    }
    Ok((out, stats))
}

//! Versioned IP prefixes with a canonical (masked) address.
//!
//! Both families share one representation: the address lives in a `u128`,
//! right-aligned for IPv4. The address as it appeared in the source is kept
//! next to the canonical one, so records carrying host bits beyond their
//! length (`1.2.3.0/16`) can be flagged and rendered faithfully.

use std::fmt;
use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    V4,
    V6,
}

impl Family {
    pub fn bits(self) -> u8 {
        match self {
            Family::V4 => 32,
            Family::V6 => 128,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Family::V4 => "v4",
            Family::V6 => "v6",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = PrefixError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "v4" | "ipv4" | "4" => Ok(Family::V4),
            "v6" | "ipv6" | "6" => Ok(Family::V6),
            _ => Err(PrefixError::Syntax(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PrefixError {
    #[error("malformed prefix {0:?}")]
    Syntax(String),
    #[error("prefix length {len} exceeds {bits} bits")]
    Length { len: u8, bits: u8 },
}

/// An address block. Ordering sorts by family, then canonical address, then
/// length, so covering prefixes come before their more-specifics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IpPrefix {
    family: Family,
    addr: u128,
    len: u8,
    raw: u128,
}

fn mask(family: Family, len: u8) -> u128 {
    let bits = family.bits() as u32;
    if len == 0 {
        return 0;
    }
    let width = if bits == 128 { u128::MAX } else { (1u128 << bits) - 1 };
    let host = if len as u32 == bits { 0 } else { (1u128 << (bits - len as u32)) - 1 };
    width & !host
}

impl IpPrefix {
    /// Builds a prefix from a right-aligned address. Host bits are masked off
    /// and remembered.
    pub fn from_bits(family: Family, raw: u128, len: u8) -> Result<Self, PrefixError> {
        if len > family.bits() {
            return Err(PrefixError::Length { len, bits: family.bits() });
        }
        let raw = match family {
            Family::V4 => raw & u32::MAX as u128,
            Family::V6 => raw,
        };
        Ok(IpPrefix { family, addr: raw & mask(family, len), len, raw })
    }

    pub fn new(addr: IpAddr, len: u8) -> Result<Self, PrefixError> {
        match addr {
            IpAddr::V4(a) => Self::from_bits(Family::V4, u32::from(a) as u128, len),
            IpAddr::V6(a) => Self::from_bits(Family::V6, u128::from(a), len),
        }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn len(&self) -> u8 {
        self.len
    }

    /// Canonical address bits, right-aligned.
    pub fn bits(&self) -> u128 {
        self.addr
    }

    /// True when the source address had bits set beyond the prefix length.
    pub fn raw_host_bits(&self) -> bool {
        self.raw != self.addr
    }

    /// The same prefix with the source address forgotten.
    pub fn canonical(&self) -> IpPrefix {
        IpPrefix { raw: self.addr, ..*self }
    }

    pub fn addr(&self) -> IpAddr {
        to_ip(self.family, self.addr)
    }

    pub fn is_default_route(&self) -> bool {
        self.len == 0
    }

    /// Bit `i` (0 = most significant) of the canonical address.
    pub fn bit(&self, i: u8) -> bool {
        let shift = self.family.bits() - 1 - i;
        (self.addr >> shift) & 1 == 1
    }

    /// Whether `other` lies within this prefix (a prefix contains itself).
    pub fn contains(&self, other: &IpPrefix) -> bool {
        self.family == other.family
            && self.len <= other.len
            && other.addr & mask(self.family, self.len) == self.addr
    }

    /// Source form, e.g. `1.2.3.0/16` for a record carrying host bits.
    pub fn to_raw_string(&self) -> String {
        format!("{}/{}", to_ip(self.family, self.raw), self.len)
    }
}

fn to_ip(family: Family, bits: u128) -> IpAddr {
    match family {
        Family::V4 => IpAddr::V4(Ipv4Addr::from(bits as u32)),
        Family::V6 => IpAddr::V6(Ipv6Addr::from(bits)),
    }
}

impl fmt::Display for IpPrefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.addr(), self.len)
    }
}

impl FromStr for IpPrefix {
    type Err = PrefixError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (addr, len) = s.split_once('/').ok_or_else(|| PrefixError::Syntax(s.to_string()))?;
        let addr: IpAddr = addr.parse().map_err(|_| PrefixError::Syntax(s.to_string()))?;
        if len.is_empty() || !len.bytes().all(|b| b.is_ascii_digit()) || len.len() > 3 {
            return Err(PrefixError::Syntax(s.to_string()));
        }
        let len: u8 = len.parse().map_err(|_| PrefixError::Syntax(s.to_string()))?;
        IpPrefix::new(addr, len)
    }
}

impl Serialize for IpPrefix {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for IpPrefix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = <std::borrow::Cow<'de, str>>::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

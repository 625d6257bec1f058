//! Detection and characterization of long-lived multiple-origin-AS (MOAS)
//! prefixes from multi-collector BGP RIB snapshots.

pub mod enrich;
pub mod filters;
pub mod ingest;
pub mod io;
pub mod lifetime;
pub mod moas;
pub mod prefix;
pub mod rpki;
pub mod synth;
pub mod trie;

pub use ingest::{Asn, RibRecord};
pub use prefix::{Family, IpPrefix};

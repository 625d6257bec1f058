//! Indexed validation against a linear scan written from RFC 6811 directly.

use std::net::IpAddr;

use moasscope::prefix::IpPrefix;
use moasscope::rpki::{validate, RoaRecord, RoaSet, RovState};
use proptest::prelude::*;

fn network(p: &IpPrefix) -> (u32, u128) {
    match p.addr() {
        IpAddr::V4(a) => (32, u32::from(a) as u128),
        IpAddr::V6(a) => (128, u128::from(a)),
    }
}

fn covers(roa: &IpPrefix, q: &IpPrefix) -> bool {
    let ((rw, ra), (qw, qa)) = (network(roa), network(q));
    if rw != qw || roa.len() > q.len() {
        return false;
    }
    let drop = rw - roa.len() as u32;
    drop == 128 || (ra >> drop) == (qa >> drop)
}

fn linear(q: &IpPrefix, origin: u32, roas: &[RoaRecord]) -> RovState {
    let covering: Vec<&RoaRecord> = roas.iter().filter(|r| covers(&r.prefix, q)).collect();
    if covering.is_empty() {
        RovState::NotFound
    } else if covering.iter().any(|r| r.asn == origin && q.len() <= r.max_length) {
        RovState::Valid
    } else {
        RovState::Invalid
    }
}

fn v4(addr: u32, len: u8) -> IpPrefix {
    IpPrefix::new(IpAddr::from(addr.to_be_bytes()), len).unwrap().canonical()
}

fn roa(p: IpPrefix, max_length: u8, asn: u32) -> RoaRecord {
    RoaRecord { prefix: p, max_length, asn, not_before: None, not_after: None }
}

// addresses confined to 10.0.0.0/12 so ROAs and queries overlap often
fn arb_prefix() -> impl Strategy<Value = IpPrefix> {
    (0u32..1 << 20, 8u8..=28).prop_map(|(low, len)| v4(0x0a00_0000 | low, len))
}

fn arb_roa() -> impl Strategy<Value = RoaRecord> {
    (arb_prefix(), 0u8..=8, 1u32..=4).prop_map(|(p, extra, asn)| {
        let max = (p.len() + extra).min(32);
        roa(p, max, asn)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn indexed_matches_linear_scan(
        roas in prop::collection::vec(arb_roa(), 0..12),
        q in arb_prefix(),
        origin in 1u32..=5,
        from_roa in any::<prop::sample::Index>(),
        tail in 0u8..=8,
        derive in any::<bool>(),
    ) {
        // half of the queries are more-specifics of a ROA in the set
        let q = match (derive, roas.is_empty()) {
            (true, false) => {
                let base = &roas[from_roa.index(roas.len())].prefix;
                let (_, a) = network(base);
                v4(a as u32 | (network(&q).1 as u32 & 0xff), (base.len() + tail).min(32))
            }
            _ => q,
        };
        let set = RoaSet::from_records(roas.clone());
        prop_assert_eq!(validate(&q, origin, &set, None), linear(&q, origin, &roas));
    }
}

#[test]
fn boundary_cases() {
    let p = |s: &str| s.parse::<IpPrefix>().unwrap();
    let roas = vec![roa(p("192.0.2.0/24"), 24, 64496), roa(p("198.51.0.0/16"), 20, 64497)];
    let set = RoaSet::from_records(roas.clone());
    let cases = [
        (p("192.0.2.0/24"), 64496, RovState::Valid),
        (p("192.0.2.0/24"), 64497, RovState::Invalid),
        (p("192.0.2.0/25"), 64496, RovState::Invalid),
        (p("198.51.16.0/20"), 64497, RovState::Valid),
        (p("198.51.16.0/21"), 64497, RovState::Invalid),
        (p("198.51.0.0/16"), 64497, RovState::Valid),
        (p("198.0.0.0/8"), 64497, RovState::NotFound),
        (p("203.0.113.0/24"), 64496, RovState::NotFound),
        (p("2001:db8::/32"), 64496, RovState::NotFound),
    ];
    for (q, origin, want) in cases {
        assert_eq!(linear(&q, origin, &roas), want, "oracle {q} AS{origin}");
        assert_eq!(validate(&q, origin, &set, None), want, "{q} AS{origin}");
    }
}

//! Reference implementations used by the integration tests. Everything here
//! works packet by packet and avoids the crate's header-space code.

#![allow(dead_code)]

use std::collections::BTreeSet;

use fwportion::model::{Action, Direction, Domain, PacketHeader, Policy, ProtoId, Rule};
use fwportion::space::Interval;
use rand::rngs::StdRng;
use rand::Rng;

pub const ACTIONS: [Action; 3] = [Action::Accept, Action::Deny, Action::Drop];

pub fn small_domain(bits: u8) -> Domain {
    Domain::new(bits, bits, ["TCP", "UDP"]).unwrap()
}

/// Every packet of the domain, in a fixed order.
pub fn all_packets(d: &Domain) -> Vec<PacketHeader> {
    let mut out = Vec::new();
    for protocol in d.protocol_ids() {
        for direction in [Direction::Input, Direction::Output] {
            for src_ip in 0..=d.ip_max() {
                for src_port in 0..=d.port_max() {
                    for dst_ip in 0..=d.ip_max() {
                        for dst_port in 0..=d.port_max() {
                            out.push(PacketHeader { protocol, direction, src_ip, src_port, dst_ip, dst_port });
                        }
                    }
                }
            }
        }
    }
    out
}

fn within(iv: Interval, v: u32) -> bool {
    iv.lo() <= v && v <= iv.hi()
}

pub fn rule_covers(r: &Rule, p: &PacketHeader) -> bool {
    r.protocol.is_none_or(|id| id == p.protocol)
        && r.direction == p.direction
        && within(r.src_ip, p.src_ip)
        && within(r.src_port, p.src_port)
        && within(r.dst_ip, p.dst_ip)
        && within(r.dst_port, p.dst_port)
}

/// Linear first-match: `(action, winning 1-based index)`.
pub fn first_match(rules: &[Rule], default: Action, p: &PacketHeader) -> (Action, Option<usize>) {
    rules
        .iter()
        .enumerate()
        .find(|(_, r)| rule_covers(r, p))
        .map_or((default, None), |(i, r)| (r.action, Some(i + 1)))
}

pub fn policy_first_match(policy: &Policy, p: &PacketHeader) -> (Action, Option<usize>) {
    first_match(policy.rules(), policy.default_action(), p)
}

pub fn random_interval(rng: &mut StdRng, max: u32) -> Interval {
    match rng.gen_range(0..4) {
        0 => Interval::new(0, max),
        1 => Interval::single(rng.gen_range(0..=max)),
        _ => {
            let a = rng.gen_range(0..=max);
            let b = rng.gen_range(0..=max);
            Interval::new(a.min(b), a.max(b))
        }
    }
}

pub fn random_rule(rng: &mut StdRng, d: &Domain) -> Rule {
    let ids: Vec<ProtoId> = d.protocol_ids().collect();
    let direction = if rng.gen_bool(0.5) { Direction::Input } else { Direction::Output };
    let mut r = Rule::any(d, direction, ACTIONS[rng.gen_range(0..3)]);
    if rng.gen_bool(0.6) {
        r.protocol = Some(ids[rng.gen_range(0..ids.len())]);
    }
    r.src_ip = random_interval(rng, d.ip_max());
    r.src_port = random_interval(rng, d.port_max());
    r.dst_ip = random_interval(rng, d.ip_max());
    r.dst_port = random_interval(rng, d.port_max());
    r
}

pub fn random_policy(rng: &mut StdRng, d: &Domain, max_rules: usize) -> Policy {
    let n = rng.gen_range(0..=max_rules);
    let rules = (0..n).map(|_| random_rule(rng, d)).collect();
    Policy::new(d.clone(), ACTIONS[rng.gen_range(0..3)], rules).unwrap()
}

/// Random policy over `d` with the given default action.
pub fn random_policy_with_default(rng: &mut StdRng, d: &Domain, max_rules: usize, default: Action) -> Policy {
    let n = rng.gen_range(0..=max_rules);
    let rules = (0..n).map(|_| random_rule(rng, d)).collect();
    Policy::new(d.clone(), default, rules).unwrap()
}

/// Per-field value sets of a rule, in classification order.
pub fn field_sets(r: &Rule, d: &Domain) -> [BTreeSet<u32>; 6] {
    let range = |iv: Interval| (iv.lo()..=iv.hi()).collect::<BTreeSet<u32>>();
    let protocols = match r.protocol {
        Some(id) => BTreeSet::from([u32::from(id.0)]),
        None => d.protocol_ids().map(|id| u32::from(id.0)).collect(),
    };
    let direction = BTreeSet::from([match r.direction {
        Direction::Input => 0,
        Direction::Output => 1,
    }]);
    [protocols, range(r.src_ip), range(r.src_port), range(r.dst_ip), range(r.dst_port), direction]
}

/// Set comparison named like the crate's field relations.
pub fn compare_sets(a: &BTreeSet<u32>, b: &BTreeSet<u32>) -> &'static str {
    if a == b {
        "EQUAL"
    } else if a.is_disjoint(b) {
        "DISJOINT"
    } else if a.is_subset(b) {
        "SUBSET"
    } else if a.is_superset(b) {
        "SUPERSET"
    } else {
        "PARTIAL"
    }
}

/// Pair class from per-field comparisons: any disjoint field separates the
/// rules; all equal is a full match; a partial overlap in some field is an
/// incomplete match; subsets running both ways are interrelated; the rest
/// (one-way containment) almost match.
pub fn class_from_fields(fields: &[&str]) -> &'static str {
    if fields.contains(&"DISJOINT") {
        "COMPLETELY_DISJOINT"
    } else if fields.iter().all(|f| *f == "EQUAL") {
        "COMPLETELY_MATCHED"
    } else if fields.contains(&"PARTIAL") {
        "INCOMPLETELY_MATCH"
    } else if fields.contains(&"SUBSET") && fields.contains(&"SUPERSET") {
        "INTERRELATED"
    } else {
        "ALMOST_MATCH"
    }
}

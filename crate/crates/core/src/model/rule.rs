use std::fmt;

use crate::error::{Error, Result};
use crate::model::pattern::{
    parse_ip_value, parse_port_value, render_ip_pattern, render_ip_value, render_port_pattern,
};
use crate::model::{Action, Direction, Domain, ProtoId};
use crate::space::Interval;

/// One ordered policy entry: `<protocol, direction, src ip, src port,
/// dst ip, dst port, action>` with every pattern normalized to an interval.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Rule {
    /// 1-based priority; lower wins.
    pub index: usize,
    /// `None` matches every protocol.
    pub protocol: Option<ProtoId>,
    pub direction: Direction,
    pub src_ip: Interval,
    pub src_port: Interval,
    pub dst_ip: Interval,
    pub dst_port: Interval,
    pub action: Action,
}

impl Rule {
    /// A rule matching every packet of `direction` in the domain.
    pub fn any(domain: &Domain, direction: Direction, action: Action) -> Self {
        Rule {
            index: 0,
            protocol: None,
            direction,
            src_ip: domain.ip_range(),
            src_port: domain.port_range(),
            dst_ip: domain.ip_range(),
            dst_port: domain.port_range(),
            action,
        }
    }

    pub fn validate(&self, domain: &Domain) -> Result<()> {
        let in_ip = |iv: Interval| domain.ip_range().contains_interval(&iv);
        let in_port = |iv: Interval| domain.port_range().contains_interval(&iv);
        if !in_ip(self.src_ip) || !in_ip(self.dst_ip) {
            return Err(Error::OutOfDomain { field: "ip", text: format!("{:?}", self) });
        }
        if !in_port(self.src_port) || !in_port(self.dst_port) {
            return Err(Error::OutOfDomain { field: "port", text: format!("{:?}", self) });
        }
        if let Some(p) = self.protocol {
            if usize::from(p.0) >= domain.protocol_count() {
                return Err(Error::UnknownProtocol(format!("#{}", p.0)));
            }
            if domain.is_icmp(p) {
                let ok = |iv: Interval| iv == domain.port_range() || iv == Interval::single(0);
                if !ok(self.src_port) || !ok(self.dst_port) {
                    return Err(Error::IcmpPorts);
                }
            }
        }
        Ok(())
    }

    /// Same header tuple, action aside.
    pub fn same_match(&self, other: &Rule) -> bool {
        self.protocol == other.protocol
            && self.direction == other.direction
            && self.src_ip == other.src_ip
            && self.src_port == other.src_port
            && self.dst_ip == other.dst_ip
            && self.dst_port == other.dst_port
    }

    pub fn matches(&self, pkt: &PacketHeader) -> bool {
        self.direction == pkt.direction
            && self.protocol.is_none_or(|p| p == pkt.protocol)
            && self.src_ip.contains(pkt.src_ip)
            && self.src_port.contains(pkt.src_port)
            && self.dst_ip.contains(pkt.dst_ip)
            && self.dst_port.contains(pkt.dst_port)
    }

    /// Borrowing adapter that prints the rule in policy-file syntax.
    pub fn display<'a>(&'a self, domain: &'a Domain) -> RuleDisplay<'a> {
        RuleDisplay { rule: self, domain }
    }
}

pub struct RuleDisplay<'a> {
    rule: &'a Rule,
    domain: &'a Domain,
}

impl fmt::Display for RuleDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (r, d) = (self.rule, self.domain);
        write!(
            f,
            "{}, {}, {}, {}, {}, {}, {}",
            r.protocol.map_or("ANY", |p| d.protocol_name(p)),
            r.direction,
            render_ip_pattern(r.src_ip, d),
            render_port_pattern(r.src_port, d),
            render_ip_pattern(r.dst_ip, d),
            render_port_pattern(r.dst_port, d),
            r.action
        )
    }
}

/// A concrete packet header inside a domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PacketHeader {
    pub protocol: ProtoId,
    pub direction: Direction,
    pub src_ip: u32,
    pub src_port: u32,
    pub dst_ip: u32,
    pub dst_port: u32,
}

impl PacketHeader {
    pub fn in_domain(&self, domain: &Domain) -> bool {
        usize::from(self.protocol.0) < domain.protocol_count()
            && self.src_ip <= domain.ip_max()
            && self.dst_ip <= domain.ip_max()
            && self.src_port <= domain.port_max()
            && self.dst_port <= domain.port_max()
    }

    pub fn display<'a>(&'a self, domain: &'a Domain) -> impl fmt::Display + 'a {
        PacketDisplay { pkt: self, domain }
    }
}

struct PacketDisplay<'a> {
    pkt: &'a PacketHeader,
    domain: &'a Domain,
}

impl fmt::Display for PacketDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (p, d) = (self.pkt, self.domain);
        write!(
            f,
            "{} {} {}:{} {}:{}",
            d.protocol_name(p.protocol),
            p.direction,
            render_ip_value(p.src_ip, d),
            p.src_port,
            render_ip_value(p.dst_ip, d),
            p.dst_port
        )
    }
}

/// Parses `PROTO DIR SRC:SPT DST:DPT`. ICMP packets carry no ports; their
/// port values are read for bounds checking and then zeroed.
pub fn parse_packet(text: &str, domain: &Domain) -> Result<PacketHeader> {
    let malformed = || Error::MalformedPacket(text.trim().to_string());
    let parts: Vec<&str> = text.split_whitespace().collect();
    let [proto, dir, src, dst] = parts.as_slice() else {
        return Err(malformed());
    };
    let protocol = domain
        .protocol_id(proto)
        .ok_or_else(|| Error::UnknownProtocol(proto.to_string()))?;
    let direction: Direction = dir.parse()?;
    let endpoint = |s: &str| -> Result<(u32, u32)> {
        let (ip, port) = s.rsplit_once(':').ok_or_else(malformed)?;
        Ok((parse_ip_value(ip, domain)?, parse_port_value(port, domain)?))
    };
    let (src_ip, mut src_port) = endpoint(src)?;
    let (dst_ip, mut dst_port) = endpoint(dst)?;
    if domain.is_icmp(protocol) {
        src_port = 0;
        dst_port = 0;
    }
    Ok(PacketHeader { protocol, direction, src_ip, src_port, dst_ip, dst_port })
}

/// Outcome of evaluating a packet: the action and the deciding rule, or
/// `None` when the default applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Decision {
    pub action: Action,
    pub rule: Option<usize>,
}

/// Ordered rule list plus default action over a domain. Rule indices are
/// kept dense `1..=n` in list order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Policy {
    rules: Vec<Rule>,
    default_action: Action,
    domain: Domain,
}

impl Policy {
    /// Validates every rule against the domain and renumbers them `1..=n`.
    pub fn new(domain: Domain, default_action: Action, rules: Vec<Rule>) -> Result<Self> {
        let mut rules = rules;
        for (i, rule) in rules.iter_mut().enumerate() {
            rule.index = i + 1;
            rule.validate(&domain).map_err(|e| e.at_line(i + 1))?;
        }
        Ok(Policy { rules, default_action, domain })
    }

    pub fn empty(domain: Domain, default_action: Action) -> Self {
        Policy { rules: Vec::new(), default_action, domain }
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    /// Rule by 1-based index.
    pub fn rule(&self, index: usize) -> Option<&Rule> {
        index.checked_sub(1).and_then(|i| self.rules.get(i))
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn default_action(&self) -> Action {
        self.default_action
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// Copy of the policy with the rule at `index` taken out.
    pub fn without_rule(&self, index: usize) -> Policy {
        let rules = self
            .rules
            .iter()
            .filter(|r| r.index != index)
            .cloned()
            .collect();
        Policy::new(self.domain.clone(), self.default_action, rules)
            .expect("subset of a valid policy is valid")
    }

    /// Linear first-match scan.
    pub fn first_match(&self, pkt: &PacketHeader) -> Decision {
        self.rules
            .iter()
            .find(|r| r.matches(pkt))
            .map_or(Decision { action: self.default_action, rule: None }, |r| Decision {
                action: r.action,
                rule: Some(r.index),
            })
    }
}

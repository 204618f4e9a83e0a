//! Baseline blocking policy for a front/back firewall pair with a DMZ, and
//! the DMZ topology checks.
//!
//! The generated policy opens each DMZ service inbound, then denies:
//! inbound ICMP, inbound traffic claiming a private source, inbound traffic
//! aimed at the firewall from outside the management hosts, inbound
//! traffic spoofing an internal source, inbound SNMP from outside the
//! management hosts, loopback and unspecified (`0.0.0.0`) addresses in
//! either direction, and broadcast targets. Source-routed packets cannot
//! be told apart in a 5-tuple model and are only noted.

use std::collections::BTreeMap;
use std::fmt;
use std::net::Ipv4Addr;

use roxmltree::Node;

use crate::error::{Error, Result};
use crate::model::pattern::{parse_ip_pattern, render_ip_pattern};
use crate::model::xml::{parse_document, root_header};
use crate::model::{serialize_policy, Action, Direction, Domain, Policy, PolicyFormat, Rule};
use crate::space::{Interval, IntervalSet};

const PRIVATE_RANGES: [&str; 3] = ["10.0.0.0/8", "172.16.0.0/12", "192.168.0.0/16"];
const LOOPBACK: &str = "127.0.0.0/8";
const SNMP_PORTS: (u32, u32) = (161, 162);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DmzServer {
    pub name: Option<String>,
    pub ip: Ipv4Addr,
    pub port: u16,
    pub protocol: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameworkConfig {
    pub domain: Domain,
    pub internal_ranges: Vec<Interval>,
    pub firewall_addrs: Vec<Ipv4Addr>,
    pub dmz_servers: Vec<DmzServer>,
    /// Sources allowed to reach the firewall and to speak SNMP.
    pub management_hosts: Vec<Interval>,
    pub default_action: Action,
}

impl FrameworkConfig {
    pub fn new(default_action: Action) -> Self {
        FrameworkConfig {
            domain: Domain::standard(),
            internal_ranges: Vec::new(),
            firewall_addrs: Vec::new(),
            dmz_servers: Vec::new(),
            management_hosts: Vec::new(),
            default_action,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        let d = &self.domain;
        if d.ip_bits() != 32 {
            return bad("baseline needs a 32-bit address domain".into());
        }
        for proto in ["TCP", "UDP", "ICMP"] {
            if d.protocol_id(proto).is_none() {
                return bad(format!("domain must declare {proto}"));
            }
        }
        for (i, a) in self.internal_ranges.iter().enumerate() {
            for b in &self.internal_ranges[i + 1..] {
                if a.intersect(b).is_some() {
                    return bad(format!(
                        "internal ranges {} and {} overlap",
                        render_ip_pattern(*a, d),
                        render_ip_pattern(*b, d)
                    ));
                }
            }
        }
        for s in &self.dmz_servers {
            let ip = u32::from(s.ip);
            if self.internal_ranges.iter().any(|r| r.contains(ip)) {
                return bad(format!("DMZ server {} lies inside an internal range", s.ip));
            }
            let proto = d
                .protocol_id(&s.protocol)
                .ok_or_else(|| Error::InvalidConfig(format!("unknown server protocol {}", s.protocol)))?;
            if d.is_icmp(proto) {
                return bad(format!("DMZ server {} cannot offer an ICMP service", s.ip));
            }
            if u32::from(s.port) > d.port_max() {
                return bad(format!("DMZ server port {} outside the domain", s.port));
            }
        }
        Ok(())
    }
}

/// The blocking-list entries a generated rule can stem from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BaselineItem {
    DmzService,
    InboundIcmp,
    PrivateSource,
    FirewallTarget,
    SpoofedInternal,
    Snmp,
    Loopback,
    Unspecified,
    Broadcast,
    SourceRouting,
}

impl BaselineItem {
    pub const ALL: [BaselineItem; 10] = [
        BaselineItem::DmzService,
        BaselineItem::InboundIcmp,
        BaselineItem::PrivateSource,
        BaselineItem::FirewallTarget,
        BaselineItem::SpoofedInternal,
        BaselineItem::Snmp,
        BaselineItem::Loopback,
        BaselineItem::Unspecified,
        BaselineItem::Broadcast,
        BaselineItem::SourceRouting,
    ];

    pub fn description(&self) -> &'static str {
        match self {
            BaselineItem::DmzService => "accept inbound DMZ service traffic",
            BaselineItem::InboundIcmp => "deny all inbound ICMP",
            BaselineItem::PrivateSource => "deny inbound from private class A/B/C sources",
            BaselineItem::FirewallTarget => "deny inbound to the firewall from non-management sources",
            BaselineItem::SpoofedInternal => "deny inbound claiming an internal source",
            BaselineItem::Snmp => "deny inbound SNMP from non-management sources",
            BaselineItem::Loopback => "deny loopback source or target, both directions",
            BaselineItem::Unspecified => "deny 0.0.0.0 source or target, both directions",
            BaselineItem::Broadcast => "deny broadcast targets, both directions",
            BaselineItem::SourceRouting => "source-routed inbound traffic (not expressible as a 5-tuple)",
        }
    }
}

impl fmt::Display for BaselineItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.description())
    }
}

#[derive(Debug, Clone)]
pub struct Baseline {
    pub policy: Policy,
    /// Each blocking-list entry with the indices of the rules it produced.
    pub mapping: Vec<(BaselineItem, Vec<usize>)>,
}

impl Baseline {
    /// CSV policy text preceded by the mapping table as comments.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (item, rules) in &self.mapping {
            let list = if rules.is_empty() {
                "none".to_string()
            } else {
                rules.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(",")
            };
            out.push_str(&format!("# {item}: rules {list}\n"));
        }
        out.push_str(&serialize_policy(&self.policy, PolicyFormat::Csv));
        out
    }
}

fn complement(ranges: &[Interval], domain: &Domain) -> Vec<Interval> {
    IntervalSet::from_interval(domain.ip_range())
        .subtract(&IntervalSet::from_intervals(ranges.iter().copied()))
        .intervals()
        .to_vec()
}

pub fn generate_baseline(config: &FrameworkConfig) -> Result<Baseline> {
    config.validate()?;
    let d = &config.domain;
    let proto = |p: &str| d.protocol_id(p).expect("validated");
    let block = |ip: &str| parse_ip_pattern(ip, d).expect("constant pattern");
    let deny_in = || Rule::any(d, Direction::Input, Action::Deny);

    let mut rules: Vec<Rule> = Vec::new();
    let mut mapping: BTreeMap<BaselineItem, Vec<usize>> = BTreeMap::new();
    let mut emit = |item: BaselineItem, rule: Rule, rules: &mut Vec<Rule>| {
        rules.push(rule);
        mapping.entry(item).or_default().push(rules.len());
    };

    for s in &config.dmz_servers {
        let mut r = Rule::any(d, Direction::Input, Action::Accept);
        r.protocol = Some(proto(&s.protocol));
        r.dst_ip = Interval::single(u32::from(s.ip));
        r.dst_port = Interval::single(u32::from(s.port));
        emit(BaselineItem::DmzService, r, &mut rules);
    }

    let mut icmp = deny_in();
    icmp.protocol = Some(proto("ICMP"));
    emit(BaselineItem::InboundIcmp, icmp, &mut rules);

    let mut private = Vec::new();
    for range in PRIVATE_RANGES {
        let mut r = deny_in();
        r.src_ip = block(range);
        private.push((r.src_ip, rules.len() + 1));
        emit(BaselineItem::PrivateSource, r, &mut rules);
    }
    let private_set = IntervalSet::from_intervals(private.iter().map(|(iv, _)| *iv));

    let outsiders = complement(&config.management_hosts, d);
    for fw in &config.firewall_addrs {
        for src in &outsiders {
            let mut r = deny_in();
            r.src_ip = *src;
            r.dst_ip = Interval::single(u32::from(*fw));
            emit(BaselineItem::FirewallTarget, r, &mut rules);
        }
    }

    // The private-source rules already deny the private part of an internal
    // range; repeating it would leave a rule that only the earlier service
    // ACCEPTs and DENYs cover, i.e. a shadowed one.
    let mut covered_by_private = Vec::new();
    for range in &config.internal_ranges {
        let rest = IntervalSet::from_interval(*range).subtract(&private_set);
        for src in rest.intervals() {
            let mut r = deny_in();
            r.src_ip = *src;
            emit(BaselineItem::SpoofedInternal, r, &mut rules);
        }
        for (iv, idx) in &private {
            if iv.intersect(range).is_some() && !covered_by_private.contains(idx) {
                covered_by_private.push(*idx);
            }
        }
    }

    for src in &outsiders {
        let mut r = deny_in();
        r.protocol = Some(proto("UDP"));
        r.src_ip = *src;
        r.dst_port = Interval::new(SNMP_PORTS.0, SNMP_PORTS.1);
        emit(BaselineItem::Snmp, r, &mut rules);
    }

    let both_ends = |item: BaselineItem, addr: Interval, rules: &mut Vec<Rule>, emit: &mut dyn FnMut(BaselineItem, Rule, &mut Vec<Rule>)| {
        for dir in Direction::ALL {
            let mut src = Rule::any(d, dir, Action::Deny);
            src.src_ip = addr;
            emit(item, src, rules);
            let mut dst = Rule::any(d, dir, Action::Deny);
            dst.dst_ip = addr;
            emit(item, dst, rules);
        }
    };
    both_ends(BaselineItem::Loopback, block(LOOPBACK), &mut rules, &mut emit);
    both_ends(BaselineItem::Unspecified, Interval::single(0), &mut rules, &mut emit);

    let mut broadcasts = vec![Interval::single(u32::MAX)];
    for range in &config.internal_ranges {
        // subnet-directed broadcast; /31 and /32 have none
        if range.len() >= 4 {
            broadcasts.push(Interval::single(range.hi()));
        }
    }
    for addr in broadcasts {
        for dir in Direction::ALL {
            let mut r = Rule::any(d, dir, Action::Deny);
            r.dst_ip = addr;
            emit(BaselineItem::Broadcast, r, &mut rules);
        }
    }

    let policy = Policy::new(d.clone(), config.default_action, rules)?;
    let spoofed = mapping.entry(BaselineItem::SpoofedInternal).or_default();
    spoofed.extend(covered_by_private);
    spoofed.sort_unstable();
    let mapping = BaselineItem::ALL
        .iter()
        .map(|item| (*item, mapping.get(item).cloned().unwrap_or_default()))
        .collect();
    Ok(Baseline { policy, mapping })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Zone {
    External,
    Dmz,
    Internal,
    Firewall,
}

impl Zone {
    pub fn as_str(&self) -> &'static str {
        match self {
            Zone::External => "EXTERNAL",
            Zone::Dmz => "DMZ",
            Zone::Internal => "INTERNAL",
            Zone::Firewall => "FIREWALL",
        }
    }
}

impl std::str::FromStr for Zone {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "EXTERNAL" => Ok(Zone::External),
            "DMZ" => Ok(Zone::Dmz),
            "INTERNAL" => Ok(Zone::Internal),
            "FIREWALL" => Ok(Zone::Firewall),
            other => Err(Error::InvalidConfig(format!("unknown zone `{other}`"))),
        }
    }
}

/// Named nodes, each in a zone, joined by undirected links.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Topology {
    nodes: BTreeMap<String, Zone>,
    links: Vec<(String, String)>,
}

impl Topology {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, name: &str, zone: Zone) -> Result<()> {
        if self.nodes.insert(name.to_string(), zone).is_some() {
            return Err(Error::InvalidConfig(format!("node `{name}` declared twice")));
        }
        Ok(())
    }

    pub fn add_link(&mut self, a: &str, b: &str) -> Result<()> {
        for n in [a, b] {
            if !self.nodes.contains_key(n) {
                return Err(Error::InvalidConfig(format!("link references unknown node `{n}`")));
            }
        }
        self.links.push((a.to_string(), b.to_string()));
        Ok(())
    }

    pub fn zone(&self, name: &str) -> Option<Zone> {
        self.nodes.get(name).copied()
    }

    pub fn links(&self) -> &[(String, String)] {
        &self.links
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopologyViolation {
    pub a: String,
    pub b: String,
    pub zones: (Zone, Zone),
}

impl fmt::Display for TopologyViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} ({}) links to {} ({}) without a firewall between them",
            self.a,
            self.zones.0.as_str(),
            self.b,
            self.zones.1.as_str()
        )
    }
}

/// Flags every link that joins EXTERNAL, DMZ and INTERNAL nodes of
/// different zones directly. Any firewall-free path between those zones
/// must use such a link, so checking links suffices.
pub fn validate_topology(t: &Topology) -> Vec<TopologyViolation> {
    t.links
        .iter()
        .filter_map(|(a, b)| {
            let (za, zb) = (t.nodes[a], t.nodes[b]);
            let forbidden = za != zb && za != Zone::Firewall && zb != Zone::Firewall;
            forbidden.then(|| TopologyViolation { a: a.clone(), b: b.clone(), zones: (za, zb) })
        })
        .collect()
}

fn attr<'a>(node: Node<'a, '_>, name: &str) -> Result<&'a str> {
    node.attribute(name).ok_or_else(|| {
        Error::InvalidConfig(format!("<{}> is missing `{name}`", node.tag_name().name()))
    })
}

/// Reads the `<framework>` section of an XML policy document.
pub fn parse_framework_xml(text: &str) -> Result<(FrameworkConfig, Topology)> {
    let doc = parse_document(text)?;
    let root = doc.root_element();
    let header = root_header(root)?;
    let mut config = FrameworkConfig::new(header.default_action.unwrap_or(Action::Deny));
    config.domain = header.domain()?;
    let d = config.domain.clone();
    let mut topology = Topology::new();

    let framework = root
        .children()
        .find(|n| n.has_tag_name("framework"))
        .ok_or_else(|| Error::InvalidConfig("document has no <framework> section".into()))?;
    for node in framework.children().filter(Node::is_element) {
        match node.tag_name().name() {
            "internal" => config.internal_ranges.push(parse_ip_pattern(attr(node, "range")?, &d)?),
            "management" => config.management_hosts.push(parse_ip_pattern(attr(node, "range")?, &d)?),
            "firewall" => config.firewall_addrs.push(parse_addr(attr(node, "addr")?)?),
            "server" => {
                let port = attr(node, "port")?;
                config.dmz_servers.push(DmzServer {
                    name: node.attribute("name").map(str::to_string),
                    ip: parse_addr(attr(node, "ip")?)?,
                    port: port
                        .parse()
                        .map_err(|_| Error::InvalidConfig(format!("bad server port `{port}`")))?,
                    protocol: node.attribute("proto").unwrap_or("TCP").to_ascii_uppercase(),
                });
            }
            "topology" => {
                for t in node.children().filter(Node::is_element) {
                    match t.tag_name().name() {
                        "node" => topology.add_node(attr(t, "name")?, attr(t, "zone")?.parse()?)?,
                        "link" => topology.add_link(attr(t, "a")?, attr(t, "b")?)?,
                        other => return Err(Error::InvalidConfig(format!("unexpected <{other}> in topology"))),
                    }
                }
            }
            other => return Err(Error::InvalidConfig(format!("unexpected <{other}> in framework"))),
        }
    }
    Ok((config, topology))
}

fn parse_addr(text: &str) -> Result<Ipv4Addr> {
    text.trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("bad address `{text}`")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_packet;
    use crate::relations::detect_anomalies;

    fn config() -> FrameworkConfig {
        let d = Domain::standard();
        let mut c = FrameworkConfig::new(Action::Deny);
        c.internal_ranges.push(parse_ip_pattern("10.2.0.0/16", &d).unwrap());
        c.firewall_addrs.push(Ipv4Addr::new(10, 2, 0, 1));
        c.management_hosts.push(parse_ip_pattern("10.2.0.10", &d).unwrap());
        c.dmz_servers.push(DmzServer {
            name: Some("mail".into()),
            ip: Ipv4Addr::new(10, 1, 0, 5),
            port: 25,
            protocol: "TCP".into(),
        });
        c.dmz_servers.push(DmzServer {
            name: Some("web".into()),
            ip: Ipv4Addr::new(10, 1, 0, 6),
            port: 80,
            protocol: "TCP".into(),
        });
        c
    }

    #[test]
    fn service_rules_come_first() {
        let b = generate_baseline(&config()).unwrap();
        let d = b.policy.domain();
        let first = b.policy.rules()[0].display(d).to_string();
        assert_eq!(first, "TCP, INPUT, ANY, ANY, 10.1.0.5, 25, ACCEPT");
        let last_accept = b.policy.rules().iter().rposition(|r| r.action == Action::Accept).unwrap();
        let first_deny = b.policy.rules().iter().position(|r| r.action != Action::Accept).unwrap();
        assert!(last_accept < first_deny);
    }

    #[test]
    fn icmp_rule_present() {
        let b = generate_baseline(&config()).unwrap();
        let d = b.policy.domain();
        let lines: Vec<String> = b.policy.rules().iter().map(|r| r.display(d).to_string()).collect();
        assert!(lines.contains(&"ICMP, INPUT, ANY, ANY, ANY, ANY, DENY".to_string()));
    }

    #[test]
    fn no_shadowed_rules() {
        let b = generate_baseline(&config()).unwrap();
        let report = detect_anomalies(&b.policy);
        assert!(report.shadowed.is_empty(), "{:?}", report.shadowed);
    }

    #[test]
    fn every_expressible_item_maps_to_rules() {
        let b = generate_baseline(&config()).unwrap();
        for (item, rules) in &b.mapping {
            assert_eq!(rules.is_empty(), *item == BaselineItem::SourceRouting, "{item:?}");
        }
        assert!(b.to_csv().contains("# source-routed inbound traffic (not expressible as a 5-tuple): rules none"));
    }

    #[test]
    fn management_host_may_reach_firewall() {
        let b = generate_baseline(&config()).unwrap();
        let d = b.policy.domain();
        let from_mgmt = parse_packet("TCP INPUT 10.2.0.10:5000 10.2.0.1:22", d).unwrap();
        // still caught by the private-source rule, but not by a firewall-target rule
        let decision = b.policy.first_match(&from_mgmt);
        let fw_rules = &b.mapping.iter().find(|(i, _)| *i == BaselineItem::FirewallTarget).unwrap().1;
        assert!(!fw_rules.contains(&decision.rule.unwrap()));
    }

    #[test]
    fn invalid_configs() {
        let d = Domain::standard();
        let mut c = config();
        c.internal_ranges.push(parse_ip_pattern("10.2.5.0/24", &d).unwrap());
        assert!(matches!(generate_baseline(&c), Err(Error::InvalidConfig(_))));

        let mut c = config();
        c.dmz_servers[0].ip = Ipv4Addr::new(10, 2, 3, 4);
        assert!(matches!(generate_baseline(&c), Err(Error::InvalidConfig(_))));

        let mut c = config();
        c.domain = Domain::new(32, 16, ["TCP", "UDP"]).unwrap();
        assert!(matches!(generate_baseline(&c), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn topology_checks() {
        let mut t = Topology::new();
        for (n, z) in [("inet", Zone::External), ("fw1", Zone::Firewall), ("dmz", Zone::Dmz), ("fw2", Zone::Firewall), ("lan", Zone::Internal)] {
            t.add_node(n, z).unwrap();
        }
        for (a, b) in [("inet", "fw1"), ("fw1", "dmz"), ("dmz", "fw2"), ("fw2", "lan")] {
            t.add_link(a, b).unwrap();
        }
        assert!(validate_topology(&t).is_empty());

        let mut bad = t.clone();
        bad.add_link("dmz", "lan").unwrap();
        assert_eq!(validate_topology(&bad).len(), 1);

        let mut bad = t.clone();
        bad.add_link("inet", "lan").unwrap();
        let v = validate_topology(&bad);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].zones, (Zone::External, Zone::Internal));

        assert!(t.clone().add_link("inet", "nowhere").is_err());
        assert!(t.clone().add_node("inet", Zone::Dmz).is_err());
    }

    #[test]
    fn framework_xml() {
        let text = r#"<policy default="DROP">
          <framework>
            <internal range="10.2.0.0/16"/>
            <firewall addr="10.2.0.1"/>
            <management range="10.2.0.10"/>
            <server name="mail" ip="10.1.0.5" port="25" proto="TCP"/>
            <topology>
              <node name="inet" zone="EXTERNAL"/>
              <node name="fw1" zone="FIREWALL"/>
              <link a="inet" b="fw1"/>
            </topology>
          </framework>
        </policy>"#;
        let (c, t) = parse_framework_xml(text).unwrap();
        assert_eq!(c.default_action, Action::Drop);
        assert_eq!(c.dmz_servers[0].port, 25);
        assert_eq!(t.links().len(), 1);
        assert!(parse_framework_xml(r#"<policy default="DENY"/>"#).is_err());
    }
}

//! Line-oriented policy format:
//!
//! ```text
//! #! default=DENY ip-bits=32 port-bits=16 protocols=TCP,UDP,ICMP
//! # comment
//! TCP, INPUT, 10.0.0.3, 139, 121.10.5.3, 49621, ACCEPT
//! ```
//!
//! The optional `#!` header carries the default action and domain; plain
//! `#` lines and blank lines are skipped.

use crate::error::{Error, Result};
use crate::model::pattern::{parse_ip_pattern, parse_port_pattern};
use crate::model::{Action, Domain, Policy, Rule};

const FIELDS: usize = 7;

pub fn parse_rule_line(text: &str, index: usize, domain: &Domain) -> Result<Rule> {
    let fields: Vec<&str> = text.split(',').map(str::trim).collect();
    if fields.len() != FIELDS {
        return Err(Error::FieldCount { expected: FIELDS, found: fields.len() });
    }
    let protocol = if fields[0].eq_ignore_ascii_case("ANY") {
        None
    } else {
        Some(
            domain
                .protocol_id(fields[0])
                .ok_or_else(|| Error::UnknownProtocol(fields[0].to_string()))?,
        )
    };
    let rule = Rule {
        index,
        protocol,
        direction: fields[1].parse()?,
        src_ip: parse_ip_pattern(fields[2], domain)?,
        src_port: parse_port_pattern(fields[3], domain)?,
        dst_ip: parse_ip_pattern(fields[4], domain)?,
        dst_port: parse_port_pattern(fields[5], domain)?,
        action: fields[6].parse()?,
    };
    rule.validate(domain)?;
    Ok(rule)
}

pub fn parse_policy_file(text: &str, default_action: Action, domain: &Domain) -> Result<Policy> {
    let mut rules = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let rule = parse_rule_line(line, rules.len() + 1, domain).map_err(|e| e.at_line(lineno + 1))?;
        rules.push(rule);
    }
    Policy::new(domain.clone(), default_action, rules)
}

/// Settings read from a `#!` header line.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Header {
    pub default_action: Option<Action>,
    pub ip_bits: Option<u8>,
    pub port_bits: Option<u8>,
    pub protocols: Option<Vec<String>>,
}

impl Header {
    pub fn domain(&self) -> Result<Domain> {
        let std = Domain::standard();
        let protocols = match &self.protocols {
            Some(p) => p.clone(),
            None => std.protocols().to_vec(),
        };
        Domain::new(
            self.ip_bits.unwrap_or(std.ip_bits()),
            self.port_bits.unwrap_or(std.port_bits()),
            protocols,
        )
    }
}

pub(crate) fn parse_header_attr(header: &mut Header, key: &str, value: &str) -> Result<()> {
    let bad = || Error::Schema(format!("bad value `{value}` for `{key}`"));
    match key {
        "default" => {
            if header.default_action.is_some() {
                return Err(Error::DuplicateDefault);
            }
            header.default_action = Some(value.parse()?);
        }
        "ip-bits" => header.ip_bits = Some(value.trim().parse().map_err(|_| bad())?),
        "port-bits" => header.port_bits = Some(value.trim().parse().map_err(|_| bad())?),
        "protocols" => {
            header.protocols = Some(value.split(',').map(|s| s.trim().to_string()).collect())
        }
        _ => return Err(Error::Schema(format!("unknown header key `{key}`"))),
    }
    Ok(())
}

fn parse_header_line(line: &str) -> Result<Header> {
    let mut header = Header::default();
    for item in line.split_whitespace() {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| Error::Schema(format!("header item `{item}` is not key=value")))?;
        parse_header_attr(&mut header, key, value)?;
    }
    Ok(header)
}

/// Reads a CSV policy, taking default action and domain from its `#!`
/// header when present. `fallback` applies when no default is declared.
pub fn read_csv_policy(text: &str, fallback: Action) -> Result<Policy> {
    let mut header = Header::default();
    let mut seen = false;
    for (lineno, line) in text.lines().enumerate() {
        if let Some(rest) = line.trim_start().strip_prefix("#!") {
            if seen {
                return Err(Error::DuplicateDefault.at_line(lineno + 1));
            }
            seen = true;
            header = parse_header_line(rest).map_err(|e| e.at_line(lineno + 1))?;
        }
    }
    let domain = header.domain()?;
    parse_policy_file(text, header.default_action.unwrap_or(fallback), &domain)
}

pub(crate) fn header_line(policy: &Policy) -> String {
    let d = policy.domain();
    format!(
        "#! default={} ip-bits={} port-bits={} protocols={}",
        policy.default_action(),
        d.ip_bits(),
        d.port_bits(),
        d.protocols_joined()
    )
}

pub fn write_csv_policy(policy: &Policy) -> String {
    let mut out = header_line(policy);
    out.push('\n');
    for rule in policy.rules() {
        out.push_str(&rule.display(policy.domain()).to_string());
        out.push('\n');
    }
    out
}

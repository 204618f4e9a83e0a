//! Firewall log parsing, field extraction, aggregate statistics and replay
//! against a policy.
//!
//! Accepted line shape (spaces around `=` are optional):
//!
//! ```text
//! Date: May 25 Time:03:19:01 DENY portmap IN=eth0 SRC=172.168.0.4 DST = 96.17.182.18 PROTO = TCP SPT = 49634 DPT = 80 ACK
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::net::Ipv4Addr;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{Action, Decision, Direction, Domain, PacketHeader, Policy};
use crate::portions::{partition, PortionList};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TcpFlag {
    Syn,
    Fin,
    Ack,
    Rst,
    Psh,
    Urg,
}

impl TcpFlag {
    pub const ALL: [TcpFlag; 6] = [TcpFlag::Syn, TcpFlag::Fin, TcpFlag::Ack, TcpFlag::Rst, TcpFlag::Psh, TcpFlag::Urg];

    pub fn as_str(&self) -> &'static str {
        match self {
            TcpFlag::Syn => "SYN",
            TcpFlag::Fin => "FIN",
            TcpFlag::Ack => "ACK",
            TcpFlag::Rst => "RST",
            TcpFlag::Psh => "PSH",
            TcpFlag::Urg => "URG",
        }
    }
}

impl FromStr for TcpFlag {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        TcpFlag::ALL.into_iter().find(|f| f.as_str() == s).ok_or(())
    }
}

impl fmt::Display for TcpFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LogTime {
    pub hour: u8,
    pub minute: u8,
    pub second: u8,
}

impl FromStr for LogTime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::BadLogField { key: "Time".into(), value: s.to_string() };
        let parts: Vec<&str> = s.split(':').collect();
        let [h, m, sec] = parts.as_slice() else {
            return Err(bad());
        };
        let t = LogTime {
            hour: h.parse().map_err(|_| bad())?,
            minute: m.parse().map_err(|_| bad())?,
            second: sec.parse().map_err(|_| bad())?,
        };
        if t.hour > 23 || t.minute > 59 || t.second > 60 {
            return Err(bad());
        }
        Ok(t)
    }
}

impl fmt::Display for LogTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:02}:{:02}:{:02}", self.hour, self.minute, self.second)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogRecord {
    pub month: String,
    pub day: u8,
    pub time: LogTime,
    pub verdict: Action,
    pub tag: Option<String>,
    pub in_iface: Option<String>,
    pub src_ip: Ipv4Addr,
    pub dst_ip: Ipv4Addr,
    pub protocol: String,
    pub spt: Option<u16>,
    pub dpt: Option<u16>,
    pub flags: BTreeSet<TcpFlag>,
}

const MONTHS: [&str; 12] = ["Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"];

/// Splits `"Key:rest"` style tokens, pulling the value from the next token
/// when `rest` is empty.
fn labelled<'a>(tokens: &[&'a str], i: &mut usize, label: &'static str) -> Result<&'a str> {
    let tok = tokens.get(*i).ok_or(Error::MissingLogKey(label))?;
    let rest = tok
        .strip_prefix(label)
        .and_then(|t| t.strip_prefix(':'))
        .ok_or_else(|| Error::MalformedLog(format!("expected `{label}:`, found `{tok}`")))?;
    *i += 1;
    if !rest.is_empty() {
        return Ok(rest);
    }
    let value = tokens.get(*i).ok_or(Error::MissingLogKey(label))?;
    *i += 1;
    Ok(value)
}

fn key_values(tokens: &[&str]) -> (Vec<(String, String)>, BTreeSet<TcpFlag>) {
    let mut pairs = Vec::new();
    let mut flags = BTreeSet::new();
    let starts_pair = |j: usize| -> bool {
        // token j begins a key, either `K=..` or `K` followed by `=..`
        tokens.get(j).is_some_and(|t| {
            t.contains('=') || tokens.get(j + 1).is_some_and(|n| n.starts_with('='))
        })
    };
    let mut i = 0;
    while i < tokens.len() {
        let tok = tokens[i];
        if let Some((k, v)) = tok.split_once('=') {
            let mut value = v.to_string();
            i += 1;
            if value.is_empty()
                && i < tokens.len()
                && !starts_pair(i)
                && tokens[i].parse::<TcpFlag>().is_err()
            {
                value = tokens[i].to_string();
                i += 1;
            }
            pairs.push((k.to_string(), value));
        } else if tokens.get(i + 1) == Some(&"=") {
            let value = tokens.get(i + 2).copied().unwrap_or_default();
            pairs.push((tok.to_string(), value.to_string()));
            i += 3;
        } else if let Some(v) = tokens.get(i + 1).and_then(|n| n.strip_prefix('=')) {
            pairs.push((tok.to_string(), v.to_string()));
            i += 2;
        } else {
            if let Ok(flag) = tok.parse() {
                flags.insert(flag);
            }
            i += 1;
        }
    }
    (pairs, flags)
}

pub fn parse_log_line(text: &str) -> Result<LogRecord> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let mut i = 0;
    let month = labelled(&tokens, &mut i, "Date")?.to_string();
    if !MONTHS.contains(&month.as_str()) {
        return Err(Error::BadLogField { key: "Date".into(), value: month });
    }
    let day_tok = tokens.get(i).ok_or(Error::MissingLogKey("Date"))?;
    let day: u8 = day_tok
        .parse()
        .ok()
        .filter(|d| (1..=31).contains(d))
        .ok_or_else(|| Error::BadLogField { key: "Date".into(), value: day_tok.to_string() })?;
    i += 1;
    let time: LogTime = labelled(&tokens, &mut i, "Time")?.parse()?;
    let verdict_tok = tokens.get(i).ok_or(Error::MissingLogKey("verdict"))?;
    let verdict: Action = verdict_tok.parse().map_err(|_| Error::BadLogField {
        key: "verdict".into(),
        value: verdict_tok.to_string(),
    })?;
    i += 1;
    let rest = &tokens[i..];
    let tag = rest
        .first()
        .filter(|t| !t.contains('=') && !rest.get(1).is_some_and(|n| n.starts_with('=')))
        .map(|t| t.to_string());
    let rest = if tag.is_some() { &rest[1..] } else { rest };

    let (pairs, flags) = key_values(rest);
    let get = |key: &str| pairs.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
    let bad = |key: &str, value: &str| Error::BadLogField { key: key.to_string(), value: value.to_string() };
    let ip = |key: &'static str| -> Result<Ipv4Addr> {
        let v = get(key).ok_or(Error::MissingLogKey(key))?;
        v.parse().map_err(|_| bad(key, v))
    };
    let port = |key: &'static str| -> Result<Option<u16>> {
        get(key).map(|v| v.parse().map_err(|_| bad(key, v))).transpose()
    };
    let src_ip = ip("SRC")?;
    let dst_ip = ip("DST")?;
    let protocol = get("PROTO").ok_or(Error::MissingLogKey("PROTO"))?;
    if protocol.is_empty() {
        return Err(bad("PROTO", protocol));
    }
    Ok(LogRecord {
        month,
        day,
        time,
        verdict,
        tag,
        in_iface: get("IN").filter(|v| !v.is_empty()).map(str::to_string),
        src_ip,
        dst_ip,
        protocol: protocol.to_ascii_uppercase(),
        spt: port("SPT")?,
        dpt: port("DPT")?,
        flags,
    })
}

impl fmt::Display for LogRecord {
    /// Canonical single-space form without spaces around `=`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Date: {} {} Time:{} {}", self.month, self.day, self.time, self.verdict)?;
        if let Some(tag) = &self.tag {
            write!(f, " {tag}")?;
        }
        if let Some(iface) = &self.in_iface {
            write!(f, " IN={iface}")?;
        }
        write!(f, " SRC={} DST={} PROTO={}", self.src_ip, self.dst_ip, self.protocol)?;
        if let Some(p) = self.spt {
            write!(f, " SPT={p}")?;
        }
        if let Some(p) = self.dpt {
            write!(f, " DPT={p}")?;
        }
        for flag in &self.flags {
            write!(f, " {flag}")?;
        }
        Ok(())
    }
}

/// Parses a whole log, collecting per-line failures instead of stopping.
/// Line numbers are 1-based; blank lines are skipped.
pub fn parse_log(text: &str) -> (Vec<(usize, LogRecord)>, Vec<(usize, Error)>) {
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match parse_log_line(line) {
            Ok(r) => records.push((n + 1, r)),
            Err(e) => errors.push((n + 1, e)),
        }
    }
    (records, errors)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceEndpoint {
    pub ip: Ipv4Addr,
    pub port: Option<u16>,
    pub protocol: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetEndpoint {
    pub ip: Ipv4Addr,
    pub port: Option<u16>,
}

/// The fields worth keeping from a log record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignificantRecord {
    pub source: SourceEndpoint,
    pub target: TargetEndpoint,
}

pub fn extract_significant(rec: &LogRecord) -> SignificantRecord {
    SignificantRecord {
        source: SourceEndpoint { ip: rec.src_ip, port: rec.spt, protocol: rec.protocol.clone() },
        target: TargetEndpoint { ip: rec.dst_ip, port: rec.dpt },
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrafficStats {
    pub total: u64,
    pub per_protocol_counts: BTreeMap<String, u64>,
    pub per_protocol_percent: BTreeMap<String, f64>,
    pub flag_counts: BTreeMap<TcpFlag, u64>,
    pub verdict_counts: BTreeMap<Action, u64>,
}

pub fn traffic_stats<'a>(records: impl IntoIterator<Item = &'a LogRecord>) -> TrafficStats {
    let mut stats = TrafficStats::default();
    for rec in records {
        stats.total += 1;
        *stats.per_protocol_counts.entry(rec.protocol.clone()).or_default() += 1;
        *stats.verdict_counts.entry(rec.verdict).or_default() += 1;
        for flag in &rec.flags {
            *stats.flag_counts.entry(*flag).or_default() += 1;
        }
    }
    if stats.total > 0 {
        stats.per_protocol_percent = stats
            .per_protocol_counts
            .iter()
            .map(|(p, c)| (p.clone(), *c as f64 * 100.0 / stats.total as f64))
            .collect();
    }
    stats
}

/// How a log record's direction is chosen.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum DirectionMode {
    /// INPUT when the record names an input interface, else OUTPUT.
    #[default]
    Infer,
    Fixed(Direction),
}

impl LogRecord {
    pub fn direction(&self, mode: DirectionMode) -> Direction {
        match mode {
            DirectionMode::Fixed(d) => d,
            DirectionMode::Infer if self.in_iface.is_some() => Direction::Input,
            DirectionMode::Infer => Direction::Output,
        }
    }

    pub fn to_packet(&self, domain: &Domain, mode: DirectionMode) -> Result<PacketHeader> {
        let protocol = domain
            .protocol_id(&self.protocol)
            .ok_or_else(|| Error::UnknownProtocol(self.protocol.clone()))?;
        let ip = |addr: Ipv4Addr| -> Result<u32> {
            let v = u32::from(addr);
            if v > domain.ip_max() {
                return Err(Error::OutOfDomain { field: "ip", text: addr.to_string() });
            }
            Ok(v)
        };
        let port = |p: Option<u16>| -> Result<u32> {
            let v = u32::from(p.unwrap_or(0));
            if v > domain.port_max() {
                return Err(Error::OutOfDomain { field: "port", text: v.to_string() });
            }
            Ok(v)
        };
        let icmp = domain.is_icmp(protocol);
        Ok(PacketHeader {
            protocol,
            direction: self.direction(mode),
            src_ip: ip(self.src_ip)?,
            src_port: if icmp { 0 } else { port(self.spt)? },
            dst_ip: ip(self.dst_ip)?,
            dst_port: if icmp { 0 } else { port(self.dpt)? },
        })
    }

    /// A record describing `pkt` with the given verdict. `seq` spreads
    /// timestamps one second apart from Jan 1 00:00:00.
    pub fn synthesize(pkt: &PacketHeader, domain: &Domain, verdict: Action, seq: u32) -> LogRecord {
        let secs = seq % 86_400;
        LogRecord {
            month: "Jan".into(),
            day: 1,
            time: LogTime { hour: (secs / 3600) as u8, minute: (secs / 60 % 60) as u8, second: (secs % 60) as u8 },
            verdict,
            tag: Some("fwportion".into()),
            in_iface: (pkt.direction == Direction::Input).then(|| "eth0".to_string()),
            src_ip: Ipv4Addr::from(pkt.src_ip),
            dst_ip: Ipv4Addr::from(pkt.dst_ip),
            protocol: domain.protocol_name(pkt.protocol).to_string(),
            spt: Some(pkt.src_port as u16),
            dpt: Some(pkt.dst_port as u16),
            flags: if domain.protocol_name(pkt.protocol) == "TCP" {
                BTreeSet::from([TcpFlag::Ack])
            } else {
                BTreeSet::new()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    /// Position of the record in the replayed sequence.
    pub record: usize,
    pub logged: Action,
    pub decided: Decision,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReplayReport {
    pub checked: usize,
    pub mismatches: Vec<Mismatch>,
    /// Records that could not be mapped into the policy's domain.
    pub skipped: Vec<(usize, Error)>,
}

/// Re-decides every record under `policy` and reports those whose logged
/// verdict disagrees. Deny and drop both count as refusal here.
pub fn replay(records: &[LogRecord], policy: &Policy, mode: DirectionMode) -> ReplayReport {
    replay_with(records, &partition(policy), mode)
}

pub fn replay_with(records: &[LogRecord], plist: &PortionList, mode: DirectionMode) -> ReplayReport {
    let domain = plist.policy().domain();
    let mut report = ReplayReport::default();
    for (i, rec) in records.iter().enumerate() {
        let decided = match rec.to_packet(domain, mode).and_then(|pkt| plist.decision(&pkt)) {
            Ok(d) => d,
            Err(e) => {
                report.skipped.push((i, e));
                continue;
            }
        };
        report.checked += 1;
        if decided.action.is_permit() != rec.verdict.is_permit() {
            report.mismatches.push(Mismatch { record: i, logged: rec.verdict, decided });
        }
    }
    report
}

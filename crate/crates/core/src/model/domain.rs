use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::space::Interval;

/// Position of a protocol token inside a [`Domain`]'s ordered protocol list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProtoId(pub u8);

/// Upper bound on declared protocols; protocol sets are 64-bit masks.
pub const MAX_PROTOCOLS: usize = 64;

/// The finite header space every policy is defined over.
///
/// Packets are `protocol × src ip × src port × dst ip × dst port × direction`
/// with configurable address and port widths, so small domains can be
/// enumerated exhaustively.
#[derive(Debug, Clone)]
pub struct Domain {
    ip_bits: u8,
    port_bits: u8,
    protocols: Arc<[String]>,
}

impl PartialEq for Domain {
    fn eq(&self, other: &Self) -> bool {
        self.ip_bits == other.ip_bits
            && self.port_bits == other.port_bits
            && (Arc::ptr_eq(&self.protocols, &other.protocols) || self.protocols == other.protocols)
    }
}

impl Eq for Domain {}

impl Domain {
    pub fn new<I, S>(ip_bits: u8, port_bits: u8, protocols: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        if !(1..=32).contains(&ip_bits) {
            return Err(Error::InvalidDomain(format!("ip bits {ip_bits} not in 1..=32")));
        }
        if !(1..=16).contains(&port_bits) {
            return Err(Error::InvalidDomain(format!("port bits {port_bits} not in 1..=16")));
        }
        let mut list: Vec<String> = Vec::new();
        for p in protocols {
            let token = p.as_ref().trim().to_ascii_uppercase();
            let valid = !token.is_empty()
                && token != "ANY"
                && token.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
            if !valid {
                return Err(Error::InvalidDomain(format!("bad protocol token `{}`", p.as_ref())));
            }
            if list.contains(&token) {
                return Err(Error::InvalidDomain(format!("protocol `{token}` declared twice")));
            }
            list.push(token);
        }
        if list.is_empty() {
            return Err(Error::InvalidDomain("no protocols declared".into()));
        }
        if list.len() > MAX_PROTOCOLS {
            return Err(Error::InvalidDomain(format!("more than {MAX_PROTOCOLS} protocols")));
        }
        Ok(Domain {
            ip_bits,
            port_bits,
            protocols: list.into(),
        })
    }

    /// IPv4 addresses, 16-bit ports, TCP/UDP/ICMP.
    pub fn standard() -> Self {
        Domain::new(32, 16, ["TCP", "UDP", "ICMP"]).expect("standard domain is valid")
    }

    pub fn ip_bits(&self) -> u8 {
        self.ip_bits
    }

    pub fn port_bits(&self) -> u8 {
        self.port_bits
    }

    pub fn ip_max(&self) -> u32 {
        ((1u64 << self.ip_bits) - 1) as u32
    }

    pub fn port_max(&self) -> u32 {
        (1u32 << self.port_bits) - 1
    }

    pub fn ip_range(&self) -> Interval {
        Interval::new(0, self.ip_max())
    }

    pub fn port_range(&self) -> Interval {
        Interval::new(0, self.port_max())
    }

    pub fn protocols(&self) -> &[String] {
        &self.protocols
    }

    pub fn protocol_count(&self) -> usize {
        self.protocols.len()
    }

    pub fn protocol_ids(&self) -> impl Iterator<Item = ProtoId> {
        (0..self.protocols.len() as u8).map(ProtoId)
    }

    pub fn protocol_id(&self, token: &str) -> Option<ProtoId> {
        let token = token.trim();
        self.protocols
            .iter()
            .position(|p| p.eq_ignore_ascii_case(token))
            .map(|i| ProtoId(i as u8))
    }

    pub fn protocol_name(&self, id: ProtoId) -> &str {
        &self.protocols[usize::from(id.0)]
    }

    pub fn is_icmp(&self, id: ProtoId) -> bool {
        self.protocol_name(id) == "ICMP"
    }

    /// Number of distinct packet headers, counting both directions.
    pub fn packet_count(&self) -> u128 {
        let per_dir = self.protocols.len() as u128
            * (1u128 << (2 * u32::from(self.ip_bits)))
            * (1u128 << (2 * u32::from(self.port_bits)));
        2 * per_dir
    }

    /// Comma-joined protocol list as written in policy headers.
    pub(crate) fn protocols_joined(&self) -> String {
        self.protocols.join(",")
    }
}

impl Default for Domain {
    fn default() -> Self {
        Domain::standard()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    Input,
    Output,
}

impl Direction {
    pub const ALL: [Direction; 2] = [Direction::Input, Direction::Output];

    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::Input => "INPUT",
            Direction::Output => "OUTPUT",
        }
    }
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "INPUT" | "IN" => Ok(Direction::Input),
            "OUTPUT" | "OUT" => Ok(Direction::Output),
            _ => Err(Error::UnknownDirection(s.trim().to_string())),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Firewall verdict. `Deny` and `Drop` are kept apart so reports and
/// serialized policies preserve the original token; both refuse the packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Action {
    Accept,
    Deny,
    Drop,
}

impl Action {
    pub fn as_str(&self) -> &'static str {
        match self {
            Action::Accept => "ACCEPT",
            Action::Deny => "DENY",
            Action::Drop => "DROP",
        }
    }

    pub fn is_permit(&self) -> bool {
        matches!(self, Action::Accept)
    }
}

impl std::str::FromStr for Action {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "ACCEPT" => Ok(Action::Accept),
            "DENY" => Ok(Action::Deny),
            "DROP" => Ok(Action::Drop),
            _ => Err(Error::UnknownAction(s.trim().to_string())),
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

//! Address and port patterns.
//!
//! Every pattern normalizes to a single inclusive interval over the domain:
//! a CIDR block, an exact value, a trailing octet wildcard (`10.*.*.*`), an
//! explicit `lo-hi` range or `ANY`. Rendering picks the shortest canonical
//! spelling, so `render(parse(x))` re-parses to the same interval.

use std::net::Ipv4Addr;

use crate::error::{Error, Result};
use crate::model::Domain;
use crate::space::Interval;

fn is_any(text: &str) -> bool {
    text.eq_ignore_ascii_case("ANY") || text == "*"
}

/// Parses one address value: dotted quad, or a plain integer on any width.
pub fn parse_ip_value(text: &str, domain: &Domain) -> Result<u32> {
    let text = text.trim();
    let value = if text.contains('.') {
        text.parse::<Ipv4Addr>()
            .map(u32::from)
            .map_err(|_| Error::BadPattern { field: "ip", text: text.to_string() })?
    } else {
        text.parse::<u32>()
            .map_err(|_| Error::BadPattern { field: "ip", text: text.to_string() })?
    };
    if value > domain.ip_max() {
        return Err(Error::OutOfDomain { field: "ip", text: text.to_string() });
    }
    Ok(value)
}

pub fn parse_port_value(text: &str, domain: &Domain) -> Result<u32> {
    let text = text.trim();
    let value = text
        .parse::<u32>()
        .map_err(|_| Error::BadPattern { field: "port", text: text.to_string() })?;
    if value > domain.port_max() {
        return Err(Error::OutOfDomain { field: "port", text: text.to_string() });
    }
    Ok(value)
}

pub fn parse_ip_pattern(text: &str, domain: &Domain) -> Result<Interval> {
    let text = text.trim();
    let bad = || Error::BadPattern { field: "ip", text: text.to_string() };
    if is_any(text) {
        return Ok(domain.ip_range());
    }
    if text.contains('*') {
        return parse_octet_wildcard(text, domain);
    }
    if let Some((lo, hi)) = text.split_once('-') {
        let (lo, hi) = (parse_ip_value(lo, domain)?, parse_ip_value(hi, domain)?);
        return Interval::try_new(lo, hi).ok_or_else(bad);
    }
    if let Some((addr, len)) = text.split_once('/') {
        let addr = parse_ip_value(addr, domain)?;
        let len: u8 = len.trim().parse().map_err(|_| bad())?;
        if len > domain.ip_bits() {
            return Err(Error::OutOfDomain { field: "ip prefix", text: text.to_string() });
        }
        return Ok(prefix_block(addr, len, domain.ip_bits()));
    }
    parse_ip_value(text, domain).map(Interval::single)
}

/// `a.b.*.*` style wildcards; stars must form a suffix so the pattern is a
/// prefix block. Only meaningful on 32-bit domains.
fn parse_octet_wildcard(text: &str, domain: &Domain) -> Result<Interval> {
    let bad = || Error::BadPattern { field: "ip", text: text.to_string() };
    let parts: Vec<&str> = text.split('.').map(str::trim).collect();
    if parts.iter().all(|p| *p == "*") {
        return Ok(domain.ip_range());
    }
    if domain.ip_bits() != 32 || parts.len() != 4 {
        return Err(bad());
    }
    let fixed = parts.iter().take_while(|p| **p != "*").count();
    if parts[fixed..].iter().any(|p| *p != "*") {
        return Err(bad());
    }
    let mut addr = 0u32;
    for (i, p) in parts[..fixed].iter().enumerate() {
        let octet: u8 = p.parse().map_err(|_| bad())?;
        addr |= u32::from(octet) << (24 - 8 * i);
    }
    Ok(prefix_block(addr, (fixed * 8) as u8, 32))
}

pub(crate) fn prefix_block(addr: u32, len: u8, bits: u8) -> Interval {
    let host_bits = u32::from(bits - len);
    let size = 1u64 << host_bits;
    let lo = (u64::from(addr) / size) * size;
    Interval::new(lo as u32, (lo + size - 1) as u32)
}

pub fn parse_port_pattern(text: &str, domain: &Domain) -> Result<Interval> {
    let text = text.trim();
    if is_any(text) {
        return Ok(domain.port_range());
    }
    if let Some((lo, hi)) = text.split_once('-') {
        let (lo, hi) = (parse_port_value(lo, domain)?, parse_port_value(hi, domain)?);
        return Interval::try_new(lo, hi)
            .ok_or_else(|| Error::BadPattern { field: "port", text: text.to_string() });
    }
    parse_port_value(text, domain).map(Interval::single)
}

pub fn render_ip_value(value: u32, domain: &Domain) -> String {
    if domain.ip_bits() == 32 {
        Ipv4Addr::from(value).to_string()
    } else {
        value.to_string()
    }
}

pub fn render_ip_pattern(iv: Interval, domain: &Domain) -> String {
    if iv == domain.ip_range() {
        return "ANY".into();
    }
    if iv.is_single() {
        return render_ip_value(iv.lo(), domain);
    }
    match iv.prefix_len(domain.ip_bits()) {
        Some(len) => format!("{}/{}", render_ip_value(iv.lo(), domain), len),
        None => format!(
            "{}-{}",
            render_ip_value(iv.lo(), domain),
            render_ip_value(iv.hi(), domain)
        ),
    }
}

pub fn render_port_pattern(iv: Interval, domain: &Domain) -> String {
    if iv == domain.port_range() {
        "ANY".into()
    } else {
        iv.to_string()
    }
}

//! Domain types for rules, packets and policies, plus the CSV and XML
//! policy formats.

pub mod csv;
mod domain;
pub mod pattern;
mod rule;
pub mod xml;

pub use self::csv::{parse_policy_file, parse_rule_line, read_csv_policy};
pub use self::domain::{Action, Direction, Domain, ProtoId, MAX_PROTOCOLS};
pub use self::rule::{parse_packet, Decision, PacketHeader, Policy, Rule, RuleDisplay};
pub use self::xml::parse_xml_policy;

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyFormat {
    Csv,
    Xml,
}

pub fn serialize_policy(policy: &Policy, format: PolicyFormat) -> String {
    match format {
        PolicyFormat::Csv => csv::write_csv_policy(policy),
        PolicyFormat::Xml => xml::write_xml_policy(policy),
    }
}

pub fn detect_format(text: &str) -> PolicyFormat {
    if text.trim_start().starts_with('<') {
        PolicyFormat::Xml
    } else {
        PolicyFormat::Csv
    }
}

/// Parses a policy in either format. CSV files without a `#!` header get
/// the standard domain and `fallback` as their default action.
pub fn read_policy(text: &str, fallback: Action) -> Result<Policy> {
    match detect_format(text) {
        PolicyFormat::Xml => parse_xml_policy(text),
        PolicyFormat::Csv => read_csv_policy(text, fallback),
    }
}

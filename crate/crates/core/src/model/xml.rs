//! XML policy format.
//!
//! ```xml
//! <policy default="DENY" ip-bits="32" port-bits="16" protocols="TCP,UDP,ICMP">
//!   <rule proto="TCP" dir="INPUT" src-ip="10.0.0.3" src-port="139"
//!         dst-ip="121.10.5.3" dst-port="49621" action="ACCEPT"/>
//! </policy>
//! ```
//!
//! Rule element order is priority order. A `<framework>` child is allowed
//! and ignored here; it is read by the baseline generator.

use roxmltree::{Document, Node};

use crate::error::{Error, Result};
use crate::model::csv::{header_line, parse_header_attr, parse_rule_line, Header};
use crate::model::{Domain, Policy};

const RULE_ATTRS: [&str; 7] = ["proto", "dir", "src-ip", "src-port", "dst-ip", "dst-port", "action"];

pub(crate) fn parse_document(text: &str) -> Result<Document<'_>> {
    Document::parse(text).map_err(|e| Error::Xml(e.to_string()))
}

pub(crate) fn root_header(root: Node<'_, '_>) -> Result<Header> {
    if root.tag_name().name() != "policy" {
        return Err(Error::Schema(format!(
            "root element must be <policy>, found <{}>",
            root.tag_name().name()
        )));
    }
    let mut header = Header::default();
    for attr in root.attributes() {
        parse_header_attr(&mut header, attr.name(), attr.value())?;
    }
    for child in root.children().filter(|n| n.has_tag_name("default")) {
        if header.default_action.is_some() {
            return Err(Error::DuplicateDefault);
        }
        let action = child
            .attribute("action")
            .ok_or_else(|| Error::Schema("<default> needs an action attribute".into()))?;
        header.default_action = Some(action.parse()?);
    }
    Ok(header)
}

pub fn parse_xml_policy(text: &str) -> Result<Policy> {
    let doc = parse_document(text)?;
    let root = doc.root_element();
    let header = root_header(root)?;
    let default_action = header
        .default_action
        .ok_or_else(|| Error::Schema("policy declares no default action".into()))?;
    let domain = header.domain()?;

    let mut rules = Vec::new();
    for node in root.children().filter(Node::is_element) {
        match node.tag_name().name() {
            "rule" => {
                let line = doc.text_pos_at(node.range().start).row as usize;
                let rule = parse_rule_element(node, rules.len() + 1, &domain).map_err(|e| e.at_line(line))?;
                rules.push(rule);
            }
            "default" | "framework" => {}
            other => return Err(Error::Schema(format!("unexpected element <{other}>"))),
        }
    }
    Policy::new(domain, default_action, rules)
}

fn parse_rule_element(node: Node<'_, '_>, index: usize, domain: &Domain) -> Result<crate::model::Rule> {
    for attr in node.attributes() {
        if !RULE_ATTRS.contains(&attr.name()) {
            return Err(Error::Schema(format!("unknown rule attribute `{}`", attr.name())));
        }
    }
    let mut fields = Vec::with_capacity(RULE_ATTRS.len());
    for name in RULE_ATTRS {
        let value = node
            .attribute(name)
            .ok_or_else(|| Error::Schema(format!("rule is missing `{name}`")))?;
        if value.contains(',') {
            return Err(Error::BadPattern { field: "rule attribute", text: value.to_string() });
        }
        fields.push(value);
    }
    parse_rule_line(&fields.join(","), index, domain)
}

pub(crate) fn escape_attr(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    for c in value.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            _ => out.push(c),
        }
    }
    out
}

pub(crate) fn root_open_tag(policy: &Policy) -> String {
    // the CSV header already renders the same attributes in key=value form
    let attrs: Vec<String> = header_line(policy)
        .trim_start_matches("#!")
        .split_whitespace()
        .map(|kv| {
            let (k, v) = kv.split_once('=').expect("header items are key=value");
            format!("{k}=\"{}\"", escape_attr(v))
        })
        .collect();
    format!("<policy {}>", attrs.join(" "))
}

pub fn write_xml_policy(policy: &Policy) -> String {
    let mut out = root_open_tag(policy);
    out.push('\n');
    for rule in policy.rules() {
        let line = rule.display(policy.domain()).to_string();
        let attrs: Vec<String> = RULE_ATTRS
            .iter()
            .zip(line.split(", "))
            .map(|(k, v)| format!("{k}=\"{}\"", escape_attr(v)))
            .collect();
        out.push_str(&format!("  <rule {}/>\n", attrs.join(" ")));
    }
    out.push_str("</policy>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Action;

    #[test]
    fn empty_policy_element() {
        let p = parse_xml_policy(r#"<policy default="DENY"/>"#).unwrap();
        assert!(p.is_empty());
        assert_eq!(p.default_action(), Action::Deny);
        assert_eq!(p.domain(), &Domain::standard());
    }

    #[test]
    fn rejects_unknown_action() {
        let text = r#"<policy default="DENY">
            <rule proto="TCP" dir="INPUT" src-ip="ANY" src-port="ANY" dst-ip="ANY" dst-port="80" action="PERMIT"/>
        </policy>"#;
        let err = parse_xml_policy(text).unwrap_err();
        assert!(matches!(&err, Error::Line { line: 2, error } if matches!(**error, Error::UnknownAction(_))), "{err:?}");
    }

    #[test]
    fn default_declared_twice() {
        let text = r#"<policy default="DENY"><default action="DROP"/></policy>"#;
        assert_eq!(parse_xml_policy(text).unwrap_err(), Error::DuplicateDefault);
    }

    #[test]
    fn schema_violations() {
        assert!(matches!(parse_xml_policy("<rules/>"), Err(Error::Schema(_))));
        assert!(matches!(parse_xml_policy("<policy/>"), Err(Error::Schema(_))));
        assert!(matches!(parse_xml_policy(r#"<policy default="DENY"><chain/></policy>"#), Err(Error::Schema(_))));
        let missing = r#"<policy default="DENY"><rule proto="TCP" dir="INPUT"/></policy>"#;
        assert!(matches!(parse_xml_policy(missing), Err(Error::Line { .. })));
        assert!(matches!(parse_xml_policy("<policy"), Err(Error::Xml(_))));
    }

    #[test]
    fn default_element_form() {
        let p = parse_xml_policy(r#"<policy ip-bits="8" port-bits="4" protocols="TCP"><default action="DROP"/></policy>"#)
            .unwrap();
        assert_eq!(p.default_action(), Action::Drop);
        assert_eq!(p.domain().ip_bits(), 8);
    }
}

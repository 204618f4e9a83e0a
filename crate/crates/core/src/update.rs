//! Policy updates: new rules go in front of the existing policy, and old
//! rules whose match tuple a new rule repeats are dropped.

use crate::error::{Error, Result};
use crate::model::Policy;
use crate::relations::{classify_pair, decision_delta, PairFinding, RelationClass};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpdateReport {
    /// `(old index, new index)` of every old rule dropped as a duplicate.
    pub removed_duplicates: Vec<(usize, usize)>,
    /// Every overlapping `(old, new)` pair, for review.
    pub relation_findings: Vec<PairFinding>,
    pub resulting_rule_count: usize,
    /// Packets whose decision changed.
    pub semantic_delta: u128,
}

/// Classified `(old index, new index)` pairs that share at least one packet.
pub fn relation_report(old: &Policy, new: &Policy) -> Result<Vec<PairFinding>> {
    if old.domain() != new.domain() {
        return Err(Error::DomainMismatch);
    }
    let mut findings = Vec::new();
    for o in old.rules() {
        for n in new.rules() {
            let relation = classify_pair(o, n, old.domain())?;
            if relation.class != RelationClass::CompletelyDisjoint {
                findings.push(PairFinding { first: o.index, second: n.index, relation });
            }
        }
    }
    Ok(findings)
}

/// Prepends `new`'s rules to `old`, dropping old rules whose header tuple
/// equals a new rule's. Both policies must share domain and default action.
pub fn update_policy(old: &Policy, new: &Policy) -> Result<(Policy, UpdateReport)> {
    if old.domain() != new.domain() {
        return Err(Error::DomainMismatch);
    }
    if old.default_action() != new.default_action() {
        return Err(Error::DefaultMismatch);
    }
    let relation_findings = relation_report(old, new)?;

    let mut removed_duplicates = Vec::new();
    let mut rules = new.rules().to_vec();
    for o in old.rules() {
        match new.rules().iter().find(|n| n.same_match(o)) {
            Some(n) => removed_duplicates.push((o.index, n.index)),
            None => rules.push(o.clone()),
        }
    }
    let updated = Policy::new(old.domain().clone(), old.default_action(), rules)?;
    let semantic_delta = decision_delta(old, &updated)?;
    let report = UpdateReport {
        removed_duplicates,
        relation_findings,
        resulting_rule_count: updated.len(),
        semantic_delta,
    };
    Ok((updated, report))
}

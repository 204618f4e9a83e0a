//! Rule-pair relations and policy anomalies.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::model::{Domain, Policy, Rule};
use crate::portions::{partition, PortionList};
use crate::space::{field_relation, FieldRelation, HeaderBox, DIMS};

/// Field names in the order per-field relations are stored.
pub const FIELD_NAMES: [&str; DIMS] = ["protocol", "src-ip", "src-port", "dst-ip", "dst-port", "direction"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RelationClass {
    CompletelyMatched,
    /// One rule contains the other.
    AlmostMatch,
    /// Proper containment in opposite directions on different fields.
    Interrelated,
    /// Some field overlaps only partially.
    IncompletelyMatch,
    CompletelyDisjoint,
}

impl RelationClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            RelationClass::CompletelyMatched => "COMPLETELY_MATCHED",
            RelationClass::AlmostMatch => "ALMOST_MATCH",
            RelationClass::Interrelated => "INTERRELATED",
            RelationClass::IncompletelyMatch => "INCOMPLETELY_MATCH",
            RelationClass::CompletelyDisjoint => "COMPLETELY_DISJOINT",
        }
    }

    /// Classifies from per-field relations, first matching case wins:
    /// a disjoint field, all equal, any partial field, containment in one
    /// direction only, containment in both directions.
    pub fn from_fields(fields: &[FieldRelation; DIMS]) -> RelationClass {
        let has = |r: FieldRelation| fields.contains(&r);
        if has(FieldRelation::Disjoint) {
            RelationClass::CompletelyDisjoint
        } else if fields.iter().all(|f| *f == FieldRelation::Equal) {
            RelationClass::CompletelyMatched
        } else if has(FieldRelation::Partial) {
            RelationClass::IncompletelyMatch
        } else if has(FieldRelation::Subset) && has(FieldRelation::Superset) {
            RelationClass::Interrelated
        } else {
            RelationClass::AlmostMatch
        }
    }
}

impl fmt::Display for RelationClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairRelation {
    pub class: RelationClass,
    /// Relation of the first rule's field to the second's, per [`FIELD_NAMES`].
    pub fields: [FieldRelation; DIMS],
}

impl PairRelation {
    pub fn describe_fields(&self) -> String {
        FIELD_NAMES
            .iter()
            .zip(self.fields.iter())
            .map(|(name, rel)| format!("{name}={rel}"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

pub fn classify_pair(m: &Rule, n: &Rule, domain: &Domain) -> Result<PairRelation> {
    if m.validate(domain).is_err() || n.validate(domain).is_err() {
        return Err(Error::DomainMismatch);
    }
    let (a, b) = (HeaderBox::of_rule(m, domain), HeaderBox::of_rule(n, domain));
    let mut fields = [FieldRelation::Equal; DIMS];
    for (d, slot) in fields.iter_mut().enumerate() {
        *slot = field_relation(&a.dim(d), &b.dim(d))?;
    }
    Ok(PairRelation { class: RelationClass::from_fields(&fields), fields })
}

/// A classified pair of rules; indices refer to the policy or policies the
/// pair was drawn from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairFinding {
    pub first: usize,
    pub second: usize,
    pub relation: PairRelation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AnomalyKind {
    /// Never decides any packet.
    Inactive,
    /// Inactive, and covered by an earlier rule with a different action.
    Shadowed,
    /// Removing it leaves every decision unchanged.
    Redundant,
}

impl AnomalyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            AnomalyKind::Inactive => "INACTIVE",
            AnomalyKind::Shadowed => "SHADOWED",
            AnomalyKind::Redundant => "REDUNDANT",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnomalyReport {
    pub inactive: BTreeSet<usize>,
    pub shadowed: BTreeSet<usize>,
    pub redundant: BTreeSet<usize>,
    /// Rules deciding packets in place of an inactive rule, or taking over
    /// from a redundant one. An empty list means the default action.
    pub witnesses: BTreeMap<usize, Vec<usize>>,
    /// Every rule pair `(i, j)` with `i < j`.
    pub relations: Vec<PairFinding>,
}

impl AnomalyReport {
    pub fn has_anomalies(&self) -> bool {
        !(self.inactive.is_empty() && self.redundant.is_empty())
    }

    pub fn interrelated_pairs(&self) -> impl Iterator<Item = &PairFinding> {
        self.relations
            .iter()
            .filter(|f| f.relation.class == RelationClass::Interrelated)
    }

    /// `(rule, kind, witnesses)` rows ordered by rule then kind.
    pub fn rows(&self) -> Vec<(usize, AnomalyKind, &[usize])> {
        let mut rows = Vec::new();
        let w = |r: &usize| self.witnesses.get(r).map_or(&[][..], Vec::as_slice);
        for r in &self.inactive {
            rows.push((*r, AnomalyKind::Inactive, w(r)));
        }
        for r in &self.shadowed {
            rows.push((*r, AnomalyKind::Shadowed, w(r)));
        }
        for r in &self.redundant {
            rows.push((*r, AnomalyKind::Redundant, w(r)));
        }
        rows.sort_by_key(|(r, k, _)| (*r, *k));
        rows
    }
}

pub fn detect_anomalies(policy: &Policy) -> AnomalyReport {
    detect_anomalies_in(&partition(policy))
}

/// Anomaly detection over an already-built partition.
pub fn detect_anomalies_in(plist: &PortionList) -> AnomalyReport {
    let policy = plist.policy();
    let mut report = AnomalyReport::default();
    let heads: BTreeSet<usize> = plist.portions().iter().filter_map(|p| p.effective_rule()).collect();

    for rule in policy.rules() {
        let r = rule.index;
        let holding: Vec<_> = plist.portions().iter().filter(|p| p.r_in.contains(&r)).collect();
        if !heads.contains(&r) {
            report.inactive.insert(r);
            let covering: BTreeSet<usize> = holding.iter().filter_map(|p| p.effective_rule()).collect();
            let differs = covering
                .iter()
                .any(|c| policy.rule(*c).is_some_and(|c| c.action != rule.action));
            if differs {
                report.shadowed.insert(r);
            }
            // an inactive rule never decides anything, so dropping it is a no-op
            report.redundant.insert(r);
            report.witnesses.insert(r, covering.into_iter().collect());
            continue;
        }
        // Removing an active rule only affects the portions it decides; there
        // the next effective rule, or the default, takes over.
        let mut fallback = BTreeSet::new();
        let mut unchanged = true;
        for p in holding.iter().filter(|p| p.effective_rule() == Some(r)) {
            let next = p.r_eff.get(1).copied();
            let action = next
                .and_then(|i| policy.rule(i))
                .map_or(policy.default_action(), |x| x.action);
            if action != rule.action {
                unchanged = false;
                break;
            }
            fallback.extend(next);
        }
        if unchanged {
            report.redundant.insert(r);
            report.witnesses.insert(r, fallback.into_iter().collect());
        }
    }

    let rules = policy.rules();
    for (i, m) in rules.iter().enumerate() {
        for n in &rules[i + 1..] {
            let relation = classify_pair(m, n, policy.domain()).expect("rules share the policy domain");
            report.relations.push(PairFinding { first: m.index, second: n.index, relation });
        }
    }
    report
}

/// Number of packets on which the two policies decide differently. Deny
/// and drop count as different decisions.
pub fn decision_delta(a: &Policy, b: &Policy) -> Result<u128> {
    if a.domain() != b.domain() {
        return Err(Error::DomainMismatch);
    }
    let (pa, pb) = (partition(a), partition(b));
    let mut delta = 0;
    for x in pa.portions() {
        for y in pb.portions() {
            if x.action != y.action && x.space.overlaps(&y.space) {
                delta += x.space.intersect(&y.space)?.size();
            }
        }
    }
    Ok(delta)
}

/// True iff every packet receives the same action under both policies,
/// decided region by region on the two partitions.
pub fn semantic_equal(a: &Policy, b: &Policy) -> Result<bool> {
    if a.domain() != b.domain() {
        return Err(Error::DomainMismatch);
    }
    let (pa, pb) = (partition(a), partition(b));
    Ok(pa.portions().iter().all(|x| {
        pb.portions()
            .iter()
            .all(|y| x.action == y.action || !x.space.overlaps(&y.space))
    }))
}

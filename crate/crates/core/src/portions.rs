//! Portion-wise partition of a policy's header space.
//!
//! Starting from one portion covering the whole domain, each rule in
//! priority order is intersected with every current portion. A portion the
//! rule misses records the rule in `r_out`; a portion inside the rule
//! records it in `r_in`; a portion the rule cuts is replaced by its inside
//! and outside pieces. After `n` rules there are at most `2^n` portions, and
//! every packet of a portion is decided by the lowest-index rule in its
//! `r_in`, or by the default action when `r_in` is empty.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::model::{Action, Decision, PacketHeader, Policy};
use crate::space::{HeaderBox, HeaderSpace};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Portion {
    pub space: HeaderSpace,
    /// Rules whose space contains the whole portion, ascending.
    pub r_in: Vec<usize>,
    /// Rules disjoint from the portion, ascending.
    pub r_out: Vec<usize>,
    /// Rules able to decide the portion in priority order; equals `r_in`.
    pub r_eff: Vec<usize>,
    pub action: Action,
}

impl Portion {
    /// The rule deciding this portion, if any.
    pub fn effective_rule(&self) -> Option<usize> {
        self.r_eff.first().copied()
    }

    pub fn decision(&self) -> Decision {
        Decision { action: self.action, rule: self.effective_rule() }
    }

    /// One-line description of the portion's region.
    pub fn describe(&self) -> String {
        let d = self.space.domain();
        self.space
            .boxes()
            .iter()
            .map(|b| b.display(d).to_string())
            .collect::<Vec<_>>()
            .join(" | ")
    }
}

#[derive(Debug, Clone)]
pub struct PortionList {
    portions: Vec<Portion>,
    policy: Policy,
    /// Number of rules folded into the partition so far.
    processed: usize,
}

impl PortionList {
    /// An empty list over `policy`, before any portion or rule is added.
    pub fn new(policy: Policy) -> Self {
        PortionList { portions: Vec::new(), policy, processed: 0 }
    }

    pub fn portions(&self) -> &[Portion] {
        &self.portions
    }

    pub fn len(&self) -> usize {
        self.portions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.portions.is_empty()
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    fn resolve(&self, r_eff: &[usize]) -> Action {
        r_eff
            .first()
            .and_then(|&i| self.policy.rule(i))
            .map_or(self.policy.default_action(), |r| r.action)
    }

    /// Appends a portion unless `space` is empty. Returns whether a portion
    /// was added.
    pub fn add_portion(
        &mut self,
        space: HeaderSpace,
        r_in: Vec<usize>,
        r_out: Vec<usize>,
        r_eff: Vec<usize>,
    ) -> bool {
        if space.is_empty() {
            return false;
        }
        let action = self.resolve(&r_eff);
        self.portions.push(Portion { space, r_in, r_out, r_eff, action });
        true
    }

    /// Marks the first `n` rules as processed, for lists assembled by hand
    /// through [`PortionList::add_portion`].
    pub fn set_processed(&mut self, n: usize) {
        self.processed = n.min(self.policy.len());
    }

    pub fn processed(&self) -> usize {
        self.processed
    }

    /// Folds the next unprocessed rule into the partition.
    fn apply_next_rule(&mut self) {
        let index = self.processed + 1;
        let rule = self.policy.rule(index).expect("rule exists").clone();
        let rule_box = HeaderBox::of_rule(&rule, self.policy.domain());
        let snapshot = std::mem::take(&mut self.portions);
        let mut split = Vec::new();
        for mut g in snapshot {
            if !g.space.overlaps_box(&rule_box) {
                g.r_out.push(index);
                self.portions.push(g);
            } else if g.space.is_inside_box(&rule_box) {
                g.r_in.push(index);
                g.r_eff.push(index);
                self.portions.push(g);
            } else {
                let include = g.space.intersect_boxes(std::slice::from_ref(&rule_box));
                let exclude = g.space.subtract_boxes(std::slice::from_ref(&rule_box));
                let mut r_in = g.r_in.clone();
                r_in.push(index);
                let mut r_eff = g.r_eff.clone();
                r_eff.push(index);
                let mut r_out = g.r_out.clone();
                r_out.push(index);
                split.push((include, r_in, g.r_out, r_eff));
                split.push((exclude, g.r_in, r_out, g.r_eff));
            }
        }
        for (space, r_in, r_out, r_eff) in split {
            self.add_portion(space, r_in, r_out, r_eff);
        }
        self.processed = index;
        for i in 0..self.portions.len() {
            let action = self.resolve(&self.portions[i].r_eff);
            self.portions[i].action = action;
        }
    }

    /// Returns the unique portion containing `pkt`.
    pub fn locate(&self, pkt: &PacketHeader) -> Result<(usize, &Portion)> {
        let mut found = None;
        for (i, p) in self.portions.iter().enumerate() {
            if p.space.contains(pkt) {
                if found.is_some() {
                    return Err(Error::PartitionInvariant(format!(
                        "packet {} lies in more than one portion",
                        pkt.display(self.policy.domain())
                    )));
                }
                found = Some((i, p));
            }
        }
        found.ok_or_else(|| {
            Error::PartitionInvariant(format!(
                "packet {} lies in no portion",
                pkt.display(self.policy.domain())
            ))
        })
    }

    pub fn decision(&self, pkt: &PacketHeader) -> Result<Decision> {
        self.locate(pkt).map(|(_, p)| p.decision())
    }

    pub fn verify(&self) -> PartitionReport {
        verify_partition(self)
    }

    pub fn stats(&self) -> PortionStats {
        portion_stats(self)
    }
}

/// Builds the portion list of `policy`.
pub fn partition(policy: &Policy) -> PortionList {
    let mut list = PortionList::new(policy.clone());
    let domain = policy.domain().clone();
    list.add_portion(HeaderSpace::full(&domain), Vec::new(), Vec::new(), Vec::new());
    while list.processed < policy.len() {
        list.apply_next_rule();
    }
    list
}

pub fn locate_portion<'a>(plist: &'a PortionList, pkt: &PacketHeader) -> Result<&'a Portion> {
    plist.locate(pkt).map(|(_, p)| p)
}

pub fn portion_decision(plist: &PortionList, pkt: &PacketHeader) -> Result<Decision> {
    plist.decision(pkt)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    EmptyPortion(usize),
    /// Boxes inside one portion overlap.
    SelfOverlap(usize),
    Overlap(usize, usize),
    Coverage { covered: u128, domain: u128 },
    RuleInBothSets { portion: usize, rule: usize },
    RuleUnaccounted { portion: usize, rule: usize },
    RuleNotContaining { portion: usize, rule: usize },
    RuleNotDisjoint { portion: usize, rule: usize },
    EffectiveOrder(usize),
    ActionMismatch(usize),
    TooManyPortions { count: usize, bound: u128 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // portions are reported 1-based
        match self {
            Violation::EmptyPortion(p) => write!(f, "portion {} is empty", p + 1),
            Violation::SelfOverlap(p) => write!(f, "portion {} has overlapping boxes", p + 1),
            Violation::Overlap(a, b) => write!(f, "portions {} and {} overlap", a + 1, b + 1),
            Violation::Coverage { covered, domain } => {
                write!(f, "portions cover {covered} of {domain} packets")
            }
            Violation::RuleInBothSets { portion, rule } => {
                write!(f, "rule {rule} is in both r_in and r_out of portion {}", portion + 1)
            }
            Violation::RuleUnaccounted { portion, rule } => {
                write!(f, "rule {rule} is in neither r_in nor r_out of portion {}", portion + 1)
            }
            Violation::RuleNotContaining { portion, rule } => {
                write!(f, "rule {rule} is in r_in but does not contain portion {}", portion + 1)
            }
            Violation::RuleNotDisjoint { portion, rule } => {
                write!(f, "rule {rule} is in r_out but overlaps portion {}", portion + 1)
            }
            Violation::EffectiveOrder(p) => {
                write!(f, "r_eff of portion {} is not r_in in priority order", p + 1)
            }
            Violation::ActionMismatch(p) => {
                write!(f, "portion {} action disagrees with its effective rule", p + 1)
            }
            Violation::TooManyPortions { count, bound } => {
                write!(f, "{count} portions exceed the bound {bound}")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PartitionReport {
    pub violations: Vec<Violation>,
}

impl PartitionReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Structural check of a portion list; needs no packet enumeration.
pub fn verify_partition(plist: &PortionList) -> PartitionReport {
    let mut violations = Vec::new();
    let policy = plist.policy();
    let domain = policy.domain();
    let n = plist.processed();
    let rule_boxes: Vec<HeaderBox> = policy.rules()[..n]
        .iter()
        .map(|r| HeaderBox::of_rule(r, domain))
        .collect();

    for (i, p) in plist.portions().iter().enumerate() {
        if p.space.is_empty() {
            violations.push(Violation::EmptyPortion(i));
            continue;
        }
        if !p.space.boxes_disjoint() {
            violations.push(Violation::SelfOverlap(i));
        }
        for (j, q) in plist.portions().iter().enumerate().skip(i + 1) {
            if p.space.overlaps(&q.space) {
                violations.push(Violation::Overlap(i, j));
            }
        }
        for rule in 1..=n {
            let inside = p.r_in.contains(&rule);
            let outside = p.r_out.contains(&rule);
            match (inside, outside) {
                (true, true) => violations.push(Violation::RuleInBothSets { portion: i, rule }),
                (false, false) => violations.push(Violation::RuleUnaccounted { portion: i, rule }),
                (true, false) if !p.space.is_inside_box(&rule_boxes[rule - 1]) => {
                    violations.push(Violation::RuleNotContaining { portion: i, rule })
                }
                (false, true) if p.space.overlaps_box(&rule_boxes[rule - 1]) => {
                    violations.push(Violation::RuleNotDisjoint { portion: i, rule })
                }
                _ => {}
            }
        }
        let mut sorted = p.r_in.clone();
        sorted.sort_unstable();
        if p.r_eff != sorted {
            violations.push(Violation::EffectiveOrder(i));
        }
        let expected = sorted
            .first()
            .and_then(|&r| policy.rule(r))
            .map_or(policy.default_action(), |r| r.action);
        if p.action != expected {
            violations.push(Violation::ActionMismatch(i));
        }
    }

    let covered: u128 = plist.portions().iter().map(|p| p.space.size()).sum();
    if covered != domain.packet_count() {
        violations.push(Violation::Coverage { covered, domain: domain.packet_count() });
    }
    let bound = if n >= 127 { u128::MAX } else { 1u128 << n };
    if plist.len() as u128 > bound {
        violations.push(Violation::TooManyPortions { count: plist.len(), bound });
    }
    PartitionReport { violations }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PortionStats {
    pub rule_count: usize,
    pub portion_count: usize,
    /// Rule index to the number of portions holding it in `r_in`.
    pub portions_per_rule: BTreeMap<usize, usize>,
    pub default_portion_count: usize,
}

pub fn portion_stats(plist: &PortionList) -> PortionStats {
    let mut portions_per_rule: BTreeMap<usize, usize> =
        (1..=plist.policy().len()).map(|r| (r, 0)).collect();
    for p in plist.portions() {
        for r in &p.r_in {
            *portions_per_rule.entry(*r).or_default() += 1;
        }
    }
    PortionStats {
        rule_count: plist.policy().len(),
        portion_count: plist.len(),
        portions_per_rule,
        default_portion_count: plist.portions().iter().filter(|p| p.r_eff.is_empty()).count(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_packet, Direction, Domain, Rule};
    use crate::space::Interval;

    fn dom() -> Domain {
        Domain::new(2, 2, ["TCP", "UDP"]).unwrap()
    }

    #[test]
    fn empty_policy_single_default_portion() {
        let d = dom();
        let list = partition(&Policy::empty(d.clone(), Action::Deny));
        assert_eq!(list.len(), 1);
        assert_eq!(list.portions()[0].action, Action::Deny);
        assert!(list.verify().passed());
        let pkt = parse_packet("UDP OUTPUT 1:2 3:0", &d).unwrap();
        assert_eq!(list.decision(&pkt).unwrap(), Decision { action: Action::Deny, rule: None });
        let stats = list.stats();
        assert_eq!((stats.rule_count, stats.portion_count, stats.default_portion_count), (0, 1, 1));
    }

    #[test]
    fn add_portion_guard() {
        let d = dom();
        let mut list = PortionList::new(Policy::empty(d.clone(), Action::Deny));
        assert!(!list.add_portion(HeaderSpace::empty(&d), vec![], vec![], vec![]));
        assert_eq!(list.len(), 0);
        assert!(list.add_portion(HeaderSpace::full(&d), vec![], vec![], vec![]));
        assert_eq!(list.len(), 1);
    }

    #[test]
    fn overlapping_hand_built_list_is_flagged() {
        let d = dom();
        let mut list = PortionList::new(Policy::empty(d.clone(), Action::Deny));
        list.add_portion(HeaderSpace::full(&d), vec![], vec![], vec![]);
        list.add_portion(HeaderSpace::full(&d), vec![], vec![], vec![]);
        let report = list.verify();
        assert!(report.violations.contains(&Violation::Overlap(0, 1)));
        assert!(matches!(list.locate(&parse_packet("TCP INPUT 0:0 0:0", &d).unwrap()), Err(Error::PartitionInvariant(_))));
    }

    #[test]
    fn missing_region_is_flagged() {
        let d = dom();
        let mut list = PortionList::new(Policy::empty(d.clone(), Action::Deny));
        let half = Rule::any(&d, Direction::Input, Action::Deny);
        list.add_portion(HeaderSpace::of_rule(&half, &d), vec![], vec![], vec![]);
        let report = list.verify();
        assert!(matches!(report.violations[..], [Violation::Coverage { .. }]));
        let pkt = parse_packet("TCP OUTPUT 0:0 0:0", &d).unwrap();
        assert!(list.locate(&pkt).is_err());
    }

    #[test]
    fn full_rule_single_portion() {
        let d = dom();
        let p = Policy::new(d.clone(), Action::Deny, vec![
            Rule::any(&d, Direction::Input, Action::Accept),
            Rule::any(&d, Direction::Output, Action::Accept),
        ])
        .unwrap();
        let list = partition(&p);
        assert_eq!(list.len(), 2);
        assert!(list.verify().passed());
        assert!(list.portions().iter().all(|p| p.action == Action::Accept));
    }

    #[test]
    fn crossing_rules_make_four_portions() {
        let d = Domain::new(4, 4, ["TCP", "UDP"]).unwrap();
        let mut r1 = Rule::any(&d, Direction::Input, Action::Accept);
        r1.src_port = Interval::new(0, 7);
        let mut r2 = Rule::any(&d, Direction::Input, Action::Deny);
        r2.dst_port = Interval::new(0, 7);
        let list = partition(&Policy::new(d, Action::Drop, vec![r1, r2]).unwrap());
        assert_eq!(list.len(), 4);
        assert!(list.verify().passed());
        let stats = list.stats();
        assert_eq!(stats.portions_per_rule, BTreeMap::from([(1, 2), (2, 2)]));
        assert_eq!(stats.default_portion_count, 1);
    }

    #[test]
    fn bound_violation_is_reported() {
        let d = dom();
        let mut list = PortionList::new(Policy::empty(d.clone(), Action::Deny));
        let input = HeaderSpace::of_rule(&Rule::any(&d, Direction::Input, Action::Deny), &d);
        let output = HeaderSpace::of_rule(&Rule::any(&d, Direction::Output, Action::Deny), &d);
        list.add_portion(input, vec![], vec![], vec![]);
        list.add_portion(output, vec![], vec![], vec![]);
        assert_eq!(list.verify().violations, vec![Violation::TooManyPortions { count: 2, bound: 1 }]);
    }

    #[test]
    fn partition_is_deterministic() {
        let d = Domain::new(4, 4, ["TCP", "UDP"]).unwrap();
        let mut r1 = Rule::any(&d, Direction::Input, Action::Accept);
        r1.src_ip = Interval::new(3, 11);
        let mut r2 = Rule::any(&d, Direction::Input, Action::Deny);
        r2.dst_port = Interval::new(5, 6);
        let p = Policy::new(d, Action::Drop, vec![r1, r2]).unwrap();
        assert_eq!(partition(&p).portions(), partition(&p).portions());
    }
}

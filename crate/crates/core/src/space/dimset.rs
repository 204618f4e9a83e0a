use std::fmt;

use crate::error::{Error, Result};
use crate::model::{Direction, Domain, ProtoId};
use crate::space::{Interval, IntervalSet};

/// Set of protocols, one bit per [`ProtoId`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProtoSet(pub u64);

impl ProtoSet {
    pub fn full(domain: &Domain) -> Self {
        let n = domain.protocol_count();
        ProtoSet(if n == 64 { u64::MAX } else { (1u64 << n) - 1 })
    }

    pub fn single(id: ProtoId) -> Self {
        ProtoSet(1u64 << id.0)
    }

    pub fn contains(&self, id: ProtoId) -> bool {
        self.0 & (1u64 << id.0) != 0
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn len(&self) -> u64 {
        u64::from(self.0.count_ones())
    }

    pub fn intersect(&self, other: &ProtoSet) -> ProtoSet {
        ProtoSet(self.0 & other.0)
    }

    pub fn subtract(&self, other: &ProtoSet) -> ProtoSet {
        ProtoSet(self.0 & !other.0)
    }

    pub fn union(&self, other: &ProtoSet) -> ProtoSet {
        ProtoSet(self.0 | other.0)
    }

    pub fn is_subset(&self, other: &ProtoSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn ids(&self) -> impl Iterator<Item = ProtoId> + '_ {
        (0..64u8).filter(|i| self.0 & (1u64 << i) != 0).map(ProtoId)
    }

    pub(crate) fn as_intervals(&self) -> Vec<Interval> {
        IntervalSet::from_intervals(self.ids().map(|p| Interval::single(u32::from(p.0))))
            .intervals()
            .to_vec()
    }
}

/// Set of traffic directions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DirSet(pub u8);

impl DirSet {
    pub const BOTH: DirSet = DirSet(0b11);

    fn bit(d: Direction) -> u8 {
        match d {
            Direction::Input => 0b01,
            Direction::Output => 0b10,
        }
    }

    pub fn single(d: Direction) -> Self {
        DirSet(Self::bit(d))
    }

    pub fn contains(&self, d: Direction) -> bool {
        self.0 & Self::bit(d) != 0
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn len(&self) -> u64 {
        u64::from(self.0.count_ones())
    }

    pub fn intersect(&self, other: &DirSet) -> DirSet {
        DirSet(self.0 & other.0)
    }

    pub fn subtract(&self, other: &DirSet) -> DirSet {
        DirSet(self.0 & !other.0)
    }

    pub fn union(&self, other: &DirSet) -> DirSet {
        DirSet(self.0 | other.0)
    }

    pub fn is_subset(&self, other: &DirSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = Direction> + '_ {
        Direction::ALL.into_iter().filter(|d| self.contains(*d))
    }
}

impl fmt::Display for DirSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            0b01 => f.write_str("INPUT"),
            0b10 => f.write_str("OUTPUT"),
            0b11 => f.write_str("BOTH"),
            _ => f.write_str("NONE"),
        }
    }
}

/// The value set of a single header field.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum DimSet {
    Protocols(ProtoSet),
    Directions(DirSet),
    Intervals(IntervalSet),
}

impl DimSet {
    fn kind(&self) -> &'static str {
        match self {
            DimSet::Protocols(_) => "protocol",
            DimSet::Directions(_) => "direction",
            DimSet::Intervals(_) => "interval",
        }
    }
}

/// How one field of a rule relates to the same field of another.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum FieldRelation {
    Equal,
    /// Left is a proper subset of right.
    Subset,
    /// Left is a proper superset of right.
    Superset,
    Partial,
    Disjoint,
}

impl FieldRelation {
    pub fn as_str(&self) -> &'static str {
        match self {
            FieldRelation::Equal => "EQUAL",
            FieldRelation::Subset => "SUBSET",
            FieldRelation::Superset => "SUPERSET",
            FieldRelation::Partial => "PARTIAL",
            FieldRelation::Disjoint => "DISJOINT",
        }
    }

    pub fn flip(&self) -> FieldRelation {
        match self {
            FieldRelation::Subset => FieldRelation::Superset,
            FieldRelation::Superset => FieldRelation::Subset,
            other => *other,
        }
    }
}

impl fmt::Display for FieldRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn relate(a_sub_b: bool, b_sub_a: bool, overlap: bool) -> FieldRelation {
    match (a_sub_b, b_sub_a) {
        (true, true) => FieldRelation::Equal,
        (true, false) => FieldRelation::Subset,
        (false, true) => FieldRelation::Superset,
        (false, false) if overlap => FieldRelation::Partial,
        (false, false) => FieldRelation::Disjoint,
    }
}

/// Classifies two non-empty value sets of the same field.
pub fn field_relation(a: &DimSet, b: &DimSet) -> Result<FieldRelation> {
    Ok(match (a, b) {
        (DimSet::Protocols(a), DimSet::Protocols(b)) => {
            relate(a.is_subset(b), b.is_subset(a), !a.intersect(b).is_empty())
        }
        (DimSet::Directions(a), DimSet::Directions(b)) => {
            relate(a.is_subset(b), b.is_subset(a), !a.intersect(b).is_empty())
        }
        (DimSet::Intervals(a), DimSet::Intervals(b)) => {
            relate(a.is_subset(b), b.is_subset(a), !a.intersect(b).is_empty())
        }
        _ => return Err(Error::DimensionMismatch(a.kind(), b.kind())),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(lo: u32, hi: u32) -> DimSet {
        DimSet::Intervals(Interval::new(lo, hi).into())
    }

    #[test]
    fn relations() {
        assert_eq!(field_relation(&iv(80, 80), &iv(80, 80)).unwrap(), FieldRelation::Equal);
        // 10.0.0.0/16 inside 10.0.0.0/8
        let slash16 = iv(0x0a00_0000, 0x0a00_ffff);
        let slash8 = iv(0x0a00_0000, 0x0aff_ffff);
        assert_eq!(field_relation(&slash16, &slash8).unwrap(), FieldRelation::Subset);
        assert_eq!(field_relation(&slash8, &slash16).unwrap(), FieldRelation::Superset);
        assert_eq!(field_relation(&iv(0, 100), &iv(50, 150)).unwrap(), FieldRelation::Partial);
        let tcp = DimSet::Protocols(ProtoSet::single(ProtoId(0)));
        let udp = DimSet::Protocols(ProtoSet::single(ProtoId(1)));
        assert_eq!(field_relation(&tcp, &udp).unwrap(), FieldRelation::Disjoint);
    }

    #[test]
    fn kind_mismatch_is_an_error() {
        let tcp = DimSet::Protocols(ProtoSet::single(ProtoId(0)));
        assert!(matches!(field_relation(&tcp, &iv(0, 1)), Err(Error::DimensionMismatch(..))));
    }

    #[test]
    fn proto_set_full_at_64() {
        let names: Vec<String> = (0..64).map(|i| format!("P{i}")).collect();
        let d = Domain::new(4, 4, names).unwrap();
        assert_eq!(ProtoSet::full(&d).len(), 64);
    }
}

use std::fmt;

use crate::model::pattern::{render_ip_pattern, render_port_pattern};
use crate::model::{Domain, PacketHeader, Rule};
use crate::space::{DimSet, DirSet, IntervalSet, ProtoSet};

/// Number of dimensions in a [`HeaderBox`].
pub const DIMS: usize = 6;

/// Product of one value set per header field. A box with any empty field
/// is the empty set and is never stored.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HeaderBox {
    pub protocols: ProtoSet,
    pub src_ip: IntervalSet,
    pub src_port: IntervalSet,
    pub dst_ip: IntervalSet,
    pub dst_port: IntervalSet,
    pub directions: DirSet,
}

impl HeaderBox {
    pub fn full(domain: &Domain) -> Self {
        HeaderBox {
            protocols: ProtoSet::full(domain),
            src_ip: domain.ip_range().into(),
            src_port: domain.port_range().into(),
            dst_ip: domain.ip_range().into(),
            dst_port: domain.port_range().into(),
            directions: DirSet::BOTH,
        }
    }

    pub fn of_rule(rule: &Rule, domain: &Domain) -> Self {
        HeaderBox {
            protocols: rule.protocol.map_or_else(|| ProtoSet::full(domain), ProtoSet::single),
            src_ip: rule.src_ip.into(),
            src_port: rule.src_port.into(),
            dst_ip: rule.dst_ip.into(),
            dst_port: rule.dst_port.into(),
            directions: DirSet::single(rule.direction),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.protocols.is_empty()
            || self.src_ip.is_empty()
            || self.src_port.is_empty()
            || self.dst_ip.is_empty()
            || self.dst_port.is_empty()
            || self.directions.is_empty()
    }

    /// Packet count.
    pub fn size(&self) -> u128 {
        u128::from(self.protocols.len())
            * u128::from(self.src_ip.len())
            * u128::from(self.src_port.len())
            * u128::from(self.dst_ip.len())
            * u128::from(self.dst_port.len())
            * u128::from(self.directions.len())
    }

    pub fn contains(&self, pkt: &PacketHeader) -> bool {
        self.directions.contains(pkt.direction)
            && self.protocols.contains(pkt.protocol)
            && self.src_ip.contains(pkt.src_ip)
            && self.src_port.contains(pkt.src_port)
            && self.dst_ip.contains(pkt.dst_ip)
            && self.dst_port.contains(pkt.dst_port)
    }

    pub fn is_subset(&self, other: &HeaderBox) -> bool {
        self.protocols.is_subset(&other.protocols)
            && self.directions.is_subset(&other.directions)
            && self.src_ip.is_subset(&other.src_ip)
            && self.src_port.is_subset(&other.src_port)
            && self.dst_ip.is_subset(&other.dst_ip)
            && self.dst_port.is_subset(&other.dst_port)
    }

    /// Allocation-free `intersect(..).is_some()`.
    pub fn overlaps(&self, other: &HeaderBox) -> bool {
        fn runs_overlap(a: &IntervalSet, b: &IntervalSet) -> bool {
            let (a, b) = (a.intervals(), b.intervals());
            let (mut i, mut j) = (0, 0);
            while i < a.len() && j < b.len() {
                if a[i].intersect(&b[j]).is_some() {
                    return true;
                }
                if a[i].hi() < b[j].hi() {
                    i += 1;
                } else {
                    j += 1;
                }
            }
            false
        }
        !self.protocols.intersect(&other.protocols).is_empty()
            && !self.directions.intersect(&other.directions).is_empty()
            && runs_overlap(&self.src_ip, &other.src_ip)
            && runs_overlap(&self.src_port, &other.src_port)
            && runs_overlap(&self.dst_ip, &other.dst_ip)
            && runs_overlap(&self.dst_port, &other.dst_port)
    }

    pub fn intersect(&self, other: &HeaderBox) -> Option<HeaderBox> {
        let protocols = self.protocols.intersect(&other.protocols);
        let directions = self.directions.intersect(&other.directions);
        if protocols.is_empty() || directions.is_empty() {
            return None;
        }
        let src_ip = self.src_ip.intersect(&other.src_ip);
        if src_ip.is_empty() {
            return None;
        }
        let src_port = self.src_port.intersect(&other.src_port);
        if src_port.is_empty() {
            return None;
        }
        let dst_ip = self.dst_ip.intersect(&other.dst_ip);
        if dst_ip.is_empty() {
            return None;
        }
        let dst_port = self.dst_port.intersect(&other.dst_port);
        if dst_port.is_empty() {
            return None;
        }
        Some(HeaderBox { protocols, src_ip, src_port, dst_ip, dst_port, directions })
    }

    /// `self − other` as pairwise-disjoint boxes, carving one dimension at
    /// a time in the order protocol, src ip, src port, dst ip, dst port,
    /// direction. At most six pieces.
    pub fn subtract(&self, other: &HeaderBox) -> Vec<HeaderBox> {
        if !self.overlaps(other) {
            return vec![self.clone()];
        }
        let mut out = Vec::new();
        let mut rest = self.clone();

        let outside = rest.protocols.subtract(&other.protocols);
        if !outside.is_empty() {
            out.push(HeaderBox { protocols: outside, ..rest.clone() });
        }
        rest.protocols = rest.protocols.intersect(&other.protocols);

        macro_rules! carve {
            ($field:ident) => {
                let outside = rest.$field.subtract(&other.$field);
                if !outside.is_empty() {
                    out.push(HeaderBox { $field: outside, ..rest.clone() });
                }
                rest.$field = rest.$field.intersect(&other.$field);
            };
        }
        carve!(src_ip);
        carve!(src_port);
        carve!(dst_ip);
        carve!(dst_port);

        let outside = rest.directions.subtract(&other.directions);
        if !outside.is_empty() {
            out.push(HeaderBox { directions: outside, ..rest });
        }
        out
    }

    pub fn dim(&self, d: usize) -> DimSet {
        match d {
            0 => DimSet::Protocols(self.protocols),
            1 => DimSet::Intervals(self.src_ip.clone()),
            2 => DimSet::Intervals(self.src_port.clone()),
            3 => DimSet::Intervals(self.dst_ip.clone()),
            4 => DimSet::Intervals(self.dst_port.clone()),
            5 => DimSet::Directions(self.directions),
            _ => panic!("dimension {d} out of range"),
        }
    }

    /// Copy with dimension `d` emptied; boxes sharing this key differ only
    /// in `d`.
    pub(crate) fn key_without(&self, d: usize) -> HeaderBox {
        let mut key = self.clone();
        match d {
            0 => key.protocols = ProtoSet(0),
            1 => key.src_ip = IntervalSet::empty(),
            2 => key.src_port = IntervalSet::empty(),
            3 => key.dst_ip = IntervalSet::empty(),
            4 => key.dst_port = IntervalSet::empty(),
            5 => key.directions = DirSet(0),
            _ => panic!("dimension {d} out of range"),
        }
        key
    }

    pub(crate) fn absorb_dim(&mut self, other: &HeaderBox, d: usize) {
        match d {
            0 => self.protocols = self.protocols.union(&other.protocols),
            1 => self.src_ip = self.src_ip.union(&other.src_ip),
            2 => self.src_port = self.src_port.union(&other.src_port),
            3 => self.dst_ip = self.dst_ip.union(&other.dst_ip),
            4 => self.dst_port = self.dst_port.union(&other.dst_port),
            5 => self.directions = self.directions.union(&other.directions),
            _ => panic!("dimension {d} out of range"),
        }
    }

    pub fn display<'a>(&'a self, domain: &'a Domain) -> impl fmt::Display + 'a {
        BoxDisplay { b: self, domain }
    }
}

struct BoxDisplay<'a> {
    b: &'a HeaderBox,
    domain: &'a Domain,
}

impl fmt::Display for BoxDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (b, d) = (self.b, self.domain);
        let join = |set: &IntervalSet, render: &dyn Fn(crate::space::Interval) -> String| {
            set.intervals().iter().map(|iv| render(*iv)).collect::<Vec<_>>().join(";")
        };
        let protos = if b.protocols == ProtoSet::full(d) {
            "ANY".to_string()
        } else {
            b.protocols.ids().map(|p| d.protocol_name(p)).collect::<Vec<_>>().join(";")
        };
        write!(
            f,
            "{} {} src={}:{} dst={}:{}",
            protos,
            b.directions,
            join(&b.src_ip, &|iv| render_ip_pattern(iv, d)),
            join(&b.src_port, &|iv| render_port_pattern(iv, d)),
            join(&b.dst_ip, &|iv| render_ip_pattern(iv, d)),
            join(&b.dst_port, &|iv| render_port_pattern(iv, d)),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::Interval;

    #[test]
    fn carve_port_hole() {
        let d = Domain::new(4, 4, ["TCP"]).unwrap();
        let full = HeaderBox::full(&d);
        let hole = HeaderBox { src_port: Interval::new(10, 12).into(), ..full.clone() };
        let pieces = full.subtract(&hole);
        assert_eq!(pieces.len(), 1);
        assert_eq!(
            pieces[0].src_port,
            IntervalSet::from_intervals([Interval::new(0, 9), Interval::new(13, 15)])
        );
        assert_eq!(pieces[0].size() + hole.size(), full.size());
    }

    #[test]
    fn carve_yields_at_most_six_disjoint_pieces() {
        let d = Domain::new(3, 3, ["TCP", "UDP"]).unwrap();
        let full = HeaderBox::full(&d);
        let mid = Interval::new(2, 4).into();
        let inner = HeaderBox {
            protocols: ProtoSet(1),
            src_ip: IntervalSet::from_interval(Interval::new(2, 4)),
            src_port: mid,
            dst_ip: Interval::new(2, 4).into(),
            dst_port: Interval::new(2, 4).into(),
            directions: DirSet(1),
        };
        let pieces = full.subtract(&inner);
        assert_eq!(pieces.len(), 6);
        for (i, a) in pieces.iter().enumerate() {
            assert!(a.intersect(&inner).is_none());
            for b in &pieces[i + 1..] {
                assert!(a.intersect(b).is_none());
            }
        }
        let total: u128 = pieces.iter().map(HeaderBox::size).sum();
        assert_eq!(total + inner.size(), full.size());
    }
}

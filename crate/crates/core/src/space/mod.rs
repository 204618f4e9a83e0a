//! Exact set algebra over packet-header space.
//!
//! A [`HeaderSpace`] is a union of pairwise-disjoint [`HeaderBox`]es. Every
//! operation returns canonical output: empty boxes dropped, boxes that
//! differ in a single dimension merged, boxes sorted.

mod dimset;
mod hbox;
mod interval;

use std::collections::HashMap;

pub use self::dimset::{field_relation, DimSet, DirSet, FieldRelation, ProtoSet};
pub use self::hbox::{HeaderBox, DIMS};
pub use self::interval::{Interval, IntervalSet};

use crate::error::{Error, Result};
use crate::model::{Direction, Domain, PacketHeader, ProtoId, Rule};

/// Default bound on how many packets [`HeaderSpace::enumerate`] will walk.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeaderSpace {
    domain: Domain,
    boxes: Vec<HeaderBox>,
}

impl HeaderSpace {
    pub fn empty(domain: &Domain) -> Self {
        HeaderSpace { domain: domain.clone(), boxes: Vec::new() }
    }

    pub fn full(domain: &Domain) -> Self {
        HeaderSpace { domain: domain.clone(), boxes: vec![HeaderBox::full(domain)] }
    }

    pub fn from_box(domain: &Domain, b: HeaderBox) -> Self {
        Self::from_boxes(domain, vec![b])
    }

    /// Caller guarantees the boxes are pairwise disjoint.
    pub fn from_boxes(domain: &Domain, boxes: Vec<HeaderBox>) -> Self {
        let mut s = HeaderSpace { domain: domain.clone(), boxes };
        s.canonicalize();
        s
    }

    /// The region a rule matches.
    pub fn of_rule(rule: &Rule, domain: &Domain) -> Self {
        HeaderSpace { domain: domain.clone(), boxes: vec![HeaderBox::of_rule(rule, domain)] }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn boxes(&self) -> &[HeaderBox] {
        &self.boxes
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    /// Packet count.
    pub fn size(&self) -> u128 {
        self.boxes.iter().map(HeaderBox::size).sum()
    }

    pub fn contains(&self, pkt: &PacketHeader) -> bool {
        self.boxes.iter().any(|b| b.contains(pkt))
    }

    fn check(&self, other: &HeaderSpace) -> Result<()> {
        if self.domain == other.domain {
            Ok(())
        } else {
            Err(Error::DomainMismatch)
        }
    }

    pub fn intersect(&self, other: &HeaderSpace) -> Result<HeaderSpace> {
        self.check(other)?;
        Ok(self.intersect_boxes(&other.boxes))
    }

    pub(crate) fn intersect_boxes(&self, others: &[HeaderBox]) -> HeaderSpace {
        let boxes = self
            .boxes
            .iter()
            .flat_map(|a| others.iter().filter_map(move |b| a.intersect(b)))
            .collect();
        HeaderSpace::from_boxes(&self.domain, boxes)
    }

    pub fn subtract(&self, other: &HeaderSpace) -> Result<HeaderSpace> {
        self.check(other)?;
        Ok(self.subtract_boxes(&other.boxes))
    }

    pub(crate) fn subtract_boxes(&self, others: &[HeaderBox]) -> HeaderSpace {
        let mut pieces = self.boxes.clone();
        for b in others {
            if !pieces.iter().any(|p| p.overlaps(b)) {
                continue;
            }
            pieces = pieces.iter().flat_map(|p| p.subtract(b)).collect();
        }
        HeaderSpace::from_boxes(&self.domain, pieces)
    }

    pub fn union(&self, other: &HeaderSpace) -> Result<HeaderSpace> {
        let extra = other.subtract(self)?;
        let mut boxes = self.boxes.clone();
        boxes.extend(extra.boxes);
        Ok(HeaderSpace::from_boxes(&self.domain, boxes))
    }

    pub fn is_subset(&self, other: &HeaderSpace) -> Result<bool> {
        Ok(self.subtract(other)?.is_empty())
    }

    pub fn equals(&self, other: &HeaderSpace) -> Result<bool> {
        Ok(self.is_subset(other)? && other.is_subset(self)?)
    }

    pub(crate) fn overlaps_box(&self, b: &HeaderBox) -> bool {
        self.boxes.iter().any(|x| x.overlaps(b))
    }

    /// True when every box lies inside `b`.
    pub(crate) fn is_inside_box(&self, b: &HeaderBox) -> bool {
        self.boxes.iter().all(|x| x.is_subset(b))
    }

    /// Allocation-free emptiness test for `self ∩ other`.
    pub fn overlaps(&self, other: &HeaderSpace) -> bool {
        self.boxes.iter().any(|a| other.boxes.iter().any(|b| a.overlaps(b)))
    }

    /// True when no two stored boxes overlap and none is empty.
    pub fn boxes_disjoint(&self) -> bool {
        self.boxes.iter().enumerate().all(|(i, a)| {
            !a.is_empty() && self.boxes[i + 1..].iter().all(|b| !a.overlaps(b))
        })
    }

    fn canonicalize(&mut self) {
        self.boxes.retain(|b| !b.is_empty());
        loop {
            let before = self.boxes.len();
            for d in 0..DIMS {
                self.merge_along(d);
            }
            if self.boxes.len() == before {
                break;
            }
        }
        self.boxes.sort_unstable();
    }

    fn merge_along(&mut self, d: usize) {
        if self.boxes.len() < 2 {
            return;
        }
        let mut slot: HashMap<HeaderBox, usize> = HashMap::with_capacity(self.boxes.len());
        let mut merged: Vec<HeaderBox> = Vec::with_capacity(self.boxes.len());
        for b in self.boxes.drain(..) {
            match slot.get(&b.key_without(d)) {
                Some(&i) => merged[i].absorb_dim(&b, d),
                None => {
                    slot.insert(b.key_without(d), merged.len());
                    merged.push(b);
                }
            }
        }
        self.boxes = merged;
    }

    /// Walks every packet of the space exactly once. Fails when the domain
    /// holds more than `cap` packets.
    pub fn enumerate(&self, cap: u128) -> Result<Packets<'_>> {
        let size = self.domain.packet_count();
        if size > cap {
            return Err(Error::EnumerationCap { size, cap });
        }
        Ok(Packets { boxes: &self.boxes, next_box: 0, odometer: None })
    }

    pub fn enumerate_packets(&self) -> Result<Packets<'_>> {
        self.enumerate(DEFAULT_ENUMERATION_CAP)
    }
}

/// Iterator over the packets of a [`HeaderSpace`].
pub struct Packets<'a> {
    boxes: &'a [HeaderBox],
    next_box: usize,
    odometer: Option<Odometer>,
}

struct Odometer {
    dims: [Vec<Interval>; DIMS],
    // (run index, value) per dimension
    pos: [(usize, u32); DIMS],
}

impl Odometer {
    fn new(b: &HeaderBox) -> Self {
        let dirs: Vec<Interval> = b
            .directions
            .iter()
            .map(|d| Interval::single(d as u32))
            .collect();
        let dims = [
            b.protocols.as_intervals(),
            dirs,
            b.src_ip.intervals().to_vec(),
            b.src_port.intervals().to_vec(),
            b.dst_ip.intervals().to_vec(),
            b.dst_port.intervals().to_vec(),
        ];
        let pos = std::array::from_fn(|i| (0, dims[i][0].lo()));
        Odometer { dims, pos }
    }

    fn current(&self) -> PacketHeader {
        PacketHeader {
            protocol: ProtoId(self.pos[0].1 as u8),
            direction: if self.pos[1].1 == Direction::Input as u32 {
                Direction::Input
            } else {
                Direction::Output
            },
            src_ip: self.pos[2].1,
            src_port: self.pos[3].1,
            dst_ip: self.pos[4].1,
            dst_port: self.pos[5].1,
        }
    }

    /// Advances to the next packet; false once exhausted.
    fn advance(&mut self) -> bool {
        for d in (0..DIMS).rev() {
            let (run, value) = self.pos[d];
            let runs = &self.dims[d];
            if value < runs[run].hi() {
                self.pos[d].1 = value + 1;
                return true;
            }
            if run + 1 < runs.len() {
                self.pos[d] = (run + 1, runs[run + 1].lo());
                return true;
            }
            self.pos[d] = (0, runs[0].lo());
        }
        false
    }
}

impl Iterator for Packets<'_> {
    type Item = PacketHeader;

    fn next(&mut self) -> Option<PacketHeader> {
        loop {
            match &mut self.odometer {
                Some(odo) => {
                    let pkt = odo.current();
                    if !odo.advance() {
                        self.odometer = None;
                    }
                    return Some(pkt);
                }
                None => {
                    let b = self.boxes.get(self.next_box)?;
                    self.next_box += 1;
                    self.odometer = Some(Odometer::new(b));
                }
            }
        }
    }
}

use std::fmt;

/// Inclusive integer interval `[lo, hi]`, never empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Interval {
    lo: u32,
    hi: u32,
}

impl Interval {
    /// Panics if `lo > hi`.
    pub fn new(lo: u32, hi: u32) -> Self {
        assert!(lo <= hi, "interval [{lo}, {hi}] is empty");
        Interval { lo, hi }
    }

    pub fn single(value: u32) -> Self {
        Interval { lo: value, hi: value }
    }

    pub fn try_new(lo: u32, hi: u32) -> Option<Self> {
        (lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn lo(&self) -> u32 {
        self.lo
    }

    pub fn hi(&self) -> u32 {
        self.hi
    }

    #[allow(clippy::len_without_is_empty)] // never empty
    pub fn len(&self) -> u64 {
        u64::from(self.hi - self.lo) + 1
    }

    pub fn is_single(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, value: u32) -> bool {
        self.lo <= value && value <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn intersect(&self, other: &Interval) -> Option<Interval> {
        Interval::try_new(self.lo.max(other.lo), self.hi.min(other.hi))
    }

    /// If the interval is exactly an aligned power-of-two block inside a
    /// `bits`-wide value space, returns the prefix length of that block.
    pub fn prefix_len(&self, bits: u8) -> Option<u8> {
        let size = self.len();
        if !size.is_power_of_two() {
            return None;
        }
        let host_bits = size.trailing_zeros() as u8;
        if host_bits > bits || u64::from(self.lo) % size != 0 {
            return None;
        }
        Some(bits - host_bits)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_single() {
            write!(f, "{}", self.lo)
        } else {
            write!(f, "{}-{}", self.lo, self.hi)
        }
    }
}

/// A set of integers stored as sorted, disjoint, non-adjacent intervals.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IntervalSet {
    runs: Vec<Interval>,
}

impl IntervalSet {
    pub fn empty() -> Self {
        IntervalSet { runs: Vec::new() }
    }

    pub fn from_interval(iv: Interval) -> Self {
        IntervalSet { runs: vec![iv] }
    }

    /// Builds the canonical set covering every given interval.
    pub fn from_intervals(intervals: impl IntoIterator<Item = Interval>) -> Self {
        let mut all: Vec<Interval> = intervals.into_iter().collect();
        all.sort_unstable();
        let mut runs: Vec<Interval> = Vec::with_capacity(all.len());
        for iv in all {
            match runs.last_mut() {
                Some(last) if u64::from(iv.lo) <= u64::from(last.hi) + 1 => {
                    last.hi = last.hi.max(iv.hi);
                }
                _ => runs.push(iv),
            }
        }
        IntervalSet { runs }
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.runs
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn len(&self) -> u64 {
        self.runs.iter().map(Interval::len).sum()
    }

    pub fn contains(&self, value: u32) -> bool {
        // runs are sorted, so binary search on the upper bound
        let idx = self.runs.partition_point(|iv| iv.hi < value);
        self.runs.get(idx).is_some_and(|iv| iv.lo <= value)
    }

    pub fn as_single_interval(&self) -> Option<Interval> {
        match self.runs.as_slice() {
            [iv] => Some(*iv),
            _ => None,
        }
    }

    pub fn intersect(&self, other: &IntervalSet) -> IntervalSet {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.runs.len() && j < other.runs.len() {
            let (a, b) = (&self.runs[i], &other.runs[j]);
            if let Some(iv) = a.intersect(b) {
                out.push(iv);
            }
            if a.hi < b.hi {
                i += 1;
            } else {
                j += 1;
            }
        }
        // pieces of disjoint non-adjacent runs stay non-adjacent
        IntervalSet { runs: out }
    }

    pub fn subtract(&self, other: &IntervalSet) -> IntervalSet {
        let mut out = Vec::new();
        let mut j = 0;
        for a in &self.runs {
            let mut cur_lo = u64::from(a.lo);
            let hi = u64::from(a.hi);
            while j < other.runs.len() && u64::from(other.runs[j].hi) < cur_lo {
                j += 1;
            }
            let mut k = j;
            while cur_lo <= hi && k < other.runs.len() && u64::from(other.runs[k].lo) <= hi {
                let b = other.runs[k];
                if u64::from(b.lo) > cur_lo {
                    out.push(Interval::new(cur_lo as u32, b.lo - 1));
                }
                cur_lo = cur_lo.max(u64::from(b.hi) + 1);
                k += 1;
            }
            if cur_lo <= hi {
                out.push(Interval::new(cur_lo as u32, hi as u32));
            }
        }
        IntervalSet { runs: out }
    }

    pub fn union(&self, other: &IntervalSet) -> IntervalSet {
        IntervalSet::from_intervals(self.runs.iter().chain(other.runs.iter()).copied())
    }

    pub fn is_subset(&self, other: &IntervalSet) -> bool {
        self.runs.iter().all(|a| {
            let idx = other.runs.partition_point(|b| b.hi < a.lo);
            other.runs.get(idx).is_some_and(|b| b.contains_interval(a))
        })
    }

    pub fn values(&self) -> impl Iterator<Item = u32> + '_ {
        self.runs.iter().flat_map(|iv| iv.lo..=iv.hi)
    }
}

impl From<Interval> for IntervalSet {
    fn from(iv: Interval) -> Self {
        IntervalSet::from_interval(iv)
    }
}

impl fmt::Display for IntervalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.runs.is_empty() {
            return f.write_str("{}");
        }
        for (i, iv) in self.runs.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{iv}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn set(ivs: &[(u32, u32)]) -> IntervalSet {
        IntervalSet::from_intervals(ivs.iter().map(|&(a, b)| Interval::new(a, b)))
    }

    #[test]
    fn merges_adjacent_and_overlapping_runs() {
        let s = set(&[(5, 9), (0, 3), (4, 4), (20, 30), (25, 40)]);
        assert_eq!(s.intervals(), &[Interval::new(0, 9), Interval::new(20, 40)]);
    }

    #[test]
    fn subtract_carves_middle() {
        let full = set(&[(0, 255)]);
        let hole = set(&[(10, 20)]);
        assert_eq!(full.subtract(&hole), set(&[(0, 9), (21, 255)]));
        assert!(full.subtract(&full).is_empty());
    }

    #[test]
    fn subtract_at_u32_edge() {
        let full = set(&[(0, u32::MAX)]);
        let top = set(&[(u32::MAX - 1, u32::MAX)]);
        assert_eq!(full.subtract(&top), set(&[(0, u32::MAX - 2)]));
        assert_eq!(full.len(), 1 << 32);
    }

    #[test]
    fn prefix_len_detects_aligned_blocks() {
        assert_eq!(Interval::new(0, 255).prefix_len(8), Some(0));
        assert_eq!(Interval::new(16, 31).prefix_len(8), Some(4));
        assert_eq!(Interval::new(17, 17).prefix_len(8), Some(8));
        assert_eq!(Interval::new(16, 32).prefix_len(8), None);
        assert_eq!(Interval::new(8, 23).prefix_len(8), None);
    }

    fn arb_set() -> impl Strategy<Value = IntervalSet> {
        prop::collection::vec((0u32..64, 0u32..8), 0..5).prop_map(|v| {
            IntervalSet::from_intervals(v.into_iter().map(|(lo, w)| Interval::new(lo, (lo + w).min(63))))
        })
    }

    fn naive(s: &IntervalSet) -> BTreeSet<u32> {
        s.values().collect()
    }

    proptest! {
        #[test]
        fn ops_agree_with_naive_sets(a in arb_set(), b in arb_set()) {
            let (na, nb) = (naive(&a), naive(&b));
            prop_assert_eq!(naive(&a.intersect(&b)), &na & &nb);
            prop_assert_eq!(naive(&a.subtract(&b)), &na - &nb);
            prop_assert_eq!(naive(&a.union(&b)), &na | &nb);
            prop_assert_eq!(a.is_subset(&b), na.is_subset(&nb));
            for v in 0..64 {
                prop_assert_eq!(a.contains(v), na.contains(&v));
            }
        }

        #[test]
        fn outputs_are_canonical(a in arb_set(), b in arb_set()) {
            for s in [a.intersect(&b), a.subtract(&b), a.union(&b)] {
                prop_assert_eq!(IntervalSet::from_intervals(s.intervals().iter().copied()), s);
            }
        }
    }
}

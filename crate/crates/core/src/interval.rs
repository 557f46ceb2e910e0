//! Closed integer intervals and merged interval lists.

use std::fmt;

use serde::{Deserialize, Serialize};

/// A closed interval `[start, end]` over a label space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(u32, u32)", into = "(u32, u32)")]
pub struct Interval {
    pub start: u32,
    pub end: u32,
}

impl Interval {
    pub fn new(start: u32, end: u32) -> Self {
        debug_assert!(start <= end);
        Interval { start, end }
    }

    pub fn point(x: u32) -> Self {
        Interval { start: x, end: x }
    }

    pub fn contains(&self, x: u32) -> bool {
        self.start <= x && x <= self.end
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> u32 {
        self.end - self.start + 1
    }
}

impl From<(u32, u32)> for Interval {
    fn from((start, end): (u32, u32)) -> Self {
        Interval { start, end }
    }
}

impl From<Interval> for (u32, u32) {
    fn from(i: Interval) -> Self {
        (i.start, i.end)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.start, self.end)
    }
}

/// Sorted, pairwise disjoint and non-adjacent intervals.
///
/// Two intervals such as `[3,3]` and `[4,4]` are always stored as `[3,4]`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntervalList(Vec<Interval>);

impl IntervalList {
    pub fn new() -> Self {
        IntervalList(Vec::new())
    }

    /// Builds the canonical list covering the union of `intervals`.
    pub fn merged<I: IntoIterator<Item = Interval>>(intervals: I) -> Self {
        let mut all: Vec<Interval> = intervals.into_iter().collect();
        all.sort_unstable();
        let mut out: Vec<Interval> = Vec::with_capacity(all.len());
        for iv in all {
            match out.last_mut() {
                Some(last) if iv.start <= last.end.saturating_add(1) => {
                    last.end = last.end.max(iv.end);
                }
                _ => out.push(iv),
            }
        }
        IntervalList(out)
    }

    pub fn contains(&self, x: u32) -> bool {
        // first interval whose end >= x
        let i = self.0.partition_point(|iv| iv.end < x);
        self.0.get(i).is_some_and(|iv| iv.start <= x)
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Every covered point in ascending order.
    pub fn points(&self) -> impl Iterator<Item = u32> + '_ {
        self.0.iter().flat_map(|iv| iv.start..=iv.end)
    }

    /// Number of covered points.
    pub fn cardinality(&self) -> usize {
        self.0.iter().map(|iv| iv.len() as usize).sum()
    }

    /// True when the list is sorted, disjoint and maximally merged.
    pub fn is_canonical(&self) -> bool {
        self.0.iter().all(|iv| iv.start <= iv.end) && self.0.windows(2).all(|w| w[0].end.saturating_add(1) < w[1].start)
    }
}

impl fmt::Display for IntervalList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        f.write_str(&parts.join(""))
    }
}

//! Mergeable streaming accumulator over a contiguous run of digits.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Result, StatsError};
use crate::kernel::Digit;

/// Largest supported tuple order.
pub const MAX_ORDER: usize = 4;
/// Default tuple order.
pub const DEFAULT_ORDER: usize = 2;

const DENSE_GAPS: usize = 1 << 12;

/// Gap length → number of occurrences. Short gaps are stored densely.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(from = "Vec<(u64, u64)>", into = "Vec<(u64, u64)>")]
pub struct GapHistogram {
    dense: Vec<u64>,
    sparse: BTreeMap<u64, u64>,
}

impl GapHistogram {
    #[inline]
    pub fn add(&mut self, gap: u64, count: u64) {
        if (gap as usize) < DENSE_GAPS {
            let g = gap as usize;
            if g >= self.dense.len() {
                self.dense.resize(g + 1, 0);
            }
            self.dense[g] += count;
        } else {
            *self.sparse.entry(gap).or_default() += count;
        }
    }

    pub fn get(&self, gap: u64) -> u64 {
        if (gap as usize) < DENSE_GAPS {
            self.dense.get(gap as usize).copied().unwrap_or(0)
        } else {
            self.sparse.get(&gap).copied().unwrap_or(0)
        }
    }

    /// `(gap, count)` with nonzero counts, ascending by gap.
    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.dense
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(g, &c)| (g as u64, c))
            .chain(self.sparse.iter().map(|(&g, &c)| (g, c)))
    }

    /// Number of gaps recorded.
    pub fn total(&self) -> u64 {
        self.iter().map(|(_, c)| c).sum()
    }

    /// Sum of all recorded gap lengths.
    pub fn span(&self) -> u64 {
        self.iter().map(|(g, c)| g * c).sum()
    }

    pub fn max_gap(&self) -> Option<u64> {
        self.iter().last().map(|(g, _)| g)
    }

    fn absorb(&mut self, other: &GapHistogram) {
        for (g, c) in other.iter() {
            self.add(g, c);
        }
    }
}

impl PartialEq for GapHistogram {
    fn eq(&self, other: &Self) -> bool {
        self.iter().eq(other.iter())
    }
}

impl Eq for GapHistogram {}

impl From<Vec<(u64, u64)>> for GapHistogram {
    fn from(v: Vec<(u64, u64)>) -> Self {
        let mut h = GapHistogram::default();
        for (g, c) in v {
            h.add(g, c);
        }
        h
    }
}

impl From<GapHistogram> for Vec<(u64, u64)> {
    fn from(h: GapHistogram) -> Self {
        h.iter().collect()
    }
}

/// Counts, occurrence positions, waiting-time histograms and overlapping
/// `k`-tuple counts for the digits at global indices
/// `start, start + 1, …, start + len − 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsState {
    base: u32,
    order: usize,
    start: u64,
    len: u64,
    counts: Vec<u64>,
    /// Global index of the first occurrence, 0 if none.
    first_seen: Vec<u64>,
    /// Global index of the latest occurrence, 0 if none.
    last_seen: Vec<u64>,
    waits: Vec<GapHistogram>,
    /// Dense counts indexed by the base-`(base − 1)` tuple code.
    tuples: Vec<u64>,
    /// First `min(len, order − 1)` digits.
    head: Vec<u8>,
    /// Code of the last `min(len, order − 1)` digits.
    window: u32,
}

impl StatsState {
    /// An empty state for a stream starting at index 1.
    pub fn new(base: u32, order: usize) -> Result<StatsState> {
        StatsState::starting_at(base, order, 1)
    }

    /// An empty state whose first digit will have global index `start`.
    pub fn starting_at(base: u32, order: usize, start: u64) -> Result<StatsState> {
        if !(2..=crate::kernel::MAX_BASE).contains(&base) {
            return Err(StatsError::InvalidArgument(format!(
                "base must be 2..={}, got {base}",
                crate::kernel::MAX_BASE
            )));
        }
        if !(1..=MAX_ORDER).contains(&order) {
            return Err(StatsError::InvalidArgument(format!(
                "tuple order must be 1..={MAX_ORDER}, got {order}"
            )));
        }
        if start == 0 {
            return Err(StatsError::InvalidArgument("indices start at 1".into()));
        }
        let digits = (base - 1) as usize;
        Ok(StatsState {
            base,
            order,
            start,
            len: 0,
            counts: vec![0; digits],
            first_seen: vec![0; digits],
            last_seen: vec![0; digits],
            waits: vec![GapHistogram::default(); digits],
            tuples: vec![0; digits.pow(order as u32)],
            head: Vec::new(),
            window: 0,
        })
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Global index of the first digit covered.
    pub fn start(&self) -> u64 {
        self.start
    }

    /// Number of digits ingested, `N`.
    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Global index one past the last digit covered.
    pub fn end(&self) -> u64 {
        self.start + self.len
    }

    fn slot(&self, d: u32) -> usize {
        assert!(
            d >= 1 && d < self.base,
            "digit {d} outside base {}",
            self.base
        );
        (d - 1) as usize
    }

    pub fn count(&self, d: u32) -> u64 {
        self.counts[self.slot(d)]
    }

    /// Counts for digits `1..base`.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn first_seen(&self, d: u32) -> Option<u64> {
        Some(self.first_seen[self.slot(d)]).filter(|&i| i > 0)
    }

    pub fn last_seen(&self, d: u32) -> Option<u64> {
        Some(self.last_seen[self.slot(d)]).filter(|&i| i > 0)
    }

    pub fn waits(&self, d: u32) -> &GapHistogram {
        &self.waits[self.slot(d)]
    }

    fn radix(&self) -> u32 {
        self.base - 1
    }

    fn window_modulus(&self) -> u32 {
        self.radix().pow(self.order as u32 - 1)
    }

    /// Code of a digit tuple of length `order`.
    pub fn tuple_code(&self, tuple: &[u8]) -> Result<usize> {
        if tuple.len() != self.order {
            return Err(StatsError::InvalidArgument(format!(
                "tuple of length {} for order {}",
                tuple.len(),
                self.order
            )));
        }
        let mut code = 0usize;
        for &d in tuple {
            if d == 0 || d as u32 >= self.base {
                return Err(StatsError::InvalidArgument(format!(
                    "digit {d} out of range"
                )));
            }
            code = code * self.radix() as usize + (d - 1) as usize;
        }
        Ok(code)
    }

    /// The digit tuple for a code.
    pub fn tuple_digits(&self, code: usize) -> Vec<u8> {
        let r = self.radix() as usize;
        let mut v = vec![0u8; self.order];
        let mut c = code;
        for slot in v.iter_mut().rev() {
            *slot = (c % r) as u8 + 1;
            c /= r;
        }
        v
    }

    pub fn tuple_count(&self, tuple: &[u8]) -> Result<u64> {
        Ok(self.tuples[self.tuple_code(tuple)?])
    }

    /// Dense tuple counts in code order.
    pub fn tuple_counts(&self) -> &[u64] {
        &self.tuples
    }

    /// Number of overlapping tuples, `max(N − k + 1, 0)`.
    pub fn tuple_total(&self) -> u64 {
        (self.len + 1).saturating_sub(self.order as u64)
    }

    /// Last `min(N, k − 1)` digits.
    pub fn tail(&self) -> Vec<u8> {
        let n = (self.len as usize).min(self.order - 1);
        let r = self.radix();
        let mut v = vec![0u8; n];
        let mut c = self.window;
        for slot in v.iter_mut().rev() {
            *slot = (c % r) as u8 + 1;
            c /= r;
        }
        v
    }

    /// First `min(N, k − 1)` digits.
    pub fn head(&self) -> &[u8] {
        &self.head
    }

    #[inline]
    pub fn ingest(&mut self, digit: Digit) {
        let d = digit.get() as u32;
        let i = self.start + self.len;
        let s = self.slot(d);
        self.counts[s] += 1;
        let last = self.last_seen[s];
        if last > 0 {
            self.waits[s].add(i - last, 1);
        } else {
            self.first_seen[s] = i;
        }
        self.last_seen[s] = i;
        let k = self.order as u64;
        let code = self.window * self.radix() + s as u32;
        if self.len + 1 >= k {
            self.tuples[code as usize] += 1;
        }
        self.window = code % self.window_modulus();
        if (self.len as usize) < self.order - 1 {
            self.head.push(d as u8);
        }
        self.len += 1;
    }

    pub fn ingest_all(&mut self, digits: &[Digit]) {
        for &d in digits {
            self.ingest(d);
        }
    }

    /// An empty state that continues where this one ends.
    pub fn successor(&self) -> StatsState {
        StatsState::starting_at(self.base, self.order, self.end()).expect("valid parameters")
    }

    /// The state of the concatenated stream: `b` must begin at `self.end()`.
    ///
    /// Gaps and tuples that straddle the boundary are recovered from the
    /// last occurrences and trailing digits of `self` and the first
    /// occurrences and leading digits of `b`.
    pub fn merge(&self, b: &StatsState) -> Result<StatsState> {
        if self.base != b.base || self.order != b.order {
            return Err(StatsError::InvalidArgument(format!(
                "cannot merge base {}/order {} with base {}/order {}",
                self.base, self.order, b.base, b.order
            )));
        }
        if b.is_empty() {
            return Ok(self.clone());
        }
        if self.is_empty() && self.start == b.start {
            return Ok(b.clone());
        }
        if b.start != self.end() {
            return Err(StatsError::InvalidArgument(format!(
                "states are not adjacent: first ends before {}, second starts at {}",
                self.end(),
                b.start
            )));
        }
        let mut out = self.clone();
        out.len += b.len;
        for s in 0..self.counts.len() {
            out.counts[s] += b.counts[s];
            out.waits[s].absorb(&b.waits[s]);
            if b.first_seen[s] > 0 {
                if self.last_seen[s] > 0 {
                    out.waits[s].add(b.first_seen[s] - self.last_seen[s], 1);
                } else {
                    out.first_seen[s] = b.first_seen[s];
                }
                out.last_seen[s] = b.last_seen[s];
            }
        }
        for (t, c) in out.tuples.iter_mut().zip(&b.tuples) {
            *t += c;
        }
        // Tuples straddling the boundary lie inside tail(a) ++ head(b).
        let mut joint = self.tail();
        let a_part = joint.len();
        joint.extend_from_slice(&b.head);
        let k = self.order;
        if joint.len() >= k {
            for w in 0..=joint.len() - k {
                if w < a_part && w + k > a_part {
                    out.tuples[self.tuple_code(&joint[w..w + k])?] += 1;
                }
            }
        }
        // Head: first k − 1 digits of the whole stream.
        let room = (k - 1).saturating_sub(out.head.len());
        out.head.extend(b.head.iter().take(room));
        // Window: code of the last k − 1 digits of the whole stream.
        let m = self.window_modulus();
        if b.len as usize >= k - 1 {
            out.window = b.window;
        } else {
            let mut code = self.window;
            for &d in b.head.iter() {
                code = (code * self.radix() + (d as u32 - 1)) % m;
            }
            out.window = code;
        }
        Ok(out)
    }

    /// Checks the bookkeeping identities; returns a description of the
    /// first violation.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let total: u64 = self.counts.iter().sum();
        if total != self.len {
            return Err(format!("counts sum to {total}, N = {}", self.len));
        }
        for s in 0..self.counts.len() {
            let h = &self.waits[s];
            let c = self.counts[s];
            if c == 0 {
                if h.total() != 0 || self.first_seen[s] != 0 || self.last_seen[s] != 0 {
                    return Err(format!("digit {} unseen but has history", s + 1));
                }
                continue;
            }
            if h.total() != c - 1 {
                return Err(format!(
                    "digit {}: {} gaps for {c} occurrences",
                    s + 1,
                    h.total()
                ));
            }
            if h.span() != self.last_seen[s] - self.first_seen[s] {
                return Err(format!(
                    "digit {}: gap lengths do not span occurrences",
                    s + 1
                ));
            }
        }
        let tuples: u64 = self.tuples.iter().sum();
        if tuples != self.tuple_total() {
            return Err(format!("{tuples} tuples, expected {}", self.tuple_total()));
        }
        Ok(())
    }
}

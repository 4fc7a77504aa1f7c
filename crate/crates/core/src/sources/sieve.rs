//! Segmented sieve of Eratosthenes over odd numbers.
//!
//! One byte per odd candidate; a segment of `segment_len` bytes covers
//! `2 · segment_len` integers. Multiples of 3, 5, 7, 11 and 13 are removed
//! by copying a precomputed period-15015 pattern, the remaining sieving
//! primes keep their next odd multiple between segments. Peak memory is the
//! segment plus the sieving primes up to `√high`.

use serde::{Deserialize, Serialize};

/// Default odd candidates per segment (256 KiB of bytes).
pub const DEFAULT_SEGMENT_LEN: usize = 1 << 18;

const PRESIEVE: [u64; 5] = [3, 5, 7, 11, 13];
const PATTERN_PERIOD: usize = 3 * 5 * 7 * 11 * 13;

/// All primes `≤ limit` by a plain (unsegmented) odd-only sieve.
pub fn small_primes(limit: u64) -> Vec<u64> {
    if limit < 2 {
        return Vec::new();
    }
    let half = (limit as usize - 1) / 2; // odd numbers 3..=limit
    let mut is_prime = vec![true; half + 1];
    let mut out = vec![2];
    let mut i = 1usize;
    while i <= half {
        if is_prime[i] {
            let p = 2 * i + 1;
            out.push(p as u64);
            let mut j = (p * p - 1) / 2;
            while j <= half {
                is_prime[j] = false;
                j += p;
            }
        }
        i += 1;
    }
    out
}

fn presieve_pattern() -> Vec<u8> {
    // index i ↔ odd number 2i + 1; pattern[i] = 0 when divisible by a presieve prime
    (0..PATTERN_PERIOD)
        .map(|i| {
            let n = 2 * i as u64 + 1;
            u8::from(PRESIEVE.iter().all(|&p| !n.is_multiple_of(p)))
        })
        .collect()
}

/// State needed to restart a [`PrimeStream`] after its last emitted prime.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimeCursor {
    /// Number of primes emitted so far.
    pub emitted: u64,
    /// The last prime emitted (0 before the first).
    pub last: u64,
}

/// Emits 2, 3, 5, 7, … in order.
pub struct PrimeStream {
    emitted: u64,
    last: u64,
    segment_len: usize,
    /// Odd number at index 0 of the next segment.
    low: u64,
    segment: Vec<u8>,
    pattern: Vec<u8>,
    sieving: Vec<u64>,
    next_multiple: Vec<u64>,
    sieving_limit: u64,
    pending: Vec<u64>,
    pending_pos: usize,
}

impl Default for PrimeStream {
    fn default() -> Self {
        Self::new()
    }
}

impl PrimeStream {
    pub fn new() -> Self {
        Self::with_segment_len(DEFAULT_SEGMENT_LEN)
    }

    pub fn with_segment_len(segment_len: usize) -> Self {
        Self::resume_with(
            PrimeCursor {
                emitted: 0,
                last: 0,
            },
            segment_len,
        )
    }

    /// Continues after `cursor.last`, numbering from `cursor.emitted + 1`.
    pub fn resume(cursor: PrimeCursor) -> Self {
        Self::resume_with(cursor, DEFAULT_SEGMENT_LEN)
    }

    pub fn resume_with(cursor: PrimeCursor, segment_len: usize) -> Self {
        let segment_len = segment_len.max(64).next_multiple_of(8);
        let mut pending = Vec::new();
        let low = if cursor.last < 2 {
            pending.push(2);
            1
        } else {
            // first odd number after `last`
            (cursor.last + 1) | 1
        };
        PrimeStream {
            emitted: cursor.emitted,
            last: cursor.last,
            segment_len,
            low,
            segment: vec![0; segment_len],
            pattern: presieve_pattern(),
            sieving: Vec::new(),
            next_multiple: Vec::new(),
            sieving_limit: 1,
            pending,
            pending_pos: 0,
        }
    }

    pub fn cursor(&self) -> PrimeCursor {
        PrimeCursor {
            emitted: self.emitted,
            last: self.last,
        }
    }

    pub fn emitted(&self) -> u64 {
        self.emitted
    }

    fn ensure_sieving_primes(&mut self, high: u64) {
        // need every prime p with p² < high
        let need = (high as f64).sqrt() as u64 + 2;
        if need <= self.sieving_limit {
            return;
        }
        let new_limit = need.max(self.sieving_limit * 2).max(1 << 12);
        let fresh = small_primes(new_limit);
        for &p in fresh.iter().filter(|&&p| p > self.sieving_limit && p > 13) {
            let sq = p * p;
            let first = if sq >= self.low {
                sq
            } else {
                let m = self.low.div_ceil(p) * p;
                if m % 2 == 0 {
                    m + p
                } else {
                    m
                }
            };
            self.sieving.push(p);
            self.next_multiple.push(first);
        }
        self.sieving_limit = new_limit;
    }

    fn sieve_next_segment(&mut self) {
        let len = self.segment_len;
        let low = self.low;
        let high = low + 2 * len as u64; // exclusive
        self.ensure_sieving_primes(high);
        let seg = &mut self.segment;
        let period = PATTERN_PERIOD;
        let mut offset = ((low / 2) as usize) % period;
        let mut filled = 0;
        while filled < len {
            let take = (period - offset).min(len - filled);
            seg[filled..filled + take].copy_from_slice(&self.pattern[offset..offset + take]);
            filled += take;
            offset = 0;
        }
        if low == 1 {
            seg[0] = 0; // 1 is not prime
        }
        // the pattern strikes the pre-sieved primes themselves
        for p in PRESIEVE.into_iter().filter(|p| (low..high).contains(p)) {
            seg[((p - low) / 2) as usize] = 1;
        }
        for (p, next) in self.sieving.iter().zip(self.next_multiple.iter_mut()) {
            if *next >= high {
                continue;
            }
            let mut idx = ((*next - low) / 2) as usize;
            let step = *p as usize;
            while idx < len {
                seg[idx] = 0;
                idx += step;
            }
            *next = low + 2 * idx as u64;
        }
        self.pending.clear();
        self.pending_pos = 0;
        for (chunk_idx, chunk) in seg.chunks_exact(8).enumerate() {
            let mut w = u64::from_le_bytes(chunk.try_into().unwrap());
            while w != 0 {
                let byte = (w.trailing_zeros() / 8) as u64;
                self.pending.push(low + 2 * (chunk_idx as u64 * 8 + byte));
                w &= w - 1;
            }
        }
        self.low = high;
    }

    /// Appends the next `count` primes to `out`.
    pub fn fill(&mut self, out: &mut Vec<u64>, count: usize) {
        let mut need = count;
        while need > 0 {
            if self.pending_pos == self.pending.len() {
                self.sieve_next_segment();
                continue;
            }
            let avail = (self.pending.len() - self.pending_pos).min(need);
            out.extend_from_slice(&self.pending[self.pending_pos..self.pending_pos + avail]);
            self.pending_pos += avail;
            need -= avail;
            self.emitted += avail as u64;
            self.last = *out.last().unwrap();
        }
    }
}

impl Iterator for PrimeStream {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        while self.pending_pos == self.pending.len() {
            self.sieve_next_segment();
        }
        let p = self.pending[self.pending_pos];
        self.pending_pos += 1;
        self.emitted += 1;
        self.last = p;
        Some(p)
    }
}

/// The first `count` primes, in order.
pub fn prime_stream(count: u64) -> std::iter::Take<PrimeStream> {
    PrimeStream::new().take(count as usize)
}

//! Cramér-style random "primes": each integer n ≥ 3 is kept independently
//! with probability 1/ln n.
//!
//! Candidate n consumes the (n−3)-th 64-bit output `w` of
//! `ChaCha8Rng::seed_from_u64(seed)`; it is kept iff
//! `(w >> 11) · 2⁻⁵³ ≤ 1 / ln n` in binary64. Because each candidate owns a
//! fixed slot of the keystream the stream can be resumed from its cursor.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

const FIRST_CANDIDATE: u64 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomCursor {
    pub seed: u64,
    /// Next integer to test.
    pub candidate: u64,
    pub emitted: u64,
}

pub struct RandomPrimeStream {
    rng: ChaCha8Rng,
    cursor: RandomCursor,
}

impl RandomPrimeStream {
    pub fn new(seed: u64) -> Self {
        Self::resume(RandomCursor {
            seed,
            candidate: FIRST_CANDIDATE,
            emitted: 0,
        })
    }

    pub fn resume(cursor: RandomCursor) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cursor.seed);
        let candidate = cursor.candidate.max(FIRST_CANDIDATE);
        rng.set_word_pos(2 * u128::from(candidate - FIRST_CANDIDATE));
        RandomPrimeStream {
            rng,
            cursor: RandomCursor {
                candidate,
                ..cursor
            },
        }
    }

    pub fn cursor(&self) -> RandomCursor {
        self.cursor
    }

    pub fn fill(&mut self, out: &mut Vec<u64>, count: usize) {
        out.extend(self.by_ref().take(count));
    }
}

impl Iterator for RandomPrimeStream {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        loop {
            let n = self.cursor.candidate;
            self.cursor.candidate += 1;
            let r = (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            if r <= 1.0 / (n as f64).ln() {
                self.cursor.emitted += 1;
                return Some(n);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let a: Vec<u64> = RandomPrimeStream::new(7).take(1000).collect();
        let b: Vec<u64> = RandomPrimeStream::new(7).take(1000).collect();
        let c: Vec<u64> = RandomPrimeStream::new(8).take(1000).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert!(a[0] >= 3);
    }

    #[test]
    fn resume_matches_uninterrupted() {
        let mut s = RandomPrimeStream::new(42);
        let head: Vec<u64> = s.by_ref().take(333).collect();
        let tail: Vec<u64> = RandomPrimeStream::resume(s.cursor()).take(400).collect();
        let all: Vec<u64> = RandomPrimeStream::new(42).take(733).collect();
        assert_eq!([head, tail].concat(), all);
    }

    #[test]
    fn density_tracks_prime_counting() {
        // expected count below x is about li(x) ≈ 78 628 for x = 10⁶ (minus the
        // start at 3); the standard deviation is under 300
        let count = RandomPrimeStream::new(1)
            .take_while(|&n| n < 1_000_000)
            .count() as f64;
        assert!((count - 78_626.0).abs() < 1_500.0, "{count}");
    }
}

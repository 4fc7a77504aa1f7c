//! Reference leading digits, computed without the fixed-point kernel.
//!
//! Integer sequences are built exactly with big integers and compared
//! against powers of the base. `2^(n ln n)` is not an integer; it and the
//! large `2^(n²)` terms are evaluated with rational interval arithmetic at
//! [`INTERVAL_BITS`] bits, using logarithm series different from the
//! kernel's. The primes come from a plain sieve of Eratosthenes and the
//! random primes from a sequential read of the generator.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use thiserror::Error;

use crate::sources::{Family, SequenceKind};

/// Largest count the oracle accepts.
pub const MAX_COUNT: u64 = 10_000;
/// Precision of the interval evaluation.
pub const INTERVAL_BITS: u64 = 640;
/// `2^(n²)` is built exactly up to this `n`.
pub const NSQ_EXACT_MAX: u64 = 1000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("oracle limited to {MAX_COUNT} terms, asked for {0}")]
    TooMany(u64),
    #[error("interval evaluation could not decide term {0}")]
    Undecided(u64),
}

/// Leading digit of `x > 0` in `base`, by comparison with `base^e`.
pub fn leading_digit(x: &BigUint, base: u32) -> u32 {
    Powers::new(base).digit(x)
}

/// Keeps `base^e ≤ x` for the last `x` seen, so increasing sequences only
/// pay for the growth between terms.
struct Powers {
    base: u32,
    exp: u64,
    pw: BigUint,
}

impl Powers {
    fn new(base: u32) -> Self {
        Powers {
            base,
            exp: 0,
            pw: BigUint::one(),
        }
    }

    fn digit(&mut self, x: &BigUint) -> u32 {
        assert!(!x.is_zero());
        // 2^(bits−1) ≤ x, so base^e ≤ x for e below (bits−1)·log_base 2
        let est = ((x.bits() - 1) as f64 * 2f64.ln() / (self.base as f64).ln()) as u64;
        let target = est.saturating_sub(1);
        if self.pw > *x {
            self.exp = 0;
            self.pw = BigUint::one();
        }
        if target > self.exp {
            self.pw *= BigUint::from(self.base).pow((target - self.exp) as u32);
            self.exp = target;
        }
        loop {
            let next = &self.pw * self.base;
            if next > *x {
                break;
            }
            self.pw = next;
            self.exp += 1;
        }
        let d = (x / &self.pw).to_u32().expect("quotient below base");
        debug_assert!(d >= 1 && d < self.base);
        d
    }
}

/// The first `count` primes by a plain sieve.
pub fn primes(count: usize) -> Vec<u64> {
    let mut limit = 32usize;
    loop {
        let mut composite = vec![false; limit + 1];
        let mut out = Vec::new();
        for i in 2..=limit {
            if composite[i] {
                continue;
            }
            out.push(i as u64);
            if out.len() == count {
                return out;
            }
            let mut j = i * i;
            while j <= limit {
                composite[j] = true;
                j += i;
            }
        }
        limit *= 2;
    }
}

/// The first `count` random primes for `seed`, read sequentially from the
/// generator.
pub fn random_primes(seed: u64, count: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut n = 3u64;
    while out.len() < count {
        let u = (rng.next_u64() >> 11) as f64 / 9007199254740992.0;
        if u <= 1.0 / (n as f64).ln() {
            out.push(n);
        }
        n += 1;
    }
    out
}

/// Closed interval `[lo, hi] · 2^-INTERVAL_BITS` of non-negative reals.
#[derive(Clone, Debug)]
struct Iv {
    lo: BigUint,
    hi: BigUint,
}

fn ceil_div(a: &BigUint, b: &BigUint) -> BigUint {
    let q = a / b;
    if &q * b == *a {
        q
    } else {
        q + 1u32
    }
}

fn ceil_shr(a: &BigUint, s: u64) -> BigUint {
    let q = a >> s;
    if &q << s == *a {
        q
    } else {
        q + 1u32
    }
}

impl Iv {
    fn int(n: u64) -> Iv {
        let v = BigUint::from(n) << INTERVAL_BITS;
        Iv {
            lo: v.clone(),
            hi: v,
        }
    }

    /// `num / den`.
    fn ratio(num: u64, den: u64) -> Iv {
        let a = BigUint::from(num) << INTERVAL_BITS;
        let d = BigUint::from(den);
        Iv {
            lo: &a / &d,
            hi: ceil_div(&a, &d),
        }
    }

    fn add(&self, o: &Iv) -> Iv {
        Iv {
            lo: &self.lo + &o.lo,
            hi: &self.hi + &o.hi,
        }
    }

    fn mul(&self, o: &Iv) -> Iv {
        Iv {
            lo: (&self.lo * &o.lo) >> INTERVAL_BITS,
            hi: ceil_shr(&(&self.hi * &o.hi), INTERVAL_BITS),
        }
    }

    fn mul_int(&self, m: u64) -> Iv {
        Iv {
            lo: &self.lo * m,
            hi: &self.hi * m,
        }
    }

    fn div_int(&self, m: u64) -> Iv {
        let m = BigUint::from(m);
        Iv {
            lo: &self.lo / &m,
            hi: ceil_div(&self.hi, &m),
        }
    }

    fn div(&self, o: &Iv) -> Iv {
        assert!(!o.lo.is_zero());
        Iv {
            lo: (&self.lo << INTERVAL_BITS) / &o.hi,
            hi: ceil_div(&(&self.hi << INTERVAL_BITS), &o.lo),
        }
    }

    /// Widens the upper end by `2^-k`.
    fn widen(mut self, k: u64) -> Iv {
        self.hi += BigUint::one() << INTERVAL_BITS.saturating_sub(k);
        self
    }
}

/// `ln 2 = Σ_{k≥1} 1 / (k·2^k)`; the tail after `K` terms is below `2^-K`.
fn ln2() -> Iv {
    let terms = INTERVAL_BITS + 8;
    let mut s = Iv::int(0);
    for k in 1..=terms {
        let den = BigUint::from(k) << k;
        let one = BigUint::one() << INTERVAL_BITS;
        s.lo += &one / &den;
        s.hi += ceil_div(&one, &den);
    }
    s.widen(terms)
}

/// `ln m` for `m ≥ 1`: with `m = 2^e · r`, `r ∈ [1, 2)`,
/// `ln r = −ln(1 − y) = Σ y^k / k` where `y = 1 − 2^e/m < ½`.
fn ln_int(m: u64, ln2: &Iv) -> Iv {
    assert!(m >= 1);
    let e = 63 - m.leading_zeros() as u64;
    let mut s = ln2.mul_int(e);
    let num = m - (1u64 << e);
    if num == 0 {
        return s;
    }
    let y = Iv::ratio(num, m);
    let terms = INTERVAL_BITS + 8;
    let mut pow = y.clone();
    for k in 1..=terms {
        s = s.add(&pow.div_int(k));
        pow = pow.mul(&y);
    }
    // tail ≤ y^(K+1) / ((K+1)(1 − y)) < 2^-K
    s.widen(terms)
}

/// Decides a leading digit from an interval for `log_base a_n`.
struct IntervalDigits {
    base: u32,
    /// `log_base d` for `d = 1..=base`.
    bounds: Vec<Iv>,
    ln2: Iv,
    ln_base: Iv,
}

impl IntervalDigits {
    fn new(base: u32) -> Self {
        let ln2 = ln2();
        let ln_base = ln_int(base as u64, &ln2);
        let bounds = (1..=base as u64)
            .map(|d| match d {
                1 => Iv::int(0),
                _ if d == base as u64 => Iv::int(1),
                _ => ln_int(d, &ln2).div(&ln_base),
            })
            .collect();
        IntervalDigits {
            base,
            bounds,
            ln2,
            ln_base,
        }
    }

    fn digit(&self, log: &Iv, n: u64) -> Result<u32, OracleError> {
        let ip = &log.lo >> INTERVAL_BITS;
        if &log.hi >> INTERVAL_BITS != ip {
            return Err(OracleError::Undecided(n));
        }
        let off = &ip << INTERVAL_BITS;
        let (lo, hi) = (&log.lo - &off, &log.hi - &off);
        for d in 1..self.base {
            let (a, b) = (&self.bounds[d as usize - 1], &self.bounds[d as usize]);
            if a.hi <= lo && hi < b.lo {
                return Ok(d);
            }
        }
        Err(OracleError::Undecided(n))
    }

    /// `log_base 2^x = x · ln 2 / ln base` for `x` given as an interval.
    fn pow2(&self, x: &Iv, n: u64) -> Result<u32, OracleError> {
        self.digit(&x.mul(&self.ln2).div(&self.ln_base), n)
    }
}

/// Leading digits of terms `1..=count` of `kind`.
pub fn digits(kind: &SequenceKind, count: u64) -> Result<Vec<u8>, OracleError> {
    if count > MAX_COUNT {
        return Err(OracleError::TooMany(count));
    }
    let base = kind.base();
    let n_terms = count as usize;
    let mut pw = Powers::new(base);
    let mut out = Vec::with_capacity(n_terms);
    let mut exact = |x: &BigUint| pw.digit(x) as u8;
    match kind.family() {
        Family::Mersenne | Family::RandomMersenne => {
            let ps = match kind.family() {
                Family::Mersenne => primes(n_terms),
                _ => random_primes(kind.seed().unwrap_or(0), n_terms),
            };
            for p in ps {
                out.push(exact(&((BigUint::one() << p) - 1u32)));
            }
        }
        Family::Pow2 => {
            for n in 1..=count {
                out.push(exact(&(BigUint::one() << n)));
            }
        }
        Family::Pow2Nsq => {
            let iv = IntervalDigits::new(base);
            for n in 1..=count {
                if n <= NSQ_EXACT_MAX {
                    out.push(exact(&(BigUint::one() << (n * n))));
                } else {
                    out.push(iv.pow2(&Iv::int(n * n), n)? as u8);
                }
            }
        }
        Family::Pow2Nlogn => {
            let iv = IntervalDigits::new(base);
            for n in 1..=count {
                let x = ln_int(n, &iv.ln2).mul_int(n);
                out.push(iv.pow2(&x, n)? as u8);
            }
        }
        Family::Npown => {
            for n in 1..=count {
                out.push(exact(&BigUint::from(n).pow(n as u32)));
            }
        }
        Family::Factorial => {
            let mut f = BigUint::one();
            for n in 1..=count {
                f *= n;
                out.push(exact(&f));
            }
        }
        Family::Primorial => {
            let mut f = BigUint::one();
            for p in primes(n_terms) {
                f *= p;
                out.push(exact(&f));
            }
        }
    }
    Ok(out)
}

/// First index (from 1) where `got` differs from the oracle, and the count
/// of differing positions.
pub fn compare(expected: &[u8], got: &[u8]) -> (Option<u64>, u64) {
    let mut first = None;
    let mut mismatches = (expected.len() as i64 - got.len() as i64).unsigned_abs();
    for (i, (a, b)) in expected.iter().zip(got).enumerate() {
        if a != b {
            first.get_or_insert(i as u64 + 1);
            mismatches += 1;
        }
    }
    if first.is_none() && expected.len() != got.len() {
        first = Some(expected.len().min(got.len()) as u64 + 1);
    }
    (first, mismatches)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dec(f: Family) -> SequenceKind {
        SequenceKind::decimal(f).unwrap()
    }

    #[test]
    fn exact_leading_digits() {
        assert_eq!(leading_digit(&BigUint::from(3125u32), 10), 3);
        assert_eq!(leading_digit(&BigUint::from(1u32), 10), 1);
        assert_eq!(leading_digit(&BigUint::from(999u32), 10), 9);
        assert_eq!(leading_digit(&BigUint::from(1000u32), 10), 1);
        assert_eq!(leading_digit(&BigUint::from(1024u32), 12), 7);
        let big = BigUint::from(7u32) * BigUint::from(10u32).pow(500) - 1u32;
        assert_eq!(leading_digit(&big, 10), 6);
    }

    #[test]
    fn reference_primes() {
        let p = primes(10_000);
        assert_eq!(&p[..8], [2, 3, 5, 7, 11, 13, 17, 19]);
        assert_eq!(p[9_999], 104_729);
    }

    #[test]
    fn random_primes_match_stream() {
        let a = random_primes(42, 2000);
        let b: Vec<u64> = crate::sources::RandomPrimeStream::new(42)
            .take(2000)
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn series_constants() {
        let l2 = ln2();
        let one = BigUint::one() << INTERVAL_BITS;
        // width stays tiny
        assert!(&l2.hi - &l2.lo < BigUint::one() << 12);
        let approx = (&l2.lo >> (INTERVAL_BITS - 60)).to_u64().unwrap() as f64 / 2f64.powi(60);
        assert!((approx - std::f64::consts::LN_2).abs() < 1e-15);
        let l10 = ln_int(10, &l2);
        let approx = (&l10.lo >> (INTERVAL_BITS - 60)).to_u64().unwrap() as f64 / 2f64.powi(60);
        assert!((approx - std::f64::consts::LN_10).abs() < 1e-15);
        assert!(ln_int(1, &l2).hi.is_zero());
        assert!(l2.lo < one);
    }

    #[test]
    fn table_values() {
        assert_eq!(
            digits(&dec(Family::Mersenne), 20).unwrap(),
            [3, 7, 3, 1, 2, 8, 1, 5, 8, 5, 2, 1, 2, 8, 1, 9, 5, 2, 1, 2]
        );
        assert_eq!(
            digits(&dec(Family::Pow2), 10).unwrap(),
            [2, 4, 8, 1, 3, 6, 1, 2, 5, 1]
        );
        assert_eq!(digits(&dec(Family::Npown), 5).unwrap(), [1, 4, 2, 2, 3]);
        assert_eq!(digits(&dec(Family::Factorial), 5).unwrap(), [1, 2, 6, 2, 1]);
        assert_eq!(digits(&dec(Family::Primorial), 4).unwrap(), [2, 6, 3, 2]);
        // 2^(2 ln 2) = 2.61…, 2^(3 ln 3) = 9.82…
        assert_eq!(&digits(&dec(Family::Pow2Nlogn), 3).unwrap(), &[1, 2, 9]);
    }

    #[test]
    fn nsq_interval_agrees_with_exact() {
        let iv = IntervalDigits::new(10);
        let mut pw = Powers::new(10);
        // n = 1 gives 2, exactly on a boundary
        for n in (2..=300).chain([NSQ_EXACT_MAX]) {
            let exact = pw.digit(&(BigUint::one() << (n * n)));
            assert_eq!(iv.pow2(&Iv::int(n * n), n).unwrap(), exact, "n = {n}");
        }
    }

    #[test]
    fn refuses_large_counts() {
        assert_eq!(
            digits(&dec(Family::Pow2), MAX_COUNT + 1),
            Err(OracleError::TooMany(MAX_COUNT + 1))
        );
    }

    #[test]
    fn compare_reports_first_mismatch() {
        assert_eq!(compare(&[1, 2, 3], &[1, 2, 3]), (None, 0));
        assert_eq!(compare(&[1, 2, 3], &[1, 5, 4]), (Some(2), 2));
        assert_eq!(compare(&[1, 2, 3], &[1, 2]), (Some(3), 1));
    }
}

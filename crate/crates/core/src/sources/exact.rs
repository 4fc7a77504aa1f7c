//! Exact leading digits of small terms.
//!
//! A handful of early terms sit exactly on a digit boundary (2, 4, 8, 6 =
//! 3!, 30 = 2·3·5, 4 = 2², …) where no finite precision can separate the
//! interval from the boundary. Those terms are small, so they are settled by
//! building the integer.

use num_bigint::BigUint;
use num_traits::One;

use super::sieve::small_primes;
use super::Family;
use crate::kernel::Digit;

/// Terms above this many bits are never built.
pub(crate) const EXACT_LIMIT_BITS: u64 = 1 << 16;

/// Leading digit of `a_n` (of `2^p` for prime-based kinds) when the term
/// has at most [`EXACT_LIMIT_BITS`] bits.
pub(crate) fn small_term_digit(
    family: Family,
    n: u64,
    exponent: Option<u64>,
    base: u32,
) -> Option<Digit> {
    let x = small_term(family, n, exponent)?;
    Some(leading_digit(&x, base))
}

fn small_term(family: Family, n: u64, exponent: Option<u64>) -> Option<BigUint> {
    let lim = EXACT_LIMIT_BITS;
    match family {
        Family::Mersenne | Family::RandomMersenne => {
            let p = exponent?;
            (p <= lim).then(|| BigUint::one() << p)
        }
        Family::Pow2 => (n <= lim).then(|| BigUint::one() << n),
        Family::Pow2Nsq => n
            .checked_mul(n)
            .filter(|&e| e <= lim)
            .map(|e| BigUint::one() << e),
        // n ln n is irrational for n ≥ 2
        Family::Pow2Nlogn => (n == 1).then(BigUint::one),
        Family::Npown => {
            let bits = n.checked_mul(64 - n.leading_zeros() as u64)?;
            (bits <= lim).then(|| BigUint::from(n).pow(n as u32))
        }
        Family::Factorial => {
            let mut acc = BigUint::one();
            for k in 2..=n {
                acc *= k;
                if acc.bits() > lim {
                    return None;
                }
            }
            Some(acc)
        }
        Family::Primorial => {
            // p_n < n (ln n + ln ln n) for n ≥ 6; the product outgrows the
            // limit long before that bound stops being generous
            let bound = (n.max(6) as f64 * ((n.max(6) as f64).ln() * 2.0)) as u64 + 16;
            let primes = small_primes(bound);
            let mut acc = BigUint::one();
            for &p in primes.iter().take(n as usize) {
                acc *= p;
                if acc.bits() > lim {
                    return None;
                }
            }
            (primes.len() as u64 >= n).then_some(acc)
        }
    }
}

fn leading_digit(x: &BigUint, base: u32) -> Digit {
    let s = x.to_str_radix(base);
    let d = s.as_bytes()[0];
    let v = (d as char).to_digit(base).expect("radix digit");
    Digit::new_unchecked(v as u8)
}

//! Word-level arithmetic on big-endian `u64` limb slices.
//!
//! Index 0 is the most significant word. A fraction of `L` limbs denotes
//! `sum(limbs[i] * 2^(-64 * (i + 1)))`.

use std::cmp::Ordering;

#[inline]
pub(crate) fn add(a: &mut [u64], b: &[u64]) -> bool {
    debug_assert_eq!(a.len(), b.len());
    let mut carry = false;
    for (x, &y) in a.iter_mut().zip(b).rev() {
        let (s1, c1) = x.overflowing_add(y);
        let (s2, c2) = s1.overflowing_add(carry as u64);
        *x = s2;
        carry = c1 | c2;
    }
    carry
}

/// Adds a `u128` at the least significant end. Returns the carry out.
#[inline]
pub(crate) fn add_low(a: &mut [u64], v: u128) -> bool {
    let mut carry = v;
    for x in a.iter_mut().rev() {
        if carry == 0 {
            return false;
        }
        let s = *x as u128 + (carry as u64) as u128;
        *x = s as u64;
        carry = (carry >> 64) + (s >> 64);
    }
    carry != 0
}

/// Subtracts a `u128` at the least significant end. Returns the borrow out.
#[inline]
pub(crate) fn sub_low(a: &mut [u64], v: u128) -> bool {
    let mut borrow = v;
    for x in a.iter_mut().rev() {
        if borrow == 0 {
            return false;
        }
        let lo = borrow as u64;
        let (d, b) = x.overflowing_sub(lo);
        *x = d;
        borrow = (borrow >> 64) + b as u128;
    }
    borrow != 0
}

/// In-place multiplication by a word. Returns the word shifted out the top.
#[inline]
pub(crate) fn mul_small(a: &mut [u64], m: u64) -> u64 {
    let mut carry = 0u64;
    for x in a.iter_mut().rev() {
        let p = *x as u128 * m as u128 + carry as u128;
        *x = p as u64;
        carry = (p >> 64) as u64;
    }
    carry
}

/// `(hi·2^64 + lo) / d` and the remainder, for `hi < d`.
#[cfg(target_arch = "x86_64")]
#[inline(always)]
fn div_word(hi: u64, lo: u64, d: u64) -> (u64, u64) {
    debug_assert!(hi < d);
    let q: u64;
    let r: u64;
    // SAFETY: `hi < d` keeps the quotient within 64 bits, so `div` cannot
    // fault; the instruction touches only the named registers.
    unsafe {
        std::arch::asm!(
            "div {d}",
            d = in(reg) d,
            inout("rax") lo => q,
            inout("rdx") hi => r,
            options(pure, nomem, nostack),
        );
    }
    (q, r)
}

#[cfg(not(target_arch = "x86_64"))]
#[inline(always)]
fn div_word(hi: u64, lo: u64, d: u64) -> (u64, u64) {
    let cur = ((hi as u128) << 64) | lo as u128;
    ((cur / d as u128) as u64, (cur % d as u128) as u64)
}

/// In-place floor division by a nonzero word, treating `a` as an integer.
/// Returns the remainder.
#[inline]
pub(crate) fn div_small(a: &mut [u64], d: u64) -> u64 {
    assert!(d != 0, "division by zero");
    let mut rem = 0u64;
    for x in a.iter_mut() {
        if rem == 0 && *x < d {
            // quotient word is zero
            rem = *x;
            *x = 0;
            continue;
        }
        let (q, r) = div_word(rem, *x, d);
        *x = q;
        rem = r;
    }
    rem
}

#[inline]
pub(crate) fn cmp(a: &[u64], b: &[u64]) -> Ordering {
    debug_assert_eq!(a.len(), b.len());
    a.iter().cmp(b.iter())
}

#[inline]
pub(crate) fn is_zero(a: &[u64]) -> bool {
    a.iter().all(|&w| w == 0)
}

/// Truncated product of two fractions of equal length, written to `out`.
///
/// The result is the floor of the exact product at the same precision, so
/// the truncation error is below one unit in the last place.
pub(crate) fn mul_frac(a: &[u64], b: &[u64], out: &mut [u64]) {
    let n = a.len();
    debug_assert_eq!(b.len(), n);
    debug_assert_eq!(out.len(), n);
    // Full 2n-word product, little-endian accumulation.
    let mut full = [0u64; 2 * super::MAX_LIMBS + 2];
    let full = &mut full[..2 * n];
    for i in 0..n {
        let ai = a[n - 1 - i];
        if ai == 0 {
            continue;
        }
        let mut carry = 0u128;
        for j in 0..n {
            let bj = b[n - 1 - j];
            let t = ai as u128 * bj as u128 + full[i + j] as u128 + carry;
            full[i + j] = t as u64;
            carry = t >> 64;
        }
        let mut k = i + n;
        while carry != 0 {
            let t = full[k] as u128 + carry;
            full[k] = t as u64;
            carry = t >> 64;
            k += 1;
        }
    }
    for (i, o) in out.iter_mut().enumerate() {
        *o = full[2 * n - 1 - i];
    }
}

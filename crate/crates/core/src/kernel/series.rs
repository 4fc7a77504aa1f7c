//! Integer-only series for natural logarithms, used to build constants and
//! to anchor incremental logarithm walks.
//!
//! Every routine returns a scaled integer `v ≈ x · 2^bits` together with an
//! upper bound `e` such that `|x · 2^bits − v| ≤ e`.

use num_bigint::BigUint;
use num_traits::{One, Zero};

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Scaled {
    pub value: BigUint,
    pub err: u64,
}

/// `atanh(a / s) · 2^bits` for `0 < 3a ≤ s`.
///
/// The terms `t_j = floor(t_{j-1} · a² / s²)` each lose less than one unit;
/// with ratio at most 1/9 the carried error stays below 9/8, so every
/// series term is off by less than 2.2 units and the discarded tail by less
/// than 2.6.
pub(crate) fn atanh_ratio(a: u128, s: u128, bits: u32) -> Scaled {
    assert!(a > 0 && s >= 3 * a, "atanh argument must lie in (0, 1/3]");
    let a2 = BigUint::from(a) * BigUint::from(a);
    let s2 = BigUint::from(s) * BigUint::from(s);
    let mut t = (BigUint::from(a) << bits) / BigUint::from(s);
    let mut sum = BigUint::zero();
    let mut terms = 0u64;
    let mut j = 0u64;
    while !t.is_zero() {
        sum += &t / BigUint::from(2 * j + 1);
        t = t * &a2 / &s2;
        terms += 1;
        j += 1;
    }
    Scaled {
        value: sum,
        err: 3 * terms + 3,
    }
}

/// `ln 2 · 2^bits` via `2·atanh(1/3)`.
pub(crate) fn ln2(bits: u32) -> Scaled {
    let h = atanh_ratio(1, 3, bits);
    Scaled {
        value: h.value << 1,
        err: 2 * h.err,
    }
}

/// `ln n · 2^bits` for `n ≥ 1`, reducing to `n = 2^k · m`, `m ∈ [1, 2)`,
/// and `ln m = 2·atanh((n − 2^k) / (n + 2^k))`.
pub(crate) fn ln_int(n: u64, bits: u32) -> Scaled {
    assert!(n >= 1);
    let k = 63 - n.leading_zeros() as u64;
    let pow = 1u64 << k;
    let r = n - pow;
    let mut out = Scaled {
        value: BigUint::zero(),
        err: 0,
    };
    if k > 0 {
        let l2 = ln2(bits);
        out.value = l2.value * BigUint::from(k);
        out.err = l2.err * k;
    }
    if r > 0 {
        let h = atanh_ratio(r as u128, n as u128 + pow as u128, bits);
        out.value += h.value << 1;
        out.err += 2 * h.err;
    }
    out
}

/// `x / y · 2^bits` for scaled inputs, with a rigorous error bound.
///
/// Requires `y ≥ 0.69 · 2^bits` (true for `ln n`, `n ≥ 2`) and a quotient
/// below `2^64`.
pub(crate) fn divide(x: &Scaled, y: &Scaled, bits: u32) -> Scaled {
    let q = (&x.value << bits) / &y.value;
    let int_part = (&q >> bits).iter_u64_digits().next().unwrap_or(0);
    // |x/y − X/Y| ≤ (ex + (X/Y)·ey) / y, and 1/y < 3/2 in scaled units.
    let bound = (x.err as u128 + (int_part as u128 + 2) * y.err as u128) * 3 / 2 + 2;
    Scaled {
        value: q,
        err: u64::try_from(bound).expect("error bound overflow"),
    }
}

/// `2^bits / y · 2^bits`, i.e. the reciprocal of a scaled value.
pub(crate) fn reciprocal(y: &Scaled, bits: u32) -> Scaled {
    let one = Scaled {
        value: BigUint::one() << bits,
        err: 0,
    };
    divide(&one, y, bits)
}

/// Returns `Some(j)` when `n == base^j`.
pub(crate) fn exact_log(n: u64, base: u64) -> Option<u64> {
    let mut x = n;
    let mut j = 0;
    while x > 1 {
        if !x.is_multiple_of(base) {
            return None;
        }
        x /= base;
        j += 1;
    }
    Some(j)
}

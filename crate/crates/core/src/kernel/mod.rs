//! Certified fixed-point arithmetic for leading-digit decisions.
//!
//! A leading digit of `a` in base `b` is fixed by `{log_b a}`: the digit is
//! `d` iff `log_b d ≤ {log_b a} < log_b (d + 1)`. Values here carry an
//! explicit absolute error bound in units of the last place (ulps), and a
//! digit is only reported when the whole error interval sits inside one
//! digit cell. Everything is integer arithmetic; no hardware floats are used
//! on the decision path.

mod limbs;
mod series;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

/// Working precision used unless a caller asks for more.
pub const DEFAULT_LIMBS: usize = 3;
/// Smallest supported working precision.
pub const MIN_LIMBS: usize = 3;
/// Escalation ceiling; ambiguity at this precision is a hard error.
pub const MAX_LIMBS: usize = 32;
/// Largest supported digit base (digits must fit in a nibble).
pub const MAX_BASE: u32 = 16;

const GUARD_BITS: u32 = 64;

pub(crate) type Words = SmallVec<[u64; 4]>;

/// Zeroed working words; on the stack at the default precision.
enum Scratch {
    Small([u64; 16], usize),
    Large(Vec<u64>),
}

impl Scratch {
    #[inline]
    fn new(len: usize) -> Scratch {
        if len <= 16 {
            Scratch::Small([0; 16], len)
        } else {
            Scratch::Large(vec![0; len])
        }
    }

    #[inline]
    fn as_mut(&mut self) -> &mut [u64] {
        match self {
            Scratch::Small(a, len) => &mut a[..*len],
            Scratch::Large(v) => v,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KernelError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("multiplier {m} exceeds 2^{limit_bits} at {limbs} limbs; raise precision first")]
    OutOfRange {
        m: u64,
        limit_bits: u32,
        limbs: usize,
    },
    #[error("integer part overflowed 64 bits")]
    Overflow,
    #[error("digit still ambiguous at {limbs} limbs (suspected exact boundary hit)")]
    AmbiguousDigit { limbs: usize },
}

pub type Result<T> = std::result::Result<T, KernelError>;

fn check_limbs(limbs: usize) -> Result<()> {
    if (MIN_LIMBS..=MAX_LIMBS).contains(&limbs) {
        Ok(())
    } else {
        Err(KernelError::InvalidArgument(format!(
            "precision must be {MIN_LIMBS}..={MAX_LIMBS} limbs, got {limbs}"
        )))
    }
}

fn check_base(base: u32) -> Result<()> {
    if (2..=MAX_BASE).contains(&base) {
        Ok(())
    } else {
        Err(KernelError::InvalidArgument(format!(
            "base must be 2..={MAX_BASE}, got {base}"
        )))
    }
}

/// A value in `[0, 1)` stored in `64 · limbs` bits, with an absolute error
/// bound of `err_ulps · 2^(-64 · limbs)`.
///
/// `err_ulps == 0` marks an exact value.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CertifiedFraction {
    words: Words,
    err_ulps: u128,
}

impl CertifiedFraction {
    /// Exact zero at the given precision.
    pub fn zero(limbs: usize) -> Self {
        CertifiedFraction {
            words: SmallVec::from_elem(0, limbs),
            err_ulps: 0,
        }
    }

    pub fn from_words(words: &[u64], err_ulps: u128) -> Result<Self> {
        check_limbs(words.len())?;
        Ok(CertifiedFraction {
            words: SmallVec::from_slice(words),
            err_ulps,
        })
    }

    pub fn limbs(&self) -> usize {
        self.words.len()
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn err_ulps(&self) -> u128 {
        self.err_ulps
    }

    pub fn is_exact(&self) -> bool {
        self.err_ulps == 0
    }

    /// Smallest `e` with `err ≤ 2^e`, or `None` for exact values.
    pub fn err_log2(&self) -> Option<i64> {
        if self.err_ulps == 0 {
            return None;
        }
        let ceil_log = 128 - (self.err_ulps - 1).leading_zeros() as i64;
        Some(ceil_log - 64 * self.limbs() as i64)
    }

    /// Nearest double, for display only.
    pub fn to_f64(&self) -> f64 {
        let mut x = 0.0;
        for (i, &w) in self.words.iter().enumerate().take(2) {
            x += w as f64 * 2f64.powi(-64 * (i as i32 + 1));
        }
        x
    }

    /// `{self + other}` with summed error bounds.
    pub fn add(&self, other: &CertifiedFraction) -> CertifiedFraction {
        assert_eq!(self.limbs(), other.limbs(), "precision mismatch");
        let mut out = self.clone();
        out.add_assign(other);
        out
    }

    pub(crate) fn add_assign(&mut self, other: &CertifiedFraction) {
        limbs::add(&mut self.words, &other.words);
        self.err_ulps += other.err_ulps;
    }

    #[cfg(test)]
    pub(crate) fn with_extra_err(mut self, ulps: u128) -> Self {
        self.err_ulps += ulps;
        self
    }
}

impl fmt::Display for CertifiedFraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.err_log2() {
            Some(e) => write!(f, "{:.15} ± 2^{}", self.to_f64(), e),
            None => write!(f, "{:.15} (exact)", self.to_f64()),
        }
    }
}

/// A non-negative real `int + frac` with the fraction's error bound.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CertifiedReal {
    pub int: u64,
    pub frac: CertifiedFraction,
}

impl CertifiedReal {
    pub fn zero(limbs: usize) -> Self {
        CertifiedReal {
            int: 0,
            frac: CertifiedFraction::zero(limbs),
        }
    }

    pub fn exact_int(n: u64, limbs: usize) -> Self {
        CertifiedReal {
            int: n,
            frac: CertifiedFraction::zero(limbs),
        }
    }

    pub fn limbs(&self) -> usize {
        self.frac.limbs()
    }

    pub fn err_ulps(&self) -> u128 {
        self.frac.err_ulps
    }

    pub fn is_exact(&self) -> bool {
        self.frac.is_exact()
    }

    pub fn fraction(&self) -> &CertifiedFraction {
        &self.frac
    }

    pub fn to_f64(&self) -> f64 {
        self.int as f64 + self.frac.to_f64()
    }

    pub fn add_assign(&mut self, other: &CertifiedReal) -> Result<()> {
        assert_eq!(self.limbs(), other.limbs(), "precision mismatch");
        let carry = limbs::add(&mut self.frac.words, &other.frac.words) as u64;
        self.int = self
            .int
            .checked_add(other.int)
            .and_then(|v| v.checked_add(carry))
            .ok_or(KernelError::Overflow)?;
        self.frac.err_ulps += other.frac.err_ulps;
        Ok(())
    }

    /// Exact multiplication by an integer; the error scales by `m`.
    pub fn mul_int(&self, m: u64) -> Result<CertifiedReal> {
        let mut words = self.frac.words.clone();
        let carry = limbs::mul_small(&mut words, m);
        let int = (self.int as u128) * (m as u128) + carry as u128;
        let int = u64::try_from(int).map_err(|_| KernelError::Overflow)?;
        Ok(CertifiedReal {
            int,
            frac: CertifiedFraction {
                words,
                err_ulps: self.frac.err_ulps * m as u128,
            },
        })
    }

    /// Truncated product. With `|x| ≤ I₁ + 1` and `|y| ≤ I₂ + 1` the error is
    /// at most `(I₁ + 1)·e₂ + (I₂ + 1)·e₁ + 1` ulps.
    pub fn mul(&self, other: &CertifiedReal) -> Result<CertifiedReal> {
        assert_eq!(self.limbs(), other.limbs(), "precision mismatch");
        let n = self.limbs();
        if self.is_exact_zero() || other.is_exact_zero() {
            return Ok(CertifiedReal::zero(n));
        }
        // (I1 + F1)(I2 + F2) = I1·I2 + I1·F2 + I2·F1 + F1·F2
        let mut int = (self.int as u128) * (other.int as u128);
        let mut frac: Words = SmallVec::from_elem(0, n);
        limbs::mul_frac(&self.frac.words, &other.frac.words, &mut frac);
        let mut part = other.frac.words.clone();
        int += limbs::mul_small(&mut part, self.int) as u128;
        int += limbs::add(&mut frac, &part) as u128;
        let mut part = self.frac.words.clone();
        int += limbs::mul_small(&mut part, other.int) as u128;
        int += limbs::add(&mut frac, &part) as u128;
        let err = (self.int as u128 + 1) * other.frac.err_ulps
            + (other.int as u128 + 1) * self.frac.err_ulps
            + 1;
        Ok(CertifiedReal {
            int: u64::try_from(int).map_err(|_| KernelError::Overflow)?,
            frac: CertifiedFraction {
                words: frac,
                err_ulps: err,
            },
        })
    }

    fn is_exact_zero(&self) -> bool {
        self.int == 0 && self.is_exact() && limbs::is_zero(&self.frac.words)
    }

    fn from_scaled(s: &series::Scaled, limbs: usize) -> Result<CertifiedReal> {
        let shifted = &s.value >> GUARD_BITS;
        let digits: Vec<u64> = shifted.iter_u64_digits().collect();
        if digits.len() > limbs + 1 {
            return Err(KernelError::Overflow);
        }
        let mut words: Words = SmallVec::from_elem(0, limbs);
        for (i, &d) in digits.iter().enumerate().take(limbs) {
            words[limbs - 1 - i] = d;
        }
        let int = digits.get(limbs).copied().unwrap_or(0);
        let exact_tail = s
            .value
            .trailing_zeros()
            .is_none_or(|tz| tz >= GUARD_BITS as u64);
        let err = if s.err == 0 && exact_tail {
            0
        } else {
            // ceil(err / 2^64) + 1 for the final truncation
            (s.err as u128).div_ceil(1u128 << GUARD_BITS) + 1
        };
        Ok(CertifiedReal {
            int,
            frac: CertifiedFraction {
                words,
                err_ulps: err,
            },
        })
    }
}

impl fmt::Display for CertifiedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + {}", self.int, self.frac)
    }
}

/// Named constants available from [`certified_constant`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constant {
    Log10Two,
    LnTen,
    LnTwo,
}

impl FromStr for Constant {
    type Err = KernelError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log10_2" => Ok(Constant::Log10Two),
            "ln_10" => Ok(Constant::LnTen),
            "ln_2" => Ok(Constant::LnTwo),
            other => Err(KernelError::InvalidArgument(format!(
                "unsupported constant {other:?}"
            ))),
        }
    }
}

fn bits_for(limbs: usize) -> u32 {
    64 * limbs as u32 + GUARD_BITS
}

/// The named constant at `limbs` of precision, error ≤ 2^−(64·limbs−8).
pub fn certified_constant(c: Constant, limbs: usize) -> Result<CertifiedReal> {
    check_limbs(limbs)?;
    match c {
        Constant::Log10Two => log_of_int(2, 10, limbs),
        Constant::LnTen => ln_of_int(10, limbs),
        Constant::LnTwo => CertifiedReal::from_scaled(&series::ln2(bits_for(limbs)), limbs),
    }
}

/// Natural logarithm of a positive integer.
pub fn ln_of_int(n: u64, limbs: usize) -> Result<CertifiedReal> {
    check_limbs(limbs)?;
    if n == 0 {
        return Err(KernelError::InvalidArgument("ln of zero".into()));
    }
    if n == 1 {
        return Ok(CertifiedReal::zero(limbs));
    }
    CertifiedReal::from_scaled(&series::ln_int(n, bits_for(limbs)), limbs)
}

/// `log_base n`, exact when `n` is a power of `base`.
pub fn log_of_int(n: u64, base: u32, limbs: usize) -> Result<CertifiedReal> {
    check_limbs(limbs)?;
    check_base(base)?;
    if n == 0 {
        return Err(KernelError::InvalidArgument("log of zero".into()));
    }
    if let Some(j) = series::exact_log(n, base as u64) {
        return Ok(CertifiedReal::exact_int(j, limbs));
    }
    let bits = bits_for(limbs);
    let x = series::ln_int(n, bits);
    let y = series::ln_int(base as u64, bits);
    CertifiedReal::from_scaled(&series::divide(&x, &y, bits), limbs)
}

/// `Some(j)` when `n = base^j`.
pub fn integer_log(n: u64, base: u32) -> Option<u64> {
    if n == 0 || base < 2 {
        return None;
    }
    series::exact_log(n, base as u64)
}

/// `log₁₀ n` for `n ≥ 2`, as integer part plus certified fraction.
pub fn frac_log10_int(n: u64, limbs: usize) -> Result<CertifiedReal> {
    if n < 2 {
        return Err(KernelError::InvalidArgument(format!(
            "log10 requires n >= 2, got {n}"
        )));
    }
    log_of_int(n, 10, limbs)
}

/// `1 / ln base`, the factor turning natural logarithms into base-`base` ones.
pub fn inverse_ln_base(base: u32, limbs: usize) -> Result<CertifiedReal> {
    check_limbs(limbs)?;
    check_base(base)?;
    let bits = bits_for(limbs);
    let y = series::ln_int(base as u64, bits);
    CertifiedReal::from_scaled(&series::reciprocal(&y, bits), limbs)
}

/// Largest multiplier accepted by [`frac_mul_int`] at a given precision.
pub fn mul_limit_bits(limbs: usize) -> u32 {
    (16 * limbs as u32).min(64)
}

/// `{m · alpha}`. Exact integer arithmetic; the error scales by `m`.
pub fn frac_mul_int(alpha: &CertifiedFraction, m: u64) -> Result<CertifiedFraction> {
    let limit_bits = mul_limit_bits(alpha.limbs());
    if m == 0 {
        return Err(KernelError::InvalidArgument(
            "multiplier must be >= 1".into(),
        ));
    }
    if limit_bits < 64 && m > (1u64 << limit_bits) {
        return Err(KernelError::OutOfRange {
            m,
            limit_bits,
            limbs: alpha.limbs(),
        });
    }
    let mut words = alpha.words.clone();
    limbs::mul_small(&mut words, m);
    Ok(CertifiedFraction {
        words,
        err_ulps: alpha.err_ulps * m as u128,
    })
}

/// `ln((x + gap) / x) = 2·atanh(gap / (2x + gap))`, for `1 ≤ gap ≤ x < 2^62`.
///
/// Word-level series: no heap allocation, suitable for per-term walks.
pub fn ln_ratio_step(gap: u64, x: u64, limbs: usize) -> Result<CertifiedFraction> {
    if gap == 0 || gap > x || x >= 1 << 62 {
        return Err(KernelError::InvalidArgument(format!(
            "ln step needs 1 <= gap <= x < 2^62, got gap={gap}, x={x}"
        )));
    }
    let s = 2 * x + gap;
    let n = limbs + 1;
    // The default precision gets fixed-size arrays so the word loops unroll.
    let (sum, j) = if n == DEFAULT_LIMBS + 1 {
        let mut t = [0u64; DEFAULT_LIMBS + 1];
        let mut sum = [0u64; DEFAULT_LIMBS + 1];
        let mut term = [0u64; DEFAULT_LIMBS + 1];
        let j = atanh_words(gap, s, &mut t, &mut sum, &mut term);
        (SmallVec::from_slice(&sum[1..]), j)
    } else {
        let mut buf = Scratch::new(3 * n);
        let (t, rest) = buf.as_mut().split_at_mut(n);
        let (sum, term) = rest.split_at_mut(n);
        let j = atanh_words(gap, s, t, sum, term);
        (SmallVec::from_slice(&sum[1..]), j)
    };
    Ok(CertifiedFraction {
        words: sum,
        err_ulps: 2 * (3 * j as u128 + 3),
    })
}

/// `2·atanh(gap / s)` into `sum` (integer word first); returns the number
/// of series terms used.
#[inline(always)]
fn atanh_words(gap: u64, s: u64, t: &mut [u64], sum: &mut [u64], term: &mut [u64]) -> u64 {
    t[0] = gap;
    limbs::div_small(t, s);
    let s_sq = if gap == 1 { s.checked_mul(s) } else { None };
    let mut j = 0u64;
    while !limbs::is_zero(t) {
        term.copy_from_slice(t);
        if j > 0 {
            limbs::div_small(term, 2 * j + 1);
        }
        limbs::add(sum, term);
        match s_sq {
            Some(sq) => {
                limbs::div_small(t, sq);
            }
            None => {
                if gap > 1 {
                    limbs::mul_small(t, gap);
                }
                limbs::div_small(t, s);
                if gap > 1 {
                    limbs::mul_small(t, gap);
                }
                limbs::div_small(t, s);
            }
        }
        j += 1;
    }
    // ln((x + gap)/x) ≤ ln 2 < 1, so the integer word stays zero.
    limbs::mul_small(sum, 2);
    debug_assert_eq!(sum[0], 0);
    j
}

/// A leading digit in `1..base`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Digit(u8);

impl Digit {
    pub fn new(d: u32, base: u32) -> Result<Digit> {
        if d >= 1 && d < base && base <= MAX_BASE {
            Ok(Digit(d as u8))
        } else {
            Err(KernelError::InvalidArgument(format!(
                "digit {d} out of range for base {base}"
            )))
        }
    }

    pub(crate) const fn new_unchecked(d: u8) -> Digit {
        Digit(d)
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

impl fmt::Display for Digit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Outcome of a digit decision.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decision {
    Digit(Digit),
    /// The error interval touches a digit boundary; retry at higher precision.
    NeedsEscalation,
}

/// Certified `log_base d` for `d = 1..=base` at one working precision.
#[derive(Clone, Debug)]
pub struct DigitBoundaries {
    base: u32,
    limbs: usize,
    bounds: Vec<CertifiedReal>,
    // (limbs + 1)-word edges: value + err (lower cell edge) and value − err
    // (upper cell edge), index d − 1.
    lower_edge: Vec<Words>,
    upper_edge: Vec<Words>,
    // Leading two words of each edge (integer word, first fraction word).
    lower_top: Vec<u128>,
    upper_top: Vec<u128>,
}

impl DigitBoundaries {
    pub fn new(base: u32, limbs: usize) -> Result<DigitBoundaries> {
        check_base(base)?;
        check_limbs(limbs)?;
        let mut bounds = Vec::with_capacity(base as usize);
        for d in 1..=base {
            bounds.push(log_of_int(d as u64, base, limbs)?);
        }
        let edge = |b: &CertifiedReal, sign: i8| -> Words {
            let mut w: Words = SmallVec::with_capacity(limbs + 1);
            w.push(b.int);
            w.extend_from_slice(b.frac.words());
            let e = b.frac.err_ulps;
            if sign > 0 {
                limbs::add_low(&mut w, e);
            } else {
                limbs::sub_low(&mut w, e);
            }
            w
        };
        let lower_edge: Vec<Words> = bounds.iter().map(|b| edge(b, 1)).collect();
        let upper_edge: Vec<Words> = bounds.iter().map(|b| edge(b, -1)).collect();
        let top = |w: &Words| ((w[0] as u128) << 64) | w[1] as u128;
        Ok(DigitBoundaries {
            base,
            limbs,
            bounds,
            lower_top: lower_edge.iter().map(top).collect(),
            upper_top: upper_edge.iter().map(top).collect(),
            lower_edge,
            upper_edge,
        })
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    pub fn limbs(&self) -> usize {
        self.limbs
    }

    /// `log_base d` for `d` in `1..=base`.
    pub fn bound(&self, d: u32) -> &CertifiedReal {
        &self.bounds[d as usize - 1]
    }
}

/// Decides the digit cell containing the whole interval `[v − e, v + e]`.
///
/// Lower cell edges are inclusive and upper edges exclusive. Intervals that
/// wrap around 0 (mod 1) or touch a boundary's own error band yield
/// [`Decision::NeedsEscalation`].
pub fn decide_digit(frac: &CertifiedFraction, bounds: &DigitBoundaries) -> Decision {
    assert_eq!(frac.limbs(), bounds.limbs, "precision mismatch");
    // Shortcut on the leading word. At ≥ 3 limbs the error is below 2^-64,
    // so the value lies within one top-word unit of `w`; two units of
    // clearance from both edges settle the cell.
    let w = frac.words[0] as u128;
    let mut d = 1usize;
    while d + 1 < bounds.base as usize && bounds.lower_top[d] <= w {
        d += 1;
    }
    if w >= bounds.lower_top[d - 1] + 2 && w + 2 <= bounds.upper_top[d] {
        return Decision::Digit(Digit(d as u8));
    }
    decide_full(frac, bounds)
}

/// Decision by full-width interval comparison.
fn decide_full(frac: &CertifiedFraction, bounds: &DigitBoundaries) -> Decision {
    let n = bounds.limbs + 1;
    let mut buf = Scratch::new(2 * n);
    let (lo, hi) = buf.as_mut().split_at_mut(n);
    lo[1..].copy_from_slice(&frac.words);
    hi.copy_from_slice(lo);
    if frac.err_ulps > 0 {
        if limbs::sub_low(lo, frac.err_ulps) {
            return Decision::NeedsEscalation;
        }
        limbs::add_low(hi, frac.err_ulps);
        if hi[0] != 0 {
            return Decision::NeedsEscalation;
        }
    }
    // Candidate cell: the last lower edge at or below the point value.
    let top = frac.words[0];
    let mut d = 1usize;
    for k in 2..bounds.base as usize {
        let b = &bounds.bounds[k - 1];
        if b.frac.words[0] < top
            || (b.frac.words[0] == top
                && limbs::cmp(&b.frac.words, &frac.words) != Ordering::Greater)
        {
            d = k;
        } else {
            break;
        }
    }
    let lower_ok = limbs::cmp(lo, &bounds.lower_edge[d - 1]) != Ordering::Less;
    let upper_ok = limbs::cmp(hi, &bounds.upper_edge[d]) == Ordering::Less;
    if lower_ok && upper_ok {
        Decision::Digit(Digit(d as u8))
    } else {
        Decision::NeedsEscalation
    }
}

/// The next precision in the escalation ladder, or `None` past the cap.
pub fn escalate(limbs: usize) -> Option<usize> {
    if limbs >= MAX_LIMBS {
        None
    } else {
        Some((limbs * 2).min(MAX_LIMBS))
    }
}

#[cfg(test)]
mod tests;

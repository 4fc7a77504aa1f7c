//! Leading-digit streams for Mersenne numbers, their random analogs and
//! smooth control sequences.

mod exact;
mod generator;
pub mod random;
pub mod sieve;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{self, CertifiedFraction, CertifiedReal, Digit, KernelError};

pub use generator::{DigitGenerator, GeneratorCheckpoint, GeneratorState};
pub use random::{RandomCursor, RandomPrimeStream};
pub use sieve::{prime_stream, PrimeCursor, PrimeStream};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SourceError {
    #[error("invalid sequence: {0}")]
    InvalidSequence(String),
    #[error("leading digit of term {index} still ambiguous at {limbs} limbs")]
    Ambiguous { index: u64, limbs: usize },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

pub type Result<T> = std::result::Result<T, SourceError>;

/// The eight sequence families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// `2^p_n − 1`
    Mersenne,
    /// `2^p*_n − 1` over Cramér random primes
    RandomMersenne,
    /// `2^n`
    Pow2,
    /// `2^(n²)`
    Pow2Nsq,
    /// `2^(n ln n)`, natural logarithm
    Pow2Nlogn,
    /// `n^n`
    Npown,
    /// `n!`
    Factorial,
    /// `p_1 · p_2 ⋯ p_n`
    Primorial,
}

impl Family {
    pub const ALL: [Family; 8] = [
        Family::Mersenne,
        Family::RandomMersenne,
        Family::Pow2,
        Family::Pow2Nsq,
        Family::Pow2Nlogn,
        Family::Npown,
        Family::Factorial,
        Family::Primorial,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Mersenne => "mersenne",
            Family::RandomMersenne => "random-mersenne",
            Family::Pow2 => "pow2",
            Family::Pow2Nsq => "pow2-nsq",
            Family::Pow2Nlogn => "pow2-nlogn",
            Family::Npown => "npown",
            Family::Factorial => "factorial",
            Family::Primorial => "primorial",
        }
    }

    /// Stable one-byte tag used in file headers.
    pub fn tag(self) -> u8 {
        Family::ALL.iter().position(|&f| f == self).unwrap() as u8 + 1
    }

    pub fn from_tag(tag: u8) -> Option<Family> {
        Family::ALL.get((tag as usize).checked_sub(1)?).copied()
    }

    /// Terms are `2^e − 1` for a prime-like exponent `e`.
    pub fn is_prime_based(self) -> bool {
        matches!(self, Family::Mersenne | Family::RandomMersenne)
    }

    /// Terms carry a running sum of logarithms.
    pub fn is_accumulating(self) -> bool {
        matches!(self, Family::Factorial | Family::Primorial)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = SourceError;

    fn from_str(s: &str) -> Result<Family> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        Family::ALL
            .into_iter()
            .find(|f| f.name() == norm)
            .ok_or_else(|| SourceError::InvalidSequence(format!("unknown sequence '{s}'")))
    }
}

/// A sequence family with its parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SequenceKind {
    family: Family,
    seed: Option<u64>,
    base: u32,
}

/// Bases accepted for generation.
///
/// Powers of two make every power-of-two family degenerate and other perfect
/// powers (4, 8, 9, 16) put infinitely many terms exactly on digit
/// boundaries, so both are rejected.
pub fn is_supported_base(base: u32) -> bool {
    (3..=kernel::MAX_BASE).contains(&base) && !is_perfect_power(base)
}

fn is_perfect_power(b: u32) -> bool {
    (2..b).any(|r| {
        let mut x = r * r;
        while x < b {
            x *= r;
        }
        x == b
    })
}

impl SequenceKind {
    pub fn new(family: Family, seed: Option<u64>, base: u32) -> Result<SequenceKind> {
        match (family, seed) {
            (Family::RandomMersenne, None) => {
                return Err(SourceError::InvalidSequence(
                    "random-mersenne needs a seed".into(),
                ))
            }
            (f, Some(_)) if f != Family::RandomMersenne => {
                return Err(SourceError::InvalidSequence(format!(
                    "a seed only applies to random-mersenne, not {f}"
                )))
            }
            _ => {}
        }
        if !is_supported_base(base) {
            return Err(SourceError::InvalidSequence(format!(
                "base {base} is unsupported (need 3..=16, not a perfect power)"
            )));
        }
        Ok(SequenceKind { family, seed, base })
    }

    /// A deterministic family in base 10.
    pub fn decimal(family: Family) -> Result<SequenceKind> {
        SequenceKind::new(family, None, 10)
    }

    pub fn random_mersenne(seed: u64) -> SequenceKind {
        SequenceKind {
            family: Family::RandomMersenne,
            seed: Some(seed),
            base: 10,
        }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn base(&self) -> u32 {
        self.base
    }
}

impl fmt::Display for SequenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.family)?;
        if let Some(s) = self.seed {
            write!(f, "(seed={s})")?;
        }
        if self.base != 10 {
            write!(f, "[base {}]", self.base)?;
        }
        Ok(())
    }
}

/// Leading digit of `2^p − 1` given the leading digit of `2^p`.
///
/// They differ only when `2^p = (d+1)·b^k`; since a supported base has an
/// odd prime factor this forces `k = 0`, i.e. `2^p ≤ b`, and then `2^p − 1`
/// is itself the digit. In base 10: `p = 2 → 3`, `p = 3 → 7`.
pub fn mersenne_adjust(digit_of_power: Digit, p: u64, base: u32) -> Digit {
    if p < 32 && (1u64 << p) <= base as u64 {
        Digit::new_unchecked(((1u64 << p) - 1) as u8)
    } else {
        digit_of_power
    }
}

/// `log_base a_n` from scratch at the given precision.
///
/// `source_value` is the exponent `p_n` (or `p*_n`) for prime-based kinds;
/// when absent it is regenerated. Accumulating kinds sum `n` logarithms, so
/// this is linear in `n`; streams use [`DigitGenerator`] instead.
pub fn log_value(
    kind: &SequenceKind,
    n: u64,
    source_value: Option<u64>,
    limbs: usize,
) -> Result<CertifiedReal> {
    if n == 0 {
        return Err(SourceError::InvalidSequence(
            "terms are indexed from 1".into(),
        ));
    }
    let base = kind.base;
    let log2 = || kernel::log_of_int(2, base, limbs);
    let v = match kind.family {
        Family::Mersenne | Family::RandomMersenne => {
            let p = match source_value {
                Some(p) => p,
                None => nth_exponent(kind, n),
            };
            log2()?.mul_int(p)?
        }
        Family::Pow2 => log2()?.mul_int(n)?,
        Family::Pow2Nsq => log2()?.mul_int(n)?.mul_int(n)?,
        Family::Pow2Nlogn => kernel::ln_of_int(n, limbs)?.mul_int(n)?.mul(&log2()?)?,
        Family::Npown => kernel::log_of_int(n, base, limbs)?.mul_int(n)?,
        Family::Factorial => {
            let ln = generator::sum_ln_range(1, n + 1, limbs)?;
            ln.mul(&kernel::inverse_ln_base(base, limbs)?)?
        }
        Family::Primorial => {
            let primes: Vec<u64> = prime_stream(n).collect();
            let ln = generator::sum_ln_primes(&primes, limbs)?;
            ln.mul(&kernel::inverse_ln_base(base, limbs)?)?
        }
    };
    Ok(v)
}

/// `{log_base a_n}`; for prime-based kinds the fraction belongs to `2^p`,
/// before the `−1` adjustment.
pub fn log_magnitude(
    kind: &SequenceKind,
    n: u64,
    source_value: Option<u64>,
    limbs: usize,
) -> Result<CertifiedFraction> {
    Ok(log_value(kind, n, source_value, limbs)?.frac)
}

fn nth_exponent(kind: &SequenceKind, n: u64) -> u64 {
    match kind.family {
        Family::RandomMersenne => RandomPrimeStream::new(kind.seed.unwrap_or(0))
            .nth(n as usize - 1)
            .unwrap(),
        _ => PrimeStream::new().nth(n as usize - 1).unwrap(),
    }
}

/// Parameters a stream was generated with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamMeta {
    pub kind: SequenceKind,
    pub count: u64,
    pub limbs: usize,
}

/// Leading digits of terms `1..=count`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DigitStream {
    pub meta: StreamMeta,
    pub digits: Vec<Digit>,
}

impl DigitStream {
    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }

    pub fn values(&self) -> impl Iterator<Item = u8> + '_ {
        self.digits.iter().map(|d| d.get())
    }
}

/// The first `count` leading digits of `kind` at the given starting
/// precision.
pub fn digit_stream(kind: SequenceKind, count: u64, limbs: usize) -> Result<DigitStream> {
    let mut g = DigitGenerator::new(kind, limbs)?;
    let mut digits = Vec::with_capacity(count as usize);
    g.fill(&mut digits, count)?;
    Ok(DigitStream {
        meta: StreamMeta { kind, count, limbs },
        digits,
    })
}

/// The leading digit of a single term, computed from scratch.
pub fn digit_at(kind: &SequenceKind, n: u64, limbs: usize) -> Result<Digit> {
    let p = kind.family.is_prime_based().then(|| nth_exponent(kind, n));
    generator::resolve_term(kind, n, p, limbs)
}

#[cfg(test)]
mod tests;

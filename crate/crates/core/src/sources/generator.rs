//! Block-wise digit generation with escalation and resumable state.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::exact::small_term_digit;
use super::random::{RandomCursor, RandomPrimeStream};
use super::sieve::{PrimeCursor, PrimeStream};
use super::{log_magnitude, mersenne_adjust, Family, Result, SequenceKind, SourceError};
use crate::kernel::{
    self, decide_digit, escalate, CertifiedFraction, CertifiedReal, Decision, Digit,
    DigitBoundaries, KernelError,
};

/// Terms per parallel work unit; logarithm walks are re-anchored at every
/// shard start.
const SHARD: u64 = 1 << 16;
/// Terms pulled from the sources per round.
const BLOCK: u64 = 1 << 22;

pub(crate) struct Context {
    limbs: usize,
    bounds: DigitBoundaries,
    /// `log_base 2`
    log2: CertifiedReal,
    inv_ln_base: CertifiedReal,
}

type ContextCache = Mutex<HashMap<(u32, usize), Arc<Context>>>;

pub(crate) fn context(base: u32, limbs: usize) -> Result<Arc<Context>> {
    static CACHE: OnceLock<ContextCache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(c) = cache.lock().unwrap().get(&(base, limbs)) {
        return Ok(c.clone());
    }
    let ctx = Arc::new(Context {
        limbs,
        bounds: DigitBoundaries::new(base, limbs)?,
        log2: kernel::log_of_int(2, base, limbs)?,
        inv_ln_base: kernel::inverse_ln_base(base, limbs)?,
    });
    cache.lock().unwrap().insert((base, limbs), ctx.clone());
    Ok(ctx)
}

/// Natural logarithm of a moving integer, advanced by small ratios.
struct LnWalker {
    x: u64,
    ln: CertifiedReal,
    limbs: usize,
}

impl LnWalker {
    fn at(x: u64, limbs: usize) -> Result<LnWalker> {
        Ok(LnWalker {
            x,
            ln: kernel::ln_of_int(x, limbs)?,
            limbs,
        })
    }

    fn advance_to(&mut self, y: u64) -> Result<()> {
        let gap = y - self.x;
        if gap == 0 {
            return Ok(());
        }
        if gap <= self.x && y < 1 << 62 {
            let step = kernel::ln_ratio_step(gap, self.x, self.limbs)?;
            self.ln.add_assign(&CertifiedReal { int: 0, frac: step })?;
        } else {
            self.ln = kernel::ln_of_int(y, self.limbs)?;
        }
        self.x = y;
        Ok(())
    }
}

/// `Σ ln k` for `a ≤ k < b`, `a ≥ 1`.
pub(crate) fn sum_ln_range(a: u64, b: u64, limbs: usize) -> Result<CertifiedReal> {
    let mut sum = CertifiedReal::zero(limbs);
    let mut start = a;
    while start < b {
        let end = b.min(start + SHARD);
        let mut w = LnWalker::at(start, limbs)?;
        for k in start..end {
            w.advance_to(k)?;
            sum.add_assign(&w.ln)?;
        }
        start = end;
    }
    Ok(sum)
}

/// `Σ ln p` over `primes`, re-anchoring every shard.
pub(crate) fn sum_ln_primes(primes: &[u64], limbs: usize) -> Result<CertifiedReal> {
    let mut sum = CertifiedReal::zero(limbs);
    for chunk in primes.chunks(SHARD as usize) {
        let mut w = LnWalker::at(chunk[0], limbs)?;
        for &p in chunk {
            w.advance_to(p)?;
            sum.add_assign(&w.ln)?;
        }
    }
    Ok(sum)
}

fn map_kernel<T>(r: kernel::Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(KernelError::OutOfRange { .. }) | Err(KernelError::Overflow) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// Digit for term `n` from a fast-path fraction, escalating if needed.
/// `exponent` is `p` for prime-based kinds; the `−1` adjustment is applied.
fn finish(
    kind: &SequenceKind,
    n: u64,
    exponent: Option<u64>,
    ctx: &Context,
    frac: kernel::Result<CertifiedFraction>,
) -> Result<Digit> {
    let quick = match map_kernel(frac)? {
        Some(f) => match decide_digit(&f, &ctx.bounds) {
            Decision::Digit(d) => Some(d),
            Decision::NeedsEscalation => None,
        },
        None => None,
    };
    let d = match quick {
        Some(d) => d,
        None => resolve_slow(kind, n, exponent, ctx.limbs)?,
    };
    Ok(adjust(kind, exponent, d))
}

fn adjust(kind: &SequenceKind, exponent: Option<u64>, d: Digit) -> Digit {
    match exponent {
        Some(p) if kind.family().is_prime_based() => mersenne_adjust(d, p, kind.base()),
        _ => d,
    }
}

/// Exact small-term evaluation, then the precision ladder.
fn resolve_slow(kind: &SequenceKind, n: u64, exponent: Option<u64>, limbs: usize) -> Result<Digit> {
    if let Some(d) = small_term_digit(kind.family(), n, exponent, kind.base()) {
        return Ok(d);
    }
    let mut l = limbs;
    while let Some(next) = escalate(l) {
        l = next;
        let bounds = &context(kind.base(), l)?.bounds;
        let Some(frac) = map_kernel(log_magnitude(kind, n, exponent, l).map_err(|e| match e {
            SourceError::Kernel(k) => k,
            other => KernelError::InvalidArgument(other.to_string()),
        }))?
        else {
            continue;
        };
        if let Decision::Digit(d) = decide_digit(&frac, bounds) {
            return Ok(d);
        }
    }
    Err(SourceError::Ambiguous { index: n, limbs: l })
}

/// Digit of term `n` computed from scratch at `limbs`.
pub(crate) fn resolve_term(
    kind: &SequenceKind,
    n: u64,
    exponent: Option<u64>,
    limbs: usize,
) -> Result<Digit> {
    let ctx = context(kind.base(), limbs)?;
    let frac = log_magnitude(kind, n, exponent, limbs);
    let frac = match frac {
        Ok(f) => Ok(f),
        Err(SourceError::Kernel(k)) => Err(k),
        Err(e) => return Err(e),
    };
    finish(kind, n, exponent, &ctx, frac)
}

/// Source state between blocks, as stored in resume files.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorState {
    /// Term depends on its index only.
    Indexed,
    Primes {
        cursor: PrimeCursor,
    },
    Random {
        cursor: RandomCursor,
    },
    /// `Σ ln k` over the terms produced so far.
    Factorial {
        sum: CertifiedReal,
    },
    Primorial {
        cursor: PrimeCursor,
        sum: CertifiedReal,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorCheckpoint {
    pub kind: SequenceKind,
    pub limbs: usize,
    /// Terms already produced.
    pub position: u64,
    pub state: GeneratorState,
}

enum Source {
    Indexed,
    Primes(PrimeStream),
    Random(RandomPrimeStream),
    Factorial {
        sum: CertifiedReal,
    },
    Primorial {
        primes: PrimeStream,
        sum: CertifiedReal,
    },
}

/// Produces leading digits of terms `1, 2, …` in order.
///
/// After an error the generator's position is unspecified and it should be
/// dropped.
pub struct DigitGenerator {
    kind: SequenceKind,
    ctx: Arc<Context>,
    position: u64,
    source: Source,
}

impl DigitGenerator {
    pub fn new(kind: SequenceKind, limbs: usize) -> Result<DigitGenerator> {
        let ctx = context(kind.base(), limbs)?;
        let source = match kind.family() {
            Family::Mersenne => Source::Primes(PrimeStream::new()),
            Family::RandomMersenne => {
                Source::Random(RandomPrimeStream::new(kind.seed().unwrap_or_default()))
            }
            Family::Factorial => Source::Factorial {
                sum: CertifiedReal::zero(limbs),
            },
            Family::Primorial => Source::Primorial {
                primes: PrimeStream::new(),
                sum: CertifiedReal::zero(limbs),
            },
            _ => Source::Indexed,
        };
        Ok(DigitGenerator {
            kind,
            ctx,
            position: 0,
            source,
        })
    }

    pub fn resume(cp: &GeneratorCheckpoint) -> Result<DigitGenerator> {
        let ctx = context(cp.kind.base(), cp.limbs)?;
        let bad = || SourceError::InvalidSequence("resume state does not match sequence".into());
        let source = match (cp.kind.family(), &cp.state) {
            (Family::Mersenne, GeneratorState::Primes { cursor }) => {
                Source::Primes(PrimeStream::resume(*cursor))
            }
            (Family::RandomMersenne, GeneratorState::Random { cursor }) => {
                if Some(cursor.seed) != cp.kind.seed() {
                    return Err(bad());
                }
                Source::Random(RandomPrimeStream::resume(*cursor))
            }
            (Family::Factorial, GeneratorState::Factorial { sum }) => {
                Source::Factorial { sum: sum.clone() }
            }
            (Family::Primorial, GeneratorState::Primorial { cursor, sum }) => Source::Primorial {
                primes: PrimeStream::resume(*cursor),
                sum: sum.clone(),
            },
            (f, GeneratorState::Indexed) if !f.is_prime_based() && !f.is_accumulating() => {
                Source::Indexed
            }
            _ => return Err(bad()),
        };
        let emitted = match &source {
            Source::Primes(p) | Source::Primorial { primes: p, .. } => Some(p.emitted()),
            Source::Random(r) => Some(r.cursor().emitted),
            _ => None,
        };
        if emitted.is_some_and(|e| e != cp.position) {
            return Err(bad());
        }
        if let GeneratorState::Factorial { sum } | GeneratorState::Primorial { sum, .. } = &cp.state
        {
            if sum.limbs() != cp.limbs {
                return Err(bad());
            }
        }
        Ok(DigitGenerator {
            kind: cp.kind,
            ctx,
            position: cp.position,
            source,
        })
    }

    pub fn checkpoint(&self) -> GeneratorCheckpoint {
        let state = match &self.source {
            Source::Indexed => GeneratorState::Indexed,
            Source::Primes(p) => GeneratorState::Primes { cursor: p.cursor() },
            Source::Random(r) => GeneratorState::Random { cursor: r.cursor() },
            Source::Factorial { sum } => GeneratorState::Factorial { sum: sum.clone() },
            Source::Primorial { primes, sum } => GeneratorState::Primorial {
                cursor: primes.cursor(),
                sum: sum.clone(),
            },
        };
        GeneratorCheckpoint {
            kind: self.kind,
            limbs: self.ctx.limbs,
            position: self.position,
            state,
        }
    }

    pub fn kind(&self) -> &SequenceKind {
        &self.kind
    }

    pub fn limbs(&self) -> usize {
        self.ctx.limbs
    }

    /// Terms produced so far.
    pub fn position(&self) -> u64 {
        self.position
    }

    /// Appends the next `count` digits to `out`.
    pub fn fill(&mut self, out: &mut Vec<Digit>, count: u64) -> Result<()> {
        let mut left = count;
        while left > 0 {
            let take = left.min(BLOCK);
            self.block(out, take)?;
            left -= take;
        }
        Ok(())
    }

    /// The next `count` digits.
    pub fn next_digits(&mut self, count: u64) -> Result<Vec<Digit>> {
        let mut v = Vec::with_capacity(count as usize);
        self.fill(&mut v, count)?;
        Ok(v)
    }

    fn block(&mut self, out: &mut Vec<Digit>, count: u64) -> Result<()> {
        let first = self.position + 1;
        let kind = self.kind;
        let ctx = self.ctx.clone();
        let ctx = &*ctx;
        let shards: Vec<(u64, u64)> = (0..count.div_ceil(SHARD))
            .map(|i| {
                let a = first + i * SHARD;
                (a, (a + SHARD).min(first + count))
            })
            .collect();
        let parts: Vec<Vec<Digit>> = match &mut self.source {
            Source::Indexed => shards
                .par_iter()
                .map(|&(a, b)| indexed_shard(&kind, ctx, a, b))
                .collect::<Result<_>>()?,
            Source::Primes(_) | Source::Random(_) => {
                let mut exps = Vec::with_capacity(count as usize);
                match &mut self.source {
                    Source::Primes(p) => p.fill(&mut exps, count as usize),
                    Source::Random(r) => r.fill(&mut exps, count as usize),
                    _ => unreachable!(),
                }
                shards
                    .par_iter()
                    .map(|&(a, b)| {
                        let e = &exps[(a - first) as usize..(b - first) as usize];
                        exponent_shard(&kind, ctx, a, e)
                    })
                    .collect::<Result<_>>()?
            }
            Source::Factorial { sum } => {
                let (parts, total) = accumulate(
                    &shards,
                    sum,
                    |&(a, b)| sum_ln_range(a, b, ctx.limbs),
                    |&(a, b), offset| factorial_shard(&kind, ctx, a, b, offset),
                )?;
                *sum = total;
                parts
            }
            Source::Primorial { primes, sum } => {
                let mut ps = Vec::with_capacity(count as usize);
                primes.fill(&mut ps, count as usize);
                let slices: Vec<(u64, &[u64])> = shards
                    .iter()
                    .map(|&(a, b)| (a, &ps[(a - first) as usize..(b - first) as usize]))
                    .collect();
                let (parts, total) = accumulate(
                    &slices,
                    sum,
                    |&(_, s)| sum_ln_primes(s, ctx.limbs),
                    |&(a, s), offset| primorial_shard(&kind, ctx, a, s, offset),
                )?;
                *sum = total;
                parts
            }
        };
        for p in parts {
            out.extend_from_slice(&p);
        }
        self.position += count;
        Ok(())
    }
}

/// Runs accumulating shards. With one worker this is a single sequential
/// pass; otherwise shard totals are summed first so every shard knows its
/// starting offset. Fixed-point addition is exact, so both routes give the
/// same bits.
fn accumulate<S: Sync>(
    shards: &[S],
    start: &CertifiedReal,
    total: impl Fn(&S) -> Result<CertifiedReal> + Sync,
    walk: impl Fn(&S, CertifiedReal) -> Result<(Vec<Digit>, CertifiedReal)> + Sync,
) -> Result<(Vec<Vec<Digit>>, CertifiedReal)> {
    if rayon::current_num_threads() == 1 || shards.len() == 1 {
        let mut sum = start.clone();
        let mut parts = Vec::with_capacity(shards.len());
        for s in shards {
            let (digits, end) = walk(s, sum)?;
            parts.push(digits);
            sum = end;
        }
        return Ok((parts, sum));
    }
    let totals: Vec<CertifiedReal> = shards.par_iter().map(&total).collect::<Result<_>>()?;
    let mut offsets = Vec::with_capacity(shards.len());
    let mut acc = start.clone();
    for t in &totals {
        offsets.push(acc.clone());
        acc.add_assign(t)?;
    }
    let parts: Vec<Vec<Digit>> = shards
        .par_iter()
        .zip(offsets)
        .map(|(s, off)| walk(s, off).map(|(d, _)| d))
        .collect::<Result<_>>()?;
    Ok((parts, acc))
}

fn indexed_shard(kind: &SequenceKind, ctx: &Context, a: u64, b: u64) -> Result<Vec<Digit>> {
    let mut out = Vec::with_capacity((b - a) as usize);
    let alpha = &ctx.log2.frac;
    match kind.family() {
        Family::Pow2 => {
            for n in a..b {
                out.push(finish(kind, n, None, ctx, kernel::frac_mul_int(alpha, n))?);
            }
        }
        Family::Pow2Nsq => {
            for n in a..b {
                let f = kernel::frac_mul_int(alpha, n).and_then(|f| kernel::frac_mul_int(&f, n));
                out.push(finish(kind, n, None, ctx, f)?);
            }
        }
        Family::Pow2Nlogn | Family::Npown => {
            let factor = if kind.family() == Family::Npown {
                &ctx.inv_ln_base
            } else {
                &ctx.log2
            };
            let mut w = LnWalker::at(a, ctx.limbs)?;
            for n in a..b {
                w.advance_to(n)?;
                if kind.family() == Family::Npown && kernel::integer_log(n, kind.base()).is_some() {
                    out.push(Digit::new_unchecked(1));
                    continue;
                }
                let f = w.ln.mul_int(n).and_then(|x| x.mul(factor)).map(|x| x.frac);
                out.push(finish(kind, n, None, ctx, f)?);
            }
        }
        f => unreachable!("{f} is not index-only"),
    }
    Ok(out)
}

fn exponent_shard(kind: &SequenceKind, ctx: &Context, a: u64, exps: &[u64]) -> Result<Vec<Digit>> {
    let alpha = &ctx.log2.frac;
    exps.iter()
        .enumerate()
        .map(|(i, &p)| {
            finish(
                kind,
                a + i as u64,
                Some(p),
                ctx,
                kernel::frac_mul_int(alpha, p),
            )
        })
        .collect()
}

fn factorial_shard(
    kind: &SequenceKind,
    ctx: &Context,
    a: u64,
    b: u64,
    mut sum: CertifiedReal,
) -> Result<(Vec<Digit>, CertifiedReal)> {
    let mut out = Vec::with_capacity((b - a) as usize);
    let mut w = LnWalker::at(a, ctx.limbs)?;
    for n in a..b {
        w.advance_to(n)?;
        sum.add_assign(&w.ln)?;
        let f = sum.mul(&ctx.inv_ln_base).map(|x| x.frac);
        out.push(finish(kind, n, None, ctx, f)?);
    }
    Ok((out, sum))
}

fn primorial_shard(
    kind: &SequenceKind,
    ctx: &Context,
    a: u64,
    primes: &[u64],
    mut sum: CertifiedReal,
) -> Result<(Vec<Digit>, CertifiedReal)> {
    let mut out = Vec::with_capacity(primes.len());
    let mut w = LnWalker::at(primes[0], ctx.limbs)?;
    for (i, &p) in primes.iter().enumerate() {
        w.advance_to(p)?;
        sum.add_assign(&w.ln)?;
        let f = sum.mul(&ctx.inv_ln_base).map(|x| x.frac);
        out.push(finish(kind, a + i as u64, None, ctx, f)?);
    }
    Ok((out, sum))
}

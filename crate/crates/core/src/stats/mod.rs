//! Benford predictions, streaming estimators and distances.

mod state;

use std::ops::Range;

use num_bigint::BigUint;
use thiserror::Error;

use crate::kernel::Digit;
use crate::sources::{Family, PrimeStream, RandomPrimeStream, SequenceKind};

pub use state::{GapHistogram, StatsState, DEFAULT_ORDER, MAX_ORDER};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StatsError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("digit {digit} occurs fewer than twice; no waiting times")]
    EmptyHistogram { digit: u32 },
}

pub type Result<T> = std::result::Result<T, StatsError>;

/// `P(d) = log_base(1 + 1/d)`.
pub fn benford_p(d: u32, base: u32) -> Result<f64> {
    if base < 2 {
        return Err(StatsError::InvalidArgument(format!("base {base} < 2")));
    }
    if d == 0 || d >= base {
        return Err(StatsError::InvalidArgument(format!(
            "digit {d} outside 1..{base}"
        )));
    }
    Ok((1.0 + 1.0 / d as f64).ln() / (base as f64).ln())
}

/// Benford's law for one base.
#[derive(Clone, Debug, PartialEq)]
pub struct BenfordModel {
    base: u32,
    p: Vec<f64>,
}

impl BenfordModel {
    pub fn new(base: u32) -> Result<BenfordModel> {
        let p = (1..base)
            .map(|d| benford_p(d, base))
            .collect::<Result<_>>()?;
        Ok(BenfordModel { base, p })
    }

    pub fn decimal() -> BenfordModel {
        BenfordModel::new(10).unwrap()
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    /// `P(d)`; panics outside `1..base`.
    pub fn p(&self, d: u32) -> f64 {
        self.p[(d - 1) as usize]
    }

    /// `P(1), …, P(base − 1)`.
    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    /// `N · P(d)`.
    pub fn expected_count(&self, n: u64, d: u32) -> f64 {
        n as f64 * self.p(d)
    }

    /// Geometric waiting-time law `P(d)(1 − P(d))^(k−1)`, `k ≥ 1`.
    pub fn waiting_pmf(&self, d: u32, k: u64) -> f64 {
        let p = self.p(d);
        p * (1.0 - p).powf(k as f64 - 1.0)
    }

    /// `∏ P(d_i)`.
    pub fn tuple_freq(&self, tuple: &[u8]) -> f64 {
        tuple.iter().map(|&d| self.p(d as u32)).product()
    }

    /// Predicted frequencies of all `k`-tuples in code order.
    pub fn tuple_distribution(&self, k: usize) -> Vec<f64> {
        let mut dist = vec![1.0];
        for _ in 0..k {
            dist = dist
                .iter()
                .flat_map(|&a| self.p.iter().map(move |&b| a * b))
                .collect();
        }
        dist
    }

    fn check(&self, state: &StatsState) {
        assert_eq!(self.base, state.base(), "model and state bases differ");
    }
}

pub fn waiting_pmf_predicted(d: u32, k: u64, model: &BenfordModel) -> f64 {
    model.waiting_pmf(d, k)
}

pub fn tuple_freq_predicted(tuple: &[u8], model: &BenfordModel) -> f64 {
    model.tuple_freq(tuple)
}

/// `E_d(N) = #{n ≤ N : D(a_n) = d} − N·P(d)`.
pub fn benford_error(state: &StatsState, d: u32, model: &BenfordModel) -> f64 {
    model.check(state);
    state.count(d) as f64 - model.expected_count(state.len(), d)
}

/// `E_d(N) / √(N·P(d)(1 − P(d)))`; zero for an empty state.
pub fn z_score(state: &StatsState, d: u32, model: &BenfordModel) -> f64 {
    if state.is_empty() {
        return 0.0;
    }
    let p = model.p(d);
    benford_error(state, d, model) / (state.len() as f64 * p * (1.0 - p)).sqrt()
}

/// Waiting times of `d` as `(gap, relative frequency)`, normalized by the
/// number of gaps `count(d) − 1`.
pub fn waiting_hist_observed(state: &StatsState, d: u32) -> Result<Vec<(u64, f64)>> {
    let h = state.waits(d);
    let total = h.total();
    if state.count(d) < 2 || total == 0 {
        return Err(StatsError::EmptyHistogram { digit: d });
    }
    Ok(h.iter()
        .map(|(g, c)| (g, c as f64 / total as f64))
        .collect())
}

/// Total variation distance between the observed waiting times of `d` and
/// the geometric law, including the geometric tail beyond the longest
/// observed gap.
pub fn waiting_tvd(state: &StatsState, d: u32, model: &BenfordModel) -> Result<f64> {
    let obs = waiting_hist_observed(state, d)?;
    let max = obs.last().map(|&(g, _)| g).unwrap_or(0);
    let p = model.p(d);
    let mut it = obs.iter().peekable();
    let mut l1 = 0.0;
    for k in 1..=max {
        let o = match it.peek() {
            Some(&&(g, f)) if g == k => {
                it.next();
                f
            }
            _ => 0.0,
        };
        l1 += (o - model.waiting_pmf(d, k)).abs();
    }
    l1 += (1.0 - p).powf(max as f64);
    Ok(0.5 * l1)
}

/// Observed frequencies of all `k`-tuples in code order, denominator
/// `N − k + 1`.
pub fn tuple_freq_observed(state: &StatsState) -> Result<Vec<f64>> {
    let total = state.tuple_total();
    if total == 0 {
        return Err(StatsError::InvalidArgument(format!(
            "no {}-tuples in {} digits",
            state.order(),
            state.len()
        )));
    }
    Ok(state
        .tuple_counts()
        .iter()
        .map(|&c| c as f64 / total as f64)
        .collect())
}

/// `½ Σ |p − q|` for two distributions over the same finite space.
pub fn tvd(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(StatsError::InvalidArgument(format!(
            "distributions over {} and {} outcomes",
            p.len(),
            q.len()
        )));
    }
    for (name, d) in [("first", p), ("second", q)] {
        let s: f64 = d.iter().sum();
        if (s - 1.0).abs() > 1e-9 || d.iter().any(|&x| x < 0.0) {
            return Err(StatsError::InvalidArgument(format!(
                "{name} distribution sums to {s}"
            )));
        }
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Tuple TVD between a state's observed `k`-tuples and the product law.
pub fn tuple_tvd(state: &StatsState, model: &BenfordModel) -> Result<f64> {
    model.check(state);
    tvd(
        &tuple_freq_observed(state)?,
        &model.tuple_distribution(state.order()),
    )
}

/// `⌊1000 · 1.05^i⌋ ≤ n_max` for `i ≥ 1`, ascending and deduplicated.
/// Computed exactly as `⌊1000 · 21^i / 20^i⌋`.
pub fn checkpoints(n_max: u64) -> Vec<u64> {
    let mut out: Vec<u64> = Vec::new();
    let mut num = BigUint::from(1000u32);
    let mut den = BigUint::from(1u32);
    loop {
        num *= 21u32;
        den *= 20u32;
        let v = &num / &den;
        match u64::try_from(&v) {
            Ok(v) if v <= n_max => {
                if out.last() != Some(&v) {
                    out.push(v);
                }
            }
            _ => break,
        }
    }
    out
}

/// Feeds digits into a [`StatsState`] and calls back whenever the state's
/// length reaches one of the given marks.
pub struct CheckpointTracker {
    state: StatsState,
    marks: Vec<u64>,
    next: usize,
}

impl CheckpointTracker {
    /// `marks` are stream lengths in ascending order; marks already passed
    /// by `state` are skipped.
    pub fn new(state: StatsState, mut marks: Vec<u64>) -> CheckpointTracker {
        marks.sort_unstable();
        marks.dedup();
        let next = marks.partition_point(|&m| m < state.len());
        CheckpointTracker { state, marks, next }
    }

    pub fn state(&self) -> &StatsState {
        &self.state
    }

    pub fn into_state(self) -> StatsState {
        self.state
    }

    /// Marks not reached yet.
    pub fn pending(&self) -> &[u64] {
        &self.marks[self.next..]
    }

    pub fn feed<F: FnMut(&StatsState)>(&mut self, mut digits: &[Digit], mut at: F) {
        loop {
            while self.marks.get(self.next) == Some(&self.state.len()) {
                at(&self.state);
                self.next += 1;
            }
            if digits.is_empty() {
                return;
            }
            let room = match self.marks.get(self.next) {
                Some(&m) => (m - self.state.len()).min(digits.len() as u64) as usize,
                None => digits.len(),
            };
            let (now, rest) = digits.split_at(room);
            self.state.ingest_all(now);
            digits = rest;
        }
    }
}

/// `u_n = log_b a_{n+1} − log_b a_n` for `n` in `range`, in double
/// precision. A diagnostic, not certified.
pub fn delta_log_profile(kind: &SequenceKind, range: Range<u64>) -> Result<Vec<f64>> {
    if range.start == 0 {
        return Err(StatsError::InvalidArgument(
            "terms are indexed from 1".into(),
        ));
    }
    let lb = (kind.base() as f64).ln();
    let log2 = std::f64::consts::LN_2 / lb;
    let len = range.end.saturating_sub(range.start) as usize;
    let exponents = |skip: u64, take: usize| -> Vec<u64> {
        match kind.family() {
            Family::RandomMersenne => RandomPrimeStream::new(kind.seed().unwrap_or(0))
                .skip(skip as usize)
                .take(take)
                .collect(),
            _ => PrimeStream::new().skip(skip as usize).take(take).collect(),
        }
    };
    let out = match kind.family() {
        Family::Mersenne | Family::RandomMersenne => {
            let p = exponents(range.start - 1, len + 1);
            p.windows(2).map(|w| (w[1] - w[0]) as f64 * log2).collect()
        }
        Family::Primorial => {
            let p = exponents(range.start, len);
            p.iter().map(|&q| (q as f64).ln() / lb).collect()
        }
        _ => range
            .map(|n| {
                let x = n as f64;
                match kind.family() {
                    Family::Pow2 => log2,
                    Family::Pow2Nsq => (2.0 * x + 1.0) * log2,
                    // (n+1) ln(n+1) − n ln n = ln(n+1) + n ln(1 + 1/n)
                    Family::Pow2Nlogn => ((x + 1.0).ln() + x * (1.0 / x).ln_1p()) * log2,
                    Family::Npown => ((x + 1.0).ln() + x * (1.0 / x).ln_1p()) / lb,
                    Family::Factorial => (x + 1.0).ln() / lb,
                    _ => unreachable!(),
                }
            })
            .collect(),
    };
    Ok(out)
}

//! Series built from the ratios `r_j = q_j / p_j`.
//!
//! Everything here reduces to the products `b_n = r_1 r_2 ... r_n` (`b_0 = 1`)
//! and sums of them. The tail behaviour of `r_j` is captured by a
//! [`RatioTail`], which is what lets convergence be decided exactly and tail
//! sums be bounded with a certificate.

use std::cmp::Ordering;

use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use super::{Boundary, Family, RateLaw, RateSpec, TransitionSpec};
use crate::error::{invalid, Error, Result};
use crate::ratio::{serde_ratio, to_f64};

/// Terms summed before giving up on tightening a certified interval.
const MAX_TERMS: u64 = 200_000;
/// Stop summing once the certified tail is this small relative to the sum.
const REL_TOL: f64 = 1e-15;

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Limit {
    Finite(BigRational),
    Infinite,
}

impl Limit {
    fn cmp_one(&self) -> Ordering {
        match self {
            Limit::Finite(v) => v.cmp(&BigRational::one()),
            Limit::Infinite => Ordering::Greater,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Shape {
    Constant(BigRational),
    /// Monotone non-increasing towards the limit.
    Decreasing(Limit),
    /// Monotone non-decreasing towards the limit.
    Increasing(Limit),
}

/// Behaviour of `r_j` for every `j >= start`.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct RatioTail {
    pub start: u64,
    pub shape: Shape,
}

fn ceil_index(value: BigRational) -> u64 {
    if value.is_negative() {
        return 0;
    }
    value.ceil().to_integer().to_u64().unwrap_or(u64::MAX)
}

/// Shape of `num.at(j) / den.at(j)` for `j >= start`. Both laws must be
/// positive on that range.
pub(crate) fn law_ratio_tail(num: &RateLaw, den: &RateLaw, start: u64) -> RatioTail {
    use RateLaw::{Affine, Geometric};
    let zero = || Limit::Finite(BigRational::zero());
    let one = BigRational::one();
    match (num, den) {
        (Geometric { scale: s1, ratio: g1 }, Geometric { scale: s2, ratio: g2 }) => {
            let g = g1 / g2;
            let shape = match g.cmp(&one) {
                Ordering::Equal => Shape::Constant(s1 / s2),
                Ordering::Less => Shape::Decreasing(zero()),
                Ordering::Greater => Shape::Increasing(Limit::Infinite),
            };
            RatioTail { start, shape }
        }
        (Affine { intercept: a, slope: b }, Affine { intercept: c, slope: d }) => {
            let limit = if d.is_positive() {
                Limit::Finite(b / d)
            } else if b.is_positive() {
                Limit::Infinite
            } else {
                Limit::Finite(a / c)
            };
            let sign = b * c - a * d;
            let shape = if sign.is_zero() {
                Shape::Constant(num.at(start) / den.at(start))
            } else if sign.is_positive() {
                Shape::Increasing(limit)
            } else {
                Shape::Decreasing(limit)
            };
            RatioTail { start, shape }
        }
        (Geometric { ratio: g, .. }, Affine { intercept: c, slope: d }) => match g.cmp(&one) {
            Ordering::Less => RatioTail {
                start,
                shape: Shape::Decreasing(zero()),
            },
            Ordering::Equal if d.is_zero() => RatioTail {
                start,
                shape: Shape::Constant(num.at(start) / den.at(start)),
            },
            Ordering::Equal => RatioTail {
                start,
                shape: Shape::Decreasing(zero()),
            },
            Ordering::Greater => {
                // r_{j+1}/r_j = g (c + d j) / (c + d (j+1)) >= 1 once (g-1)(c+dj) >= d.
                let from = if d.is_zero() {
                    start
                } else {
                    ceil_index((d / (g - &one) - c) / d).max(start)
                };
                RatioTail {
                    start: from,
                    shape: Shape::Increasing(Limit::Infinite),
                }
            }
        },
        (Affine { intercept: a, slope: b }, Geometric { ratio: g, .. }) => match g.cmp(&one) {
            Ordering::Greater => {
                // r_{j+1}/r_j = (a + b(j+1)) / ((a + bj) g) <= 1 once (g-1)(a+bj) >= b.
                let from = if b.is_zero() {
                    start
                } else {
                    ceil_index((b / (g - &one) - a) / b).max(start)
                };
                RatioTail {
                    start: from,
                    shape: Shape::Decreasing(zero()),
                }
            }
            Ordering::Equal if b.is_zero() => RatioTail {
                start,
                shape: Shape::Constant(num.at(start) / den.at(start)),
            },
            _ => RatioTail {
                start,
                shape: Shape::Increasing(Limit::Infinite),
            },
        },
    }
}

impl TransitionSpec {
    pub(crate) fn ratio_tail(&self) -> RatioTail {
        let one = BigRational::one();
        match self.family() {
            Family::ConstantPq(p) => RatioTail {
                start: 1,
                shape: Shape::Constant((&one - p) / p),
            },
            Family::Table { prefix, tail } => RatioTail {
                start: prefix.len() as u64 + 1,
                shape: Shape::Constant((&one - tail) / tail),
            },
            Family::FromRates(rates) => law_ratio_tail(&rates.mu.tail, &rates.lambda.tail, rates.tail_start()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub(crate) enum Decision {
    Converges,
    Diverges,
    Unknown,
}

/// Convergence of `sum_n prod_{j<=n} r_j`.
pub(crate) fn b_series_decision(shape: &Shape) -> Decision {
    match shape {
        Shape::Constant(rho) if *rho < BigRational::one() => Decision::Converges,
        Shape::Constant(_) => Decision::Diverges,
        Shape::Decreasing(limit) => match limit.cmp_one() {
            Ordering::Less => Decision::Converges,
            _ => Decision::Diverges,
        },
        Shape::Increasing(limit) => match limit.cmp_one() {
            Ordering::Less => Decision::Converges,
            Ordering::Equal => Decision::Unknown,
            Ordering::Greater => Decision::Diverges,
        },
    }
}

/// Convergence of `sum_n a_n` where `a_n = p_0 (1 + r_n) / b_n`.
fn a_series_decision(shape: &Shape) -> Decision {
    match shape {
        Shape::Constant(rho) if *rho > BigRational::one() => Decision::Converges,
        Shape::Constant(_) => Decision::Diverges,
        Shape::Decreasing(limit) => match limit.cmp_one() {
            Ordering::Less => Decision::Diverges,
            Ordering::Equal => Decision::Unknown,
            Ordering::Greater => Decision::Converges,
        },
        Shape::Increasing(limit) => match limit.cmp_one() {
            Ordering::Greater => Decision::Converges,
            _ => Decision::Diverges,
        },
    }
}

/// Value of `sum_{n >= m} b_n`.
#[derive(Clone, Debug, PartialEq)]
pub(crate) enum SeriesSum {
    Exact(BigRational),
    Bounds { lo: f64, hi: f64 },
    Divergent,
    /// Convergence undecided; `lo` is a certified lower bound.
    Undecided { lo: f64 },
}

/// A ratio sequence with a known tail, abstracted over where it comes from.
pub(crate) trait RatioSource {
    fn ratio_at(&self, j: u64) -> BigRational;
    fn tail(&self) -> RatioTail;
}

impl RatioSource for TransitionSpec {
    fn ratio_at(&self, j: u64) -> BigRational {
        self.ratio(j)
    }

    fn tail(&self) -> RatioTail {
        self.ratio_tail()
    }
}

/// Ratios `num_j / den_j` of two rate sequences for `j >= 1`.
pub(crate) struct LawRatio<'a> {
    num: &'a super::RateSequence,
    den: &'a super::RateSequence,
    /// Evaluate `num` at `j - 1` instead of `j`.
    shift_num: bool,
}

impl RatioSource for LawRatio<'_> {
    fn ratio_at(&self, j: u64) -> BigRational {
        let n = if self.shift_num { self.num.at(j - 1) } else { self.num.at(j) };
        n / self.den.at(j)
    }

    fn tail(&self) -> RatioTail {
        let num_tail_from = self.num.prefix.len() as u64 + u64::from(self.shift_num);
        let start = num_tail_from.max(self.den.prefix.len() as u64).max(1);
        let num_law = if self.shift_num {
            self.num.tail.shifted_back()
        } else {
            self.num.tail.clone()
        };
        law_ratio_tail(&num_law, &self.den.tail, start)
    }
}

/// Exact `b_0, ..., b_n`.
pub(crate) fn b_terms<S: RatioSource + ?Sized>(source: &S, n: u64) -> Vec<BigRational> {
    let mut out = Vec::with_capacity(n as usize + 1);
    let mut b = BigRational::one();
    out.push(b.clone());
    for j in 1..=n {
        b *= source.ratio_at(j);
        out.push(b.clone());
    }
    out
}

fn inflate(x: f64, terms: u64) -> (f64, f64) {
    let rel = 4.0 * (terms as f64 + 2.0) * f64::EPSILON;
    (x * (1.0 - rel), x * (1.0 + rel))
}

/// `sum_{n >= m} b_n`.
pub(crate) fn series_sum_from<S: RatioSource + ?Sized>(source: &S, m: u64) -> SeriesSum {
    let tail = source.tail();
    match b_series_decision(&tail.shape) {
        Decision::Diverges => SeriesSum::Divergent,
        Decision::Unknown => {
            let mut b = 1.0f64;
            let mut lo = if m == 0 { 1.0 } else { 0.0 };
            let cutoff = m + 10_000;
            for j in 1..=cutoff {
                b *= to_f64(&source.ratio_at(j));
                if j >= m {
                    lo += b;
                }
            }
            SeriesSum::Undecided {
                lo: inflate(lo, cutoff).0,
            }
        }
        Decision::Converges => match &tail.shape {
            Shape::Constant(rho) => {
                let last = m.max(tail.start.saturating_sub(1));
                let terms = b_terms(source, last);
                let mut sum: BigRational = terms[m as usize..].iter().sum();
                let b_last = &terms[last as usize];
                sum += b_last * rho / (BigRational::one() - rho);
                SeriesSum::Exact(sum)
            }
            shape => certified_sum(source, &tail, shape, m),
        },
    }
}

fn certified_sum<S: RatioSource + ?Sized>(source: &S, tail: &RatioTail, shape: &Shape, m: u64) -> SeriesSum {
    let mut b = 1.0f64;
    let mut partial: f64 = if m == 0 { 1.0 } else { 0.0 };
    let mut n = 0u64;
    loop {
        let next_ratio = to_f64(&source.ratio_at(n + 1));
        if n + 1 >= tail.start && n + 1 > m {
            // Every r_j with j > n is bounded by rho.
            let rho = match shape {
                Shape::Decreasing(_) => Some(next_ratio),
                Shape::Increasing(Limit::Finite(l)) => Some(to_f64(l)),
                _ => None,
            };
            if let Some(rho) = rho.filter(|r| *r < 1.0) {
                let tail_bound = b * rho / (1.0 - rho);
                if tail_bound <= REL_TOL * partial.max(f64::MIN_POSITIVE) || n >= MAX_TERMS {
                    let lo = inflate(partial, n).0;
                    let hi = inflate(partial + tail_bound, n).1;
                    return SeriesSum::Bounds { lo, hi };
                }
            }
        }
        if n >= MAX_TERMS + tail.start {
            // The certificate never engaged; only the partial sum is known.
            return SeriesSum::Undecided {
                lo: inflate(partial, n).0,
            };
        }
        n += 1;
        b *= next_ratio;
        if n >= m {
            partial += b;
        }
    }
}

/// An exact probability or a certified enclosing interval.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Probability {
    Exact(#[serde(with = "serde_ratio")] BigRational),
    Bounds { lo: f64, hi: f64 },
}

impl Probability {
    pub fn exact(&self) -> Option<&BigRational> {
        match self {
            Probability::Exact(v) => Some(v),
            Probability::Bounds { .. } => None,
        }
    }

    pub fn lo(&self) -> f64 {
        match self {
            Probability::Exact(v) => to_f64(v),
            Probability::Bounds { lo, .. } => *lo,
        }
    }

    pub fn hi(&self) -> f64 {
        match self {
            Probability::Exact(v) => to_f64(v),
            Probability::Bounds { hi, .. } => *hi,
        }
    }

    /// Point estimate: the exact value or the interval midpoint.
    pub fn value(&self) -> f64 {
        match self {
            Probability::Exact(v) => to_f64(v),
            Probability::Bounds { lo, hi } => 0.5 * (lo + hi),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo() <= x && x <= self.hi()
    }

    /// `sum_i w_i P_i`, exact when every term is.
    pub fn weighted_sum<'a>(terms: impl IntoIterator<Item = (&'a BigRational, Probability)>) -> Probability {
        let mut exact = Some(BigRational::zero());
        let (mut lo, mut hi) = (0.0, 0.0);
        for (w, p) in terms {
            let wf = to_f64(w);
            lo += wf * p.lo();
            hi += wf * p.hi();
            exact = match (exact, p.exact()) {
                (Some(acc), Some(v)) => Some(acc + w * v),
                _ => None,
            };
        }
        match exact {
            Some(v) => Probability::Exact(v),
            None => Probability::Bounds {
                lo: (lo * (1.0 - 1e-15)).max(0.0),
                hi: (hi * (1.0 + 1e-15)).min(1.0),
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AbsorptionMode {
    /// Eventual absorption at `-1` (absorbing boundary).
    AbsorbAtMinusOne,
    /// Never reaching `0` from `i >= 1` (reflecting boundary).
    NeverReachZero,
}

fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Probability of eventual absorption at `-1`, or of never reaching `0`.
pub fn absorption_probability(spec: &TransitionSpec, i: u64, mode: AbsorptionMode) -> Result<Probability> {
    match mode {
        AbsorptionMode::AbsorbAtMinusOne => {
            let weight = spec.absorbing_weight()?;
            let head: BigRational = b_terms(spec, i)[..i as usize].iter().sum();
            let base = &weight + &head;
            Ok(match series_sum_from(spec, i) {
                SeriesSum::Divergent => Probability::Exact(BigRational::one()),
                SeriesSum::Exact(s) => {
                    let denom = &base + &s;
                    Probability::Exact(s / denom)
                }
                SeriesSum::Bounds { lo, hi } => {
                    let base = to_f64(&base);
                    Probability::Bounds {
                        lo: clamp01(lo / (base + lo) * (1.0 - 1e-15)),
                        hi: clamp01(hi / (base + hi) * (1.0 + 1e-15)),
                    }
                }
                SeriesSum::Undecided { lo } => {
                    let base = to_f64(&base);
                    Probability::Bounds {
                        lo: clamp01(lo / (base + lo) * (1.0 - 1e-15)),
                        hi: 1.0,
                    }
                }
            })
        }
        AbsorptionMode::NeverReachZero => {
            if spec.is_absorbing() {
                return Err(Error::WrongMode("never-reach-zero requires a reflecting boundary"));
            }
            if i == 0 {
                return Err(invalid("never-reach-zero requires a start state i >= 1"));
            }
            let head: BigRational = b_terms(spec, i)[..i as usize].iter().sum();
            Ok(match series_sum_from(spec, i) {
                SeriesSum::Divergent => Probability::Exact(BigRational::zero()),
                SeriesSum::Exact(s) => {
                    let denom = &head + &s;
                    Probability::Exact(head / denom)
                }
                SeriesSum::Bounds { lo, hi } => {
                    let head = to_f64(&head);
                    Probability::Bounds {
                        lo: clamp01(head / (head + hi) * (1.0 - 1e-15)),
                        hi: clamp01(head / (head + lo) * (1.0 + 1e-15)),
                    }
                }
                SeriesSum::Undecided { lo } => {
                    let head = to_f64(&head);
                    Probability::Bounds {
                        lo: 0.0,
                        hi: clamp01(head / (head + lo) * (1.0 + 1e-15)),
                    }
                }
            })
        }
    }
}

/// Probability that the running maximum never exceeds `bound`, starting
/// from `i`. Defined for every `bound >= 0`.
pub(crate) fn max_at_most(spec: &TransitionSpec, bound: u64, i: u64) -> Result<BigRational> {
    let weight = spec.absorbing_weight()?;
    if i > bound {
        return Ok(BigRational::zero());
    }
    let terms = b_terms(spec, bound);
    let total: BigRational = terms.iter().sum();
    let upper: BigRational = terms[i as usize..].iter().sum();
    Ok(upper / (weight + total))
}

/// Probability `h_{k,i}` that the chain started at `i` never exceeds `k`
/// before absorption.
pub fn max_not_exceeding_probability(spec: &TransitionSpec, k: u64, i: u64) -> Result<BigRational> {
    if k < 1 {
        return Err(invalid("the bound k must be at least 1"));
    }
    max_at_most(spec, k, i)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainKind {
    PositiveRecurrent,
    NullRecurrent,
    Transient,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassificationDiagnostics {
    pub terms: u64,
    /// `sum_{n=1}^{terms} a_n`
    pub partial_a: f64,
    /// `sum_{n=1}^{terms} b_n`
    pub partial_b: f64,
    /// Certified bound on `sum_{n > terms} a_n`, when available.
    pub tail_bound_a: Option<f64>,
    pub tail_bound_b: Option<f64>,
    pub a_series: &'static str,
    pub b_series: &'static str,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainClassification {
    pub kind: ChainKind,
    pub diagnostics: ClassificationDiagnostics,
}

fn decision_label(d: Decision) -> &'static str {
    match d {
        Decision::Converges => "converges",
        Decision::Diverges => "diverges",
        Decision::Unknown => "undecided",
    }
}

/// Recurrence classification of a reflecting chain from the growth of the
/// `a_n` and `b_n` series.
pub fn classify_chain(spec: &TransitionSpec) -> Result<ChainClassification> {
    if !matches!(spec.boundary(), Boundary::Reflecting) {
        return Err(Error::WrongMode("classification requires a reflecting boundary"));
    }
    let tail = spec.ratio_tail();
    let b = b_series_decision(&tail.shape);
    let a = a_series_decision(&tail.shape);
    let kind = match (b, a) {
        (Decision::Converges, _) => ChainKind::Transient,
        (Decision::Diverges, Decision::Converges) => ChainKind::PositiveRecurrent,
        (Decision::Diverges, Decision::Diverges) => ChainKind::NullRecurrent,
        _ => ChainKind::Inconclusive,
    };

    let terms = 1000u64.max(tail.start);
    let (mut b_n, mut partial_a, mut partial_b) = (1.0f64, 0.0f64, 0.0f64);
    let mut last_ratio = 0.0;
    for j in 1..=terms {
        let r = to_f64(&spec.ratio(j));
        b_n *= r;
        partial_b += b_n;
        partial_a += (1.0 + r) / b_n;
        last_ratio = r;
    }
    let tail_bound_b = match (&tail.shape, b) {
        (Shape::Constant(rho), Decision::Converges) => {
            let rho = to_f64(rho);
            Some(b_n * rho / (1.0 - rho))
        }
        (Shape::Decreasing(_), Decision::Converges) => {
            let rho = to_f64(&spec.ratio(terms + 1));
            (rho < 1.0).then(|| b_n * rho / (1.0 - rho))
        }
        (Shape::Increasing(Limit::Finite(l)), Decision::Converges) => {
            let rho = to_f64(l);
            Some(b_n * rho / (1.0 - rho))
        }
        _ => None,
    };
    let tail_bound_a = match (&tail.shape, a) {
        (Shape::Constant(rho), Decision::Converges) => {
            let inv = 1.0 / to_f64(rho);
            Some((1.0 + last_ratio) / b_n * inv / (1.0 - inv))
        }
        _ => None,
    };
    Ok(ChainClassification {
        kind,
        diagnostics: ClassificationDiagnostics {
            terms,
            partial_a,
            partial_b,
            tail_bound_a,
            tail_bound_b,
            a_series: decision_label(a),
            b_series: decision_label(b),
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UniquenessVerdict {
    Satisfied(bool),
    Inconclusive { terms: u64, partial_alpha: f64, partial_beta: f64 },
}

/// Whether `sum_n (alpha_n + beta_n)` diverges, which makes the transition
/// function of the rate matrix unique.
pub fn uniqueness_criterion(rates: &RateSpec, cutoff: u64) -> Result<UniquenessVerdict> {
    rates.validate()?;
    let beta = LawRatio {
        num: &rates.mu,
        den: &rates.lambda,
        shift_num: false,
    };
    let alpha = LawRatio {
        num: &rates.lambda,
        den: &rates.mu,
        shift_num: true,
    };
    let db = b_series_decision(&beta.tail().shape);
    let da = b_series_decision(&alpha.tail().shape);
    Ok(match (da, db) {
        (Decision::Diverges, _) | (_, Decision::Diverges) => UniquenessVerdict::Satisfied(true),
        (Decision::Converges, Decision::Converges) => UniquenessVerdict::Satisfied(false),
        _ => {
            let partial = |src: &LawRatio<'_>| {
                let mut term = 1.0f64;
                let mut sum = 0.0;
                for j in 1..=cutoff {
                    term *= to_f64(&src.ratio_at(j));
                    sum += term;
                }
                sum
            };
            UniquenessVerdict::Inconclusive {
                terms: cutoff,
                partial_alpha: partial(&alpha),
                partial_beta: partial(&beta),
            }
        }
    })
}

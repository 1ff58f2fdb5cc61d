//! Birth-death jump chains on `{-1, 0, 1, 2, ...}`.
//!
//! A chain moves from `i >= 0` to `i + 1` with probability `p_i` and to
//! `i - 1` with probability `q_i = 1 - p_i`. State `0` is either reflecting
//! (`q_0 = 0`) or leaks into the absorbing state `-1` with probability
//! `q_0 > 0`.
//!
//! Analytic quantities are computed in exact rational arithmetic whenever the
//! ratios `q_i / p_i` are eventually constant, and as certified intervals
//! otherwise.

mod oracle;
mod series;
mod walk;

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow, Signed, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ratio::{format_ratio, serde_ratio, serde_ratio_map, serde_ratio_vec, to_f64};

pub use oracle::finite_hitting_oracle;
pub use series::{
    absorption_probability, classify_chain, max_not_exceeding_probability, uniqueness_criterion,
    AbsorptionMode, ChainClassification, ChainKind, ClassificationDiagnostics, Probability,
    UniquenessVerdict,
};
pub(crate) use series::max_at_most;
pub use walk::{
    finite_horizon_absorption, simulate_path, StopReason, WalkOptions, WalkPath, WalkSummary, Walker,
};

/// Tail law of a rate sequence, valid from the end of its explicit prefix.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "law")]
pub enum RateLaw {
    /// `scale * ratio^i`
    Geometric {
        #[serde(with = "serde_ratio")]
        scale: BigRational,
        #[serde(with = "serde_ratio")]
        ratio: BigRational,
    },
    /// `intercept + slope * i`
    Affine {
        #[serde(with = "serde_ratio")]
        intercept: BigRational,
        #[serde(with = "serde_ratio")]
        slope: BigRational,
    },
}

impl RateLaw {
    pub fn at(&self, i: u64) -> BigRational {
        match self {
            RateLaw::Geometric { scale, ratio } => scale * Pow::pow(ratio, i),
            RateLaw::Affine { intercept, slope } => intercept + slope * BigRational::from_integer(BigInt::from(i)),
        }
    }

    fn at_f64(&self, i: u64) -> f64 {
        match self {
            RateLaw::Geometric { scale, ratio } => to_f64(scale) * to_f64(ratio).powf(i as f64),
            RateLaw::Affine { intercept, slope } => to_f64(intercept) + to_f64(slope) * i as f64,
        }
    }

    /// The law re-indexed so that `shifted.at(i) == self.at(i - 1)`.
    pub(crate) fn shifted_back(&self) -> RateLaw {
        match self {
            RateLaw::Geometric { scale, ratio } => RateLaw::Geometric {
                scale: scale / ratio,
                ratio: ratio.clone(),
            },
            RateLaw::Affine { intercept, slope } => RateLaw::Affine {
                intercept: intercept - slope,
                slope: slope.clone(),
            },
        }
    }

    /// Whether every value from index `from` on is strictly positive.
    fn positive_from(&self, from: u64) -> bool {
        match self {
            RateLaw::Geometric { scale, ratio } => scale.is_positive() && ratio.is_positive(),
            RateLaw::Affine { slope, .. } => !slope.is_negative() && self.at(from).is_positive(),
        }
    }
}

/// A rate sequence: explicit values for `i < prefix.len()`, then a tail law.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateSequence {
    #[serde(with = "serde_ratio_vec", default)]
    pub prefix: Vec<BigRational>,
    pub tail: RateLaw,
}

impl RateSequence {
    pub fn constant(value: BigRational) -> Self {
        Self::geometric(value, BigRational::one())
    }

    pub fn geometric(scale: BigRational, ratio: BigRational) -> Self {
        RateSequence {
            prefix: Vec::new(),
            tail: RateLaw::Geometric { scale, ratio },
        }
    }

    pub fn affine(intercept: BigRational, slope: BigRational) -> Self {
        RateSequence {
            prefix: Vec::new(),
            tail: RateLaw::Affine { intercept, slope },
        }
    }

    pub fn with_prefix(mut self, prefix: Vec<BigRational>) -> Self {
        self.prefix = prefix;
        self
    }

    pub fn at(&self, i: u64) -> BigRational {
        match self.prefix.get(i as usize) {
            Some(v) => v.clone(),
            None => self.tail.at(i),
        }
    }

    fn at_f64(&self, i: u64) -> f64 {
        match self.prefix.get(i as usize) {
            Some(v) => to_f64(v),
            None => self.tail.at_f64(i),
        }
    }
}

/// Birth rates `lambda_i` and death rates `mu_i` of the continuous-time process.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateSpec {
    pub lambda: RateSequence,
    pub mu: RateSequence,
}

impl RateSpec {
    pub fn new(lambda: RateSequence, mu: RateSequence) -> Result<Self> {
        let spec = RateSpec { lambda, mu };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, v) in self.lambda.prefix.iter().enumerate() {
            if !v.is_positive() {
                return Err(invalid(format!("lambda_{i} = {} must be positive", format_ratio(v))));
            }
        }
        if !self.lambda.tail.positive_from(self.lambda.prefix.len() as u64) {
            return Err(invalid("lambda tail law must stay positive"));
        }
        for (i, v) in self.mu.prefix.iter().enumerate() {
            if v.is_negative() || (i >= 1 && v.is_zero()) {
                return Err(invalid(format!("mu_{i} = {} out of range", format_ratio(v))));
            }
        }
        let tail_start = self.mu.prefix.len() as u64;
        let check_from = tail_start.max(1);
        if !self.mu.tail.positive_from(check_from) {
            return Err(invalid("mu tail law must be positive for i >= 1"));
        }
        if tail_start == 0 && self.mu.tail.at(0).is_negative() {
            return Err(invalid("mu_0 must be non-negative"));
        }
        Ok(())
    }

    pub fn lambda(&self, i: u64) -> BigRational {
        self.lambda.at(i)
    }

    pub fn mu(&self, i: u64) -> BigRational {
        self.mu.at(i)
    }

    /// Index from which both sequences follow their tail laws.
    pub(crate) fn tail_start(&self) -> u64 {
        (self.lambda.prefix.len().max(self.mu.prefix.len()) as u64).max(1)
    }
}

/// Transition law for `i >= 1`; state `0` is governed by the [`Boundary`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `p_i = p` for every `i >= 1`.
    ConstantPq(#[serde(with = "serde_ratio")] BigRational),
    /// `prefix[j]` is `p_{j+1}`; afterwards `p_i = tail`.
    Table {
        #[serde(with = "serde_ratio_vec")]
        prefix: Vec<BigRational>,
        #[serde(with = "serde_ratio")]
        tail: BigRational,
    },
    /// `p_i = lambda_i / (lambda_i + mu_i)`.
    FromRates(RateSpec),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Reflecting,
    Absorbing(#[serde(with = "serde_ratio")] BigRational),
}

/// A birth-death jump chain: a transition family together with the
/// behaviour at `0`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTransitionSpec")]
pub struct TransitionSpec {
    family: Family,
    boundary: Boundary,
}

#[derive(Deserialize)]
struct RawTransitionSpec {
    family: Family,
    boundary: Boundary,
}

impl TryFrom<RawTransitionSpec> for TransitionSpec {
    type Error = Error;

    fn try_from(raw: RawTransitionSpec) -> Result<Self> {
        TransitionSpec::new(raw.family, raw.boundary)
    }
}

fn open_unit(value: &BigRational) -> bool {
    value.is_positive() && *value < BigRational::one()
}

impl TransitionSpec {
    pub fn new(family: Family, boundary: Boundary) -> Result<Self> {
        match &family {
            Family::ConstantPq(p) => {
                if !open_unit(p) {
                    return Err(invalid(format!("p = {} must lie in (0,1)", format_ratio(p))));
                }
            }
            Family::Table { prefix, tail } => {
                for (j, p) in prefix.iter().chain(std::iter::once(tail)).enumerate() {
                    if !open_unit(p) {
                        return Err(invalid(format!("p_{} = {} must lie in (0,1)", j + 1, format_ratio(p))));
                    }
                }
            }
            Family::FromRates(rates) => {
                rates.validate()?;
                let mu0 = rates.mu(0);
                match &boundary {
                    Boundary::Reflecting if !mu0.is_zero() => {
                        return Err(invalid("reflecting boundary requires mu_0 = 0"));
                    }
                    Boundary::Absorbing(q0) => {
                        let lambda0 = rates.lambda(0);
                        let implied = &mu0 / (&lambda0 + &mu0);
                        if *q0 != implied {
                            return Err(invalid(format!(
                                "absorbing q_0 = {} disagrees with mu_0/(lambda_0+mu_0) = {}",
                                format_ratio(q0),
                                format_ratio(&implied)
                            )));
                        }
                    }
                    Boundary::Reflecting => {}
                }
            }
        }
        if let Boundary::Absorbing(q0) = &boundary {
            if !q0.is_positive() || *q0 > BigRational::one() {
                return Err(invalid(format!("q_0 = {} must lie in (0,1]", format_ratio(q0))));
            }
        }
        Ok(TransitionSpec { family, boundary })
    }

    /// Constant `p` for every `i >= 1`, reflecting at `0`.
    pub fn reflecting(p: BigRational) -> Result<Self> {
        Self::new(Family::ConstantPq(p), Boundary::Reflecting)
    }

    /// Constant `p` for every `i >= 1` and leak probability `q0` at `0`.
    pub fn absorbing(p: BigRational, q0: BigRational) -> Result<Self> {
        Self::new(Family::ConstantPq(p), Boundary::Absorbing(q0))
    }

    /// Jump chain of a birth-death process; the boundary follows from `mu_0`.
    pub fn from_rates(rates: RateSpec) -> Result<Self> {
        rates.validate()?;
        let mu0 = rates.mu(0);
        let boundary = if mu0.is_zero() {
            Boundary::Reflecting
        } else {
            let lambda0 = rates.lambda(0);
            Boundary::Absorbing(&mu0 / (&lambda0 + &mu0))
        };
        Self::new(Family::FromRates(rates), boundary)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn boundary(&self) -> &Boundary {
        &self.boundary
    }

    pub fn is_absorbing(&self) -> bool {
        matches!(self.boundary, Boundary::Absorbing(_))
    }

    /// `p_i` for `i >= 0`.
    pub fn p(&self, i: u64) -> BigRational {
        if i == 0 {
            return match &self.boundary {
                Boundary::Reflecting => BigRational::one(),
                Boundary::Absorbing(q0) => BigRational::one() - q0,
            };
        }
        match &self.family {
            Family::ConstantPq(p) => p.clone(),
            Family::Table { prefix, tail } => prefix.get(i as usize - 1).unwrap_or(tail).clone(),
            Family::FromRates(rates) => {
                let lambda = rates.lambda(i);
                let mu = rates.mu(i);
                &lambda / (&lambda + &mu)
            }
        }
    }

    pub fn q(&self, i: u64) -> BigRational {
        BigRational::one() - self.p(i)
    }

    pub(crate) fn p_f64(&self, i: u64) -> f64 {
        if i == 0 {
            return to_f64(&self.p(0));
        }
        match &self.family {
            Family::ConstantPq(p) => to_f64(p),
            Family::Table { prefix, tail } => to_f64(prefix.get(i as usize - 1).unwrap_or(tail)),
            Family::FromRates(rates) => {
                let lambda = rates.lambda.at_f64(i);
                let mu = rates.mu.at_f64(i);
                if lambda.is_finite() && mu.is_finite() {
                    lambda / (lambda + mu)
                } else {
                    to_f64(&self.p(i))
                }
            }
        }
    }

    /// `q_j / p_j` for `j >= 1`.
    pub(crate) fn ratio(&self, j: u64) -> BigRational {
        debug_assert!(j >= 1);
        match &self.family {
            Family::FromRates(rates) => rates.mu(j) / rates.lambda(j),
            _ => {
                let p = self.p(j);
                (BigRational::one() - &p) / p
            }
        }
    }

    /// `p_0 / q_0`, the weight of the absorbing state in the hitting formulas.
    pub(crate) fn absorbing_weight(&self) -> Result<BigRational> {
        match &self.boundary {
            Boundary::Absorbing(q0) => Ok((BigRational::one() - q0) / q0),
            Boundary::Reflecting => Err(Error::WrongMode("operation requires an absorbing boundary")),
        }
    }
}

/// Probabilities `(p, q)` of moving up and down from state `i`.
pub fn jump_probabilities(spec: &TransitionSpec, i: i64) -> Result<(BigRational, BigRational)> {
    if i < 0 {
        return Err(Error::InvalidState(i));
    }
    let p = spec.p(i as u64);
    let q = BigRational::one() - &p;
    Ok((p, q))
}

/// A finitely supported initial distribution on the non-negative states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInitial", into = "RawInitial")]
pub struct InitialDistribution {
    weights: BTreeMap<u64, BigRational>,
    cumulative: Vec<(f64, u64)>,
}

#[derive(Clone, Serialize, Deserialize)]
struct RawInitial(#[serde(with = "serde_ratio_map")] BTreeMap<u64, BigRational>);

impl TryFrom<RawInitial> for InitialDistribution {
    type Error = Error;

    fn try_from(raw: RawInitial) -> Result<Self> {
        InitialDistribution::new(raw.0)
    }
}

impl From<InitialDistribution> for RawInitial {
    fn from(d: InitialDistribution) -> Self {
        RawInitial(d.weights)
    }
}

impl InitialDistribution {
    pub fn new(weights: BTreeMap<u64, BigRational>) -> Result<Self> {
        let mut total = BigRational::zero();
        for (state, w) in &weights {
            if w.is_negative() {
                return Err(invalid(format!("negative weight at state {state}")));
            }
            total += w;
        }
        if !total.is_one() {
            return Err(invalid(format!("weights sum to {}, not 1", format_ratio(&total))));
        }
        let weights: BTreeMap<u64, BigRational> = weights.into_iter().filter(|(_, w)| !w.is_zero()).collect();
        let mut acc = BigRational::zero();
        let cumulative = weights
            .iter()
            .map(|(state, w)| {
                acc += w;
                (to_f64(&acc), *state)
            })
            .collect();
        Ok(InitialDistribution { weights, cumulative })
    }

    /// Point mass at `state`.
    pub fn delta(state: u64) -> Self {
        let mut weights = BTreeMap::new();
        weights.insert(state, BigRational::one());
        Self::new(weights).expect("point mass is a distribution")
    }

    pub fn weights(&self) -> &BTreeMap<u64, BigRational> {
        &self.weights
    }

    pub fn weight(&self, state: u64) -> BigRational {
        self.weights.get(&state).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn support(&self) -> impl Iterator<Item = u64> + '_ {
        self.weights.keys().copied()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        if self.cumulative.len() == 1 {
            return self.cumulative[0].1;
        }
        let u: f64 = rng.random();
        self.cumulative
            .iter()
            .find(|(c, _)| u < *c)
            .map(|(_, s)| *s)
            .unwrap_or_else(|| self.cumulative.last().expect("non-empty support").1)
    }
}

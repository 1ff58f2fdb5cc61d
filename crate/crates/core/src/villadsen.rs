//! Radius of comparison of random Villadsen algebras.
//!
//! The radius is `R = W0 * 2^(-W)` where `W0` is drawn from a distribution on
//! `{0} U {2^k}` and `W = 0.W_1 W_2 ...` has independent binary digits with
//! `P(W_n = 0) = 1 / (1 + e^(beta / 2^n))`.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ratio::{format_ratio, serde_ratio, serde_ratio_vec, to_f64};

/// Largest number of binary digits that fit in the mantissa of a double.
pub const MAX_BIT_BUDGET: u32 = 53;
const MAX_EXPONENT: i32 = 60;

/// `P(W_n = 0)`.
pub fn bit_probability(beta: f64, n: u32) -> Result<f64> {
    if n == 0 {
        return Err(invalid("digit index starts at 1"));
    }
    Ok(1.0 / (1.0 + (beta / 2f64.powi(n as i32)).exp()))
}

/// Density of `W` on `[0, 1]`.
pub fn w_density(beta: f64, x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(invalid(format!("density argument {x} outside [0,1]")));
    }
    if beta == 0.0 {
        return Ok(1.0);
    }
    Ok(beta * (beta * x).exp() / beta.exp_m1())
}

/// `P(2^(-W) >= x)`.
pub fn g_beta(beta: f64, x: f64) -> f64 {
    if x <= 0.5 {
        1.0
    } else if x >= 1.0 {
        0.0
    } else if beta == 0.0 {
        -x.log2()
    } else {
        (-beta * x.log2()).exp_m1() / beta.exp_m1()
    }
}

/// Distribution of `W0` on `{0} U {2^k : |k| <= 60}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, f64>", into = "BTreeMap<String, f64>")]
pub struct StartDistribution {
    zero: f64,
    /// Weight of `2^k`, keyed by `k`.
    powers: BTreeMap<i32, f64>,
}

impl StartDistribution {
    pub fn new(zero: f64, powers: BTreeMap<i32, f64>) -> Result<Self> {
        if powers.keys().any(|k| k.abs() > MAX_EXPONENT) {
            return Err(invalid(format!("exponents must satisfy |k| <= {MAX_EXPONENT}")));
        }
        if zero < 0.0 || powers.values().any(|w| w.is_nan() || *w < 0.0) {
            return Err(invalid("start weights must be non-negative"));
        }
        let total = zero + powers.values().sum::<f64>();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("start weights sum to {total}, not 1")));
        }
        let powers = powers.into_iter().filter(|(_, w)| *w > 0.0).collect();
        Ok(StartDistribution { zero, powers })
    }

    /// Point mass at `2^k`.
    pub fn power(k: i32) -> Result<Self> {
        Self::new(0.0, BTreeMap::from([(k, 1.0)]))
    }

    /// Point mass at `0`.
    pub fn zero() -> Self {
        StartDistribution {
            zero: 1.0,
            powers: BTreeMap::new(),
        }
    }

    pub fn zero_weight(&self) -> f64 {
        self.zero
    }

    pub fn powers(&self) -> &BTreeMap<i32, f64> {
        &self.powers
    }

    /// `sum_k 2^k pi_{2^k}`.
    pub fn scale(&self) -> f64 {
        self.powers.iter().map(|(k, w)| 2f64.powi(*k) * w).sum()
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = self.zero;
        if u < acc {
            return 0.0;
        }
        for (k, w) in &self.powers {
            acc += w;
            if u < acc {
                return 2f64.powi(*k);
            }
        }
        self.powers.keys().next_back().map_or(0.0, |k| 2f64.powi(*k))
    }
}

fn parse_start_key(key: &str) -> Result<Option<i32>> {
    let key = key.trim();
    if key == "0" {
        return Ok(None);
    }
    if let Some(exp) = key.strip_prefix("2^") {
        return exp
            .trim()
            .parse::<i32>()
            .map(Some)
            .map_err(|_| invalid(format!("bad exponent in start key {key:?}")));
    }
    let value: f64 = key.parse().map_err(|_| invalid(format!("bad start key {key:?}")))?;
    let k = value.log2().round();
    if value > 0.0 && 2f64.powi(k as i32) == value {
        Ok(Some(k as i32))
    } else {
        Err(invalid(format!("start value {key} is neither 0 nor a power of two")))
    }
}

impl TryFrom<BTreeMap<String, f64>> for StartDistribution {
    type Error = Error;

    fn try_from(raw: BTreeMap<String, f64>) -> Result<Self> {
        let mut zero = 0.0;
        let mut powers = BTreeMap::new();
        for (key, w) in raw {
            match parse_start_key(&key)? {
                None => zero += w,
                Some(k) => *powers.entry(k).or_insert(0.0) += w,
            }
        }
        StartDistribution::new(zero, powers)
    }
}

impl From<StartDistribution> for BTreeMap<String, f64> {
    fn from(d: StartDistribution) -> Self {
        let mut out = BTreeMap::new();
        if d.zero > 0.0 {
            out.insert("0".to_string(), d.zero);
        }
        for (k, w) in d.powers {
            out.insert(format!("2^{k}"), w);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaWalkSpec {
    pub beta: f64,
    pub initial: StartDistribution,
    #[serde(default = "default_bit_budget")]
    pub bit_budget: u32,
}

fn default_bit_budget() -> u32 {
    MAX_BIT_BUDGET
}

impl BetaWalkSpec {
    pub fn new(beta: f64, initial: StartDistribution) -> Self {
        BetaWalkSpec {
            beta,
            initial,
            bit_budget: MAX_BIT_BUDGET,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.beta.is_finite() {
            return Err(invalid("beta must be finite"));
        }
        if self.bit_budget == 0 || self.bit_budget > MAX_BIT_BUDGET {
            return Err(invalid(format!("bit budget must lie in 1..={MAX_BIT_BUDGET}")));
        }
        Ok(())
    }
}

/// `P(R >= r)` for `r > 0`.
pub fn ccdf_r(spec: &BetaWalkSpec, r: f64) -> Result<f64> {
    if r.is_nan() || r <= 0.0 {
        return Err(invalid("the radius threshold must be positive"));
    }
    Ok(spec
        .initial
        .powers
        .iter()
        .map(|(k, w)| w * g_beta(spec.beta, r / 2f64.powi(*k)))
        .sum::<f64>()
        .clamp(0.0, 1.0))
}

/// `P(R <= r)`.
pub fn cdf_r(spec: &BetaWalkSpec, r: f64) -> f64 {
    if r < 0.0 {
        0.0
    } else if r == 0.0 {
        spec.initial.zero
    } else {
        1.0 - ccdf_r(spec, r).expect("positive threshold")
    }
}

/// `E(R) / sum_k 2^k pi_{2^k}` as a function of `beta`.
///
/// Written as `beta (e^d - 1) / ((e^beta - 1) d)` with `d = beta - ln 2`,
/// whose removable singularities at `beta = 0` and `d = 0` are filled in
/// by their limits.
pub fn mean_factor(beta: f64) -> f64 {
    let d = beta - LN_2;
    let beta_part = if beta == 0.0 { 1.0 } else { beta / beta.exp_m1() };
    let d_part = if d == 0.0 { 1.0 } else { d.exp_m1() / d };
    beta_part * d_part
}

/// `E(R)`; finite because the start distribution has finite support.
pub fn expected_r(spec: &BetaWalkSpec) -> Result<f64> {
    spec.validate()?;
    Ok(spec.initial.scale() * mean_factor(spec.beta))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocSample {
    pub w0: f64,
    /// Digit `n` sits at bit `bit_budget - n`.
    pub bits: u64,
    pub r: f64,
}

/// Precomputed digit laws for repeated sampling.
#[derive(Clone, Debug)]
pub struct RocSampler {
    spec: BetaWalkSpec,
    p_zero: Vec<f64>,
}

impl RocSampler {
    pub fn new(spec: &BetaWalkSpec) -> Result<Self> {
        spec.validate()?;
        let p_zero = (1..=spec.bit_budget)
            .map(|n| bit_probability(spec.beta, n))
            .collect::<Result<_>>()?;
        Ok(RocSampler {
            spec: spec.clone(),
            p_zero,
        })
    }

    pub fn spec(&self) -> &BetaWalkSpec {
        &self.spec
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> RocSample {
        let w0 = self.spec.initial.sample(rng);
        let mut bits = 0u64;
        for p in &self.p_zero {
            let u: f64 = rng.random();
            bits = (bits << 1) | u64::from(u >= *p);
        }
        let w = bits as f64 / 2f64.powi(self.spec.bit_budget as i32);
        RocSample {
            w0,
            bits,
            r: w0 * (-w).exp2(),
        }
    }
}

pub fn sample_r<R: Rng + ?Sized>(spec: &BetaWalkSpec, rng: &mut R) -> Result<RocSample> {
    Ok(RocSampler::new(spec)?.sample(rng))
}

/// Probabilities `q_i` (`i >= 1`) of the exotic choice at step `i`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QFamily {
    ConstantQ(#[serde(with = "serde_ratio")] BigRational),
    /// `q_1 = 1/2`, then `q_i = 1 - 1/i^2`.
    OneMinusInverseSquare,
    /// `prefix[j]` is `q_{j+1}`; afterwards `q_i = tail`.
    Table {
        #[serde(with = "serde_ratio_vec")]
        prefix: Vec<BigRational>,
        #[serde(with = "serde_ratio")]
        tail: BigRational,
    },
}

impl QFamily {
    pub fn validate(&self) -> Result<()> {
        let check = |q: &BigRational| {
            if q.is_negative() || *q > BigRational::one() {
                Err(invalid(format!("q = {} outside [0,1]", format_ratio(q))))
            } else {
                Ok(())
            }
        };
        match self {
            QFamily::ConstantQ(q) => check(q),
            QFamily::OneMinusInverseSquare => Ok(()),
            QFamily::Table { prefix, tail } => prefix.iter().chain(std::iter::once(tail)).try_for_each(check),
        }
    }

    pub fn q(&self, i: u64) -> BigRational {
        debug_assert!(i >= 1);
        match self {
            QFamily::ConstantQ(q) => q.clone(),
            QFamily::OneMinusInverseSquare => {
                if i == 1 {
                    BigRational::new(1.into(), 2.into())
                } else {
                    let sq = BigInt::from(i) * BigInt::from(i);
                    BigRational::new(&sq - 1, sq)
                }
            }
            QFamily::Table { prefix, tail } => prefix.get(i as usize - 1).unwrap_or(tail).clone(),
        }
    }

    /// `p_i = 1 - q_i`, with `p_0 = 1`.
    pub fn p(&self, i: u64) -> BigRational {
        if i == 0 {
            BigRational::one()
        } else {
            BigRational::one() - self.q(i)
        }
    }

    pub fn q_f64(&self, i: u64) -> f64 {
        match self {
            QFamily::OneMinusInverseSquare if i > 1 => 1.0 - 1.0 / (i as f64 * i as f64),
            _ => to_f64(&self.q(i)),
        }
    }

    /// `prod_{i=from}^{to} q_i`.
    pub fn partial_product(&self, from: u64, to: u64) -> BigRational {
        (from.max(1)..=to).fold(BigRational::one(), |acc, i| acc * self.q(i))
    }

    /// `prod_{i >= from} q_i` in closed form.
    pub fn tail_product(&self, from: u64) -> BigRational {
        let from = from.max(1);
        match self {
            QFamily::ConstantQ(q) => {
                if q.is_one() {
                    BigRational::one()
                } else {
                    BigRational::zero()
                }
            }
            QFamily::OneMinusInverseSquare => {
                // prod_{i>=m} (1 - 1/i^2) = (m-1)/m for m >= 2.
                let head = if from == 1 { self.q(1) } else { BigRational::one() };
                let m = from.max(2);
                head * BigRational::new(BigInt::from(m - 1), BigInt::from(m))
            }
            QFamily::Table { prefix, tail } => {
                if tail.is_one() {
                    self.partial_product(from, prefix.len() as u64)
                } else {
                    BigRational::zero()
                }
            }
        }
    }
}

/// Probability of infinitely many tame choices,
/// `1 - sum_{j >= 0} p_j prod_{i > j} q_i` with `p_0 = 1`.
pub fn zstable_probability(family: &QFamily) -> Result<BigRational> {
    family.validate()?;
    let one = BigRational::one();
    let last_tame: BigRational = match family {
        QFamily::ConstantQ(q) => {
            if q.is_one() {
                one.clone()
            } else {
                BigRational::zero()
            }
        }
        QFamily::OneMinusInverseSquare => {
            // j = 0 and j = 1 give 1/4 each; j >= 2 gives 1/(j(j+1)), summing to 1/2.
            let head = family.p(0) * family.tail_product(1) + family.p(1) * family.tail_product(2);
            head + BigRational::new(1.into(), 2.into())
        }
        QFamily::Table { prefix, tail } => {
            if tail.is_one() {
                (0..=prefix.len() as u64)
                    .map(|j| family.p(j) * family.tail_product(j + 1))
                    .sum()
            } else {
                BigRational::zero()
            }
        }
    };
    Ok(one - last_tame)
}

/// Whether some step `i` in `(lo, hi]` makes the tame choice.
pub fn tame_in_window<R: Rng + ?Sized>(family: &QFamily, lo: u64, hi: u64, rng: &mut R) -> bool {
    ((lo + 1)..=hi).any(|i| {
        let u: f64 = rng.random();
        u >= family.q_f64(i)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::{int, ratio};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
            }
        }
        let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        rec(f, a, b, fa, fm, fb, whole, tol, depth)
    }

    #[test]
    fn digit_probabilities() {
        for n in 1..10 {
            assert_eq!(bit_probability(0.0, n).unwrap(), 0.5);
        }
        assert!(bit_probability(1e4, 1).unwrap() < 1e-300);
        let v = bit_probability(LN_2, 1).unwrap();
        assert!((v - 1.0 / (1.0 + 2f64.sqrt())).abs() < 1e-15);
        assert!((v - 0.414214).abs() < 1e-6);
        assert!(bit_probability(0.0, 0).is_err());
    }

    #[test]
    fn density_values() {
        assert_eq!(w_density(0.0, 0.3).unwrap(), 1.0);
        assert!((w_density(1.0, 0.0).unwrap() - 0.581977).abs() < 1e-6);
        assert!(w_density(1.0, 1.5).is_err());
        for beta in [-2.0, -1.0, 1.0, 2.0] {
            let total = simpson(&|x| w_density(beta, x).unwrap(), 0.0, 1.0, 1e-13, 40);
            assert!((total - 1.0).abs() < 1e-10, "beta={beta}: {total}");
        }
        // Continuity through beta = 0.
        assert!((w_density(1e-12, 0.7).unwrap() - 1.0).abs() < 1e-11);
    }

    #[test]
    fn ccdf_values() {
        let spec = |beta| BetaWalkSpec::new(beta, StartDistribution::power(0).unwrap());
        for beta in [0.0, 1.0, -1.0, LN_2] {
            assert_eq!(ccdf_r(&spec(beta), 0.5).unwrap(), 1.0);
            assert_eq!(ccdf_r(&spec(beta), 0.25).unwrap(), 1.0);
            assert_eq!(ccdf_r(&spec(beta), 1.0).unwrap(), 0.0);
        }
        assert!((ccdf_r(&spec(0.0), 2f64.powf(-0.5)).unwrap() - 0.5).abs() < 1e-15);
        assert!((ccdf_r(&spec(0.0), 0.75).unwrap() - 0.415037).abs() < 1e-6);
        assert!(ccdf_r(&spec(0.0), 0.0).is_err());
    }

    #[test]
    fn ccdf_monotone_and_right_continuous() {
        let init = StartDistribution::new(0.1, BTreeMap::from([(-1, 0.3), (0, 0.4), (2, 0.2)])).unwrap();
        let spec = BetaWalkSpec::new(0.7, init);
        let mut prev = 1.0;
        for i in 1..4000 {
            let r = i as f64 * 0.001;
            let v = ccdf_r(&spec, r).unwrap();
            assert!(v <= prev + 1e-15);
            prev = v;
        }
        for k in [-1i32, 0, 2] {
            for edge in [2f64.powi(k - 1), 2f64.powi(k)] {
                let at = ccdf_r(&spec, edge).unwrap();
                let after = ccdf_r(&spec, edge * (1.0 + 1e-12)).unwrap();
                assert!((at - after).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn mean_values() {
        let spec = |beta, k| BetaWalkSpec::new(beta, StartDistribution::power(k).unwrap());
        assert!((expected_r(&spec(0.0, 0)).unwrap() - 1.0 / 4f64.ln()).abs() < 1e-15);
        assert!((expected_r(&spec(LN_2, 0)).unwrap() - LN_2).abs() < 1e-15);
        let e = std::f64::consts::E;
        let derived = 2.0 * (e - 2.0) / (2.0 * (e - 1.0) * (1.0 - LN_2));
        assert!((expected_r(&spec(1.0, 1)).unwrap() - derived).abs() < 1e-14);
        assert!((derived - 1.3622925).abs() < 1e-6);
        assert_eq!(expected_r(&BetaWalkSpec::new(0.0, StartDistribution::zero())).unwrap(), 0.0);
    }

    #[test]
    fn mean_matches_integrated_ccdf() {
        let init = StartDistribution::new(0.0, BTreeMap::from([(0, 0.5), (1, 0.5)])).unwrap();
        for beta in [-2.0, 0.3, 1.0, LN_2 + 1e-9, LN_2 - 1e-9, 0.0] {
            let spec = BetaWalkSpec::new(beta, init.clone());
            let f = |r: f64| if r <= 0.0 { 1.0 } else { ccdf_r(&spec, r).unwrap() };
            // Integrate piecewise between breakpoints 2^{k-1}, 2^k.
            let cuts = [0.0, 0.5, 1.0, 2.0];
            let integral: f64 = cuts.windows(2).map(|w| simpson(&f, w[0], w[1], 1e-12, 40)).sum();
            let mean = expected_r(&spec).unwrap();
            assert!((integral - mean).abs() < 1e-6, "beta={beta}: {integral} vs {mean}");
        }
    }

    #[test]
    fn sampler_edge_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let zero = BetaWalkSpec::new(0.5, StartDistribution::zero());
        for _ in 0..100 {
            assert_eq!(sample_r(&zero, &mut rng).unwrap().r, 0.0);
        }
        // Huge beta forces every digit to 1 with probability ~1; huge negative to 0.
        let low = BetaWalkSpec::new(-1e300, StartDistribution::power(1).unwrap());
        let s = sample_r(&low, &mut rng).unwrap();
        assert_eq!(s.bits, 0);
        assert_eq!(s.r, 2.0);
        let mut bad = low.clone();
        bad.bit_budget = 54;
        assert!(sample_r(&bad, &mut rng).is_err());
    }

    #[test]
    fn sample_matches_digits() {
        let spec = BetaWalkSpec::new(0.4, StartDistribution::power(0).unwrap());
        let sampler = RocSampler::new(&spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let s = sampler.sample(&mut rng);
            let w: f64 = (1..=53).map(|n| ((s.bits >> (53 - n)) & 1) as f64 / 2f64.powi(n)).sum();
            assert!(w < 1.0);
            assert!((s.r - s.w0 * 2f64.powf(-w)).abs() < 1e-15);
        }
    }

    #[test]
    fn start_distribution_serde() {
        let d: StartDistribution = serde_json::from_str(r#"{"0": 0.25, "2^-1": 0.25, "4": 0.5}"#).unwrap();
        assert_eq!(d.zero_weight(), 0.25);
        assert_eq!(d.powers(), &BTreeMap::from([(-1, 0.25), (2, 0.5)]));
        let back: StartDistribution = serde_json::from_str(&serde_json::to_string(&d).unwrap()).unwrap();
        assert_eq!(back, d);
        assert!(serde_json::from_str::<StartDistribution>(r#"{"3": 1.0}"#).is_err());
        assert!(serde_json::from_str::<StartDistribution>(r#"{"1": 0.5}"#).is_err());
    }

    #[test]
    fn zstable_closed_forms() {
        assert_eq!(zstable_probability(&QFamily::ConstantQ(ratio(1, 2))).unwrap(), int(1));
        assert_eq!(zstable_probability(&QFamily::ConstantQ(ratio(9, 10))).unwrap(), int(1));
        assert_eq!(zstable_probability(&QFamily::ConstantQ(int(1))).unwrap(), int(0));
        assert_eq!(zstable_probability(&QFamily::OneMinusInverseSquare).unwrap(), int(0));
        let finite = QFamily::Table {
            prefix: vec![ratio(1, 3), ratio(1, 2)],
            tail: int(1),
        };
        assert_eq!(zstable_probability(&finite).unwrap(), int(0));
        let mixed = QFamily::Table {
            prefix: vec![int(1), int(1)],
            tail: ratio(1, 2),
        };
        assert_eq!(zstable_probability(&mixed).unwrap(), int(1));
        assert!(zstable_probability(&QFamily::ConstantQ(int(2))).is_err());
    }

    #[test]
    fn inverse_square_products() {
        let fam = QFamily::OneMinusInverseSquare;
        let mut running = BigRational::one();
        for k in 2..=1000u64 {
            running *= fam.q(k);
            // prod_{i=2}^{k} (1 - 1/i^2) = (k+1)/(2k).
            assert_eq!(running, ratio(k as i64 + 1, 2 * k as i64));
        }
        for m in 2..=1000u64 {
            assert_eq!(fam.tail_product(m), ratio(m as i64 - 1, m as i64));
        }
        // The series, summed exactly up to 200 terms, approaches 1.
        let partial: BigRational = (0..=200u64).map(|j| fam.p(j) * fam.tail_product(j + 1)).sum();
        assert_eq!(partial, int(1) - ratio(1, 201));
    }

    #[test]
    fn tame_window_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let half = QFamily::ConstantQ(ratio(1, 2));
        assert!((0..200).all(|_| tame_in_window(&half, 500, 1000, &mut rng)));
        let sober = QFamily::OneMinusInverseSquare;
        let hits = (0..2000).filter(|_| tame_in_window(&sober, 500, 1000, &mut rng)).count();
        assert!(hits < 20);
    }
}

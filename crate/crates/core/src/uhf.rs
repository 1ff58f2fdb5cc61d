//! UHF algebras built from walks on the primes.
//!
//! State `n >= 1` of the walk contributes the `n`-th prime as a tensor
//! factor; states `0` and `-1` contribute the scalars.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigUint;
use num_rational::BigRational;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::markov::{
    absorption_probability, classify_chain, max_at_most, AbsorptionMode, ChainKind, InitialDistribution,
    Probability, StopReason, TransitionSpec, WalkPath, Walker,
};

/// The first `count` primes.
pub fn first_primes(count: usize) -> Vec<u64> {
    if count == 0 {
        return Vec::new();
    }
    // Rosser's bound on the n-th prime, valid for n >= 6.
    let n = count.max(6) as f64;
    let limit = (n * (n.ln() + n.ln().ln())).ceil() as usize + 1;
    let mut composite = vec![false; limit + 1];
    let mut primes = Vec::with_capacity(count);
    for i in 2..=limit {
        if composite[i] {
            continue;
        }
        primes.push(i as u64);
        if primes.len() == count {
            break;
        }
        let mut j = i * i;
        while j <= limit {
            composite[j] = true;
            j += i;
        }
    }
    primes
}

/// `m_n`: `1` for `n in {-1, 0}`, otherwise the `n`-th prime.
pub fn prime_enumeration(n: i64) -> Result<u64> {
    match n {
        n if n < -1 => Err(invalid(format!("prime index {n} must be at least -1"))),
        -1 | 0 => Ok(1),
        n => Ok(*first_primes(n as usize).last().expect("n >= 1 primes")),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Terminal {
    Absorbed,
    Truncated,
}

/// Prime exponents observed along a (possibly truncated) trajectory.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupernaturalNumber {
    pub exponents: BTreeMap<u64, u64>,
    pub trajectory_length: u64,
    pub terminal: Terminal,
}

impl SupernaturalNumber {
    pub fn exponent(&self, prime: u64) -> u64 {
        self.exponents.get(&prime).copied().unwrap_or(0)
    }

    pub fn largest_prime(&self) -> Option<u64> {
        self.exponents.keys().next_back().copied()
    }

    /// Matrix size `N` of the finite algebra `M_N`, once the walk is absorbed.
    pub fn matrix_size(&self) -> Option<BigUint> {
        (self.terminal == Terminal::Absorbed).then(|| {
            self.exponents
                .iter()
                .fold(BigUint::from(1u8), |acc, (p, e)| acc * BigUint::from(*p).pow(*e as u32))
        })
    }
}

impl fmt::Display for SupernaturalNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exponents.is_empty() {
            return f.write_str("1");
        }
        let parts: Vec<String> = self.exponents.iter().map(|(p, e)| format!("{p}^{e}")).collect();
        f.write_str(&parts.join(" "))
    }
}

pub fn build_supernatural(path: &WalkPath) -> SupernaturalNumber {
    let top = path.states.iter().copied().max().unwrap_or(0).max(0) as usize;
    let primes = first_primes(top);
    let mut exponents = BTreeMap::new();
    for &s in &path.states {
        if s >= 1 {
            *exponents.entry(primes[s as usize - 1]).or_insert(0u64) += 1;
        }
    }
    SupernaturalNumber {
        exponents,
        trajectory_length: path.truncated_at,
        terminal: if path.absorbed || path.stop == StopReason::Absorbed {
            Terminal::Absorbed
        } else {
            Terminal::Truncated
        },
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UhfSample {
    pub path: WalkPath,
    pub number: SupernaturalNumber,
}

pub fn sample_uhf<R: Rng + ?Sized>(walker: &Walker, initial: &InitialDistribution, rng: &mut R) -> UhfSample {
    let path = walker.sample_path(initial, rng);
    let number = build_supernatural(&path);
    UhfSample { path, number }
}

/// Probability that the algebra is a finite matrix algebra.
pub fn prob_finite_dimensional(spec: &TransitionSpec, initial: &InitialDistribution) -> Result<Probability> {
    let mut terms = Vec::new();
    for (state, w) in initial.weights() {
        terms.push((w, absorption_probability(spec, *state, AbsorptionMode::AbsorbAtMinusOne)?));
    }
    Ok(Probability::weighted_sum(terms))
}

/// Probability of a finite matrix algebra `M_N` whose largest prime factor
/// is at most the `k`-th prime (`k = 0` means `N = 1`).
pub fn prob_bounded_prime(spec: &TransitionSpec, initial: &InitialDistribution, k: u64) -> Result<BigRational> {
    let mut total = BigRational::from_integer(0.into());
    for (state, w) in initial.weights() {
        total += w * max_at_most(spec, k, *state)?;
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UhfType {
    UniversalQ,
    FiniteType,
    Inconclusive,
}

/// Almost-sure isomorphism type for a reflecting walk.
pub fn classify_uhf_type(spec: &TransitionSpec) -> Result<UhfType> {
    if spec.is_absorbing() {
        return Err(Error::WrongMode("UHF type classification requires a reflecting boundary"));
    }
    Ok(match classify_chain(spec)?.kind {
        ChainKind::PositiveRecurrent | ChainKind::NullRecurrent => UhfType::UniversalQ,
        ChainKind::Transient => UhfType::FiniteType,
        ChainKind::Inconclusive => UhfType::Inconclusive,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::{max_not_exceeding_probability, Family, Boundary, WalkOptions};
    use crate::ratio::{int, ratio};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sieve_oracle(count: usize) -> Vec<u64> {
        (2u64..).filter(|n| (2..*n).take_while(|d| d * d <= *n).all(|d| n % d != 0)).take(count).collect()
    }

    #[test]
    fn prime_enumeration_values() {
        assert_eq!(prime_enumeration(-1).unwrap(), 1);
        assert_eq!(prime_enumeration(0).unwrap(), 1);
        assert_eq!(prime_enumeration(3).unwrap(), 5);
        assert_eq!(prime_enumeration(10).unwrap(), 29);
        assert!(prime_enumeration(-2).is_err());
        assert_eq!(first_primes(500), sieve_oracle(500));
    }

    fn path(states: Vec<i64>, absorbed: bool) -> WalkPath {
        WalkPath {
            truncated_at: states.len() as u64 - 1,
            stop: if absorbed { StopReason::Absorbed } else { StopReason::Truncated },
            states,
            absorbed,
        }
    }

    #[test]
    fn supernatural_from_path() {
        let n = build_supernatural(&path(vec![0, 1, 2, 1, 0, -1], true));
        assert_eq!(n.exponents, BTreeMap::from([(2, 2), (3, 1)]));
        assert_eq!(n.terminal, Terminal::Absorbed);
        assert_eq!(n.matrix_size(), Some(BigUint::from(12u8)));
        assert_eq!(n.to_string(), "2^2 3^1");
        let zeros = build_supernatural(&path(vec![0, 0, 0], false));
        assert!(zeros.exponents.is_empty());
        assert_eq!(zeros.to_string(), "1");
        assert_eq!(zeros.matrix_size(), None);
    }

    #[test]
    fn exponent_conservation_on_random_paths() {
        let spec = TransitionSpec::reflecting(ratio(1, 2)).unwrap();
        let walker = Walker::new(&spec, WalkOptions::new(2000)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let s = sample_uhf(&walker, &InitialDistribution::delta(0), &mut rng);
            let total: u64 = s.number.exponents.values().sum();
            let positive = s.path.states.iter().filter(|&&x| x >= 1).count() as u64;
            assert_eq!(total, positive);
            assert_eq!(s.number.exponent(2), s.path.visits(1));
        }
    }

    #[test]
    fn finite_dimensional_probabilities() {
        let spec = TransitionSpec::absorbing(ratio(3, 5), ratio(2, 5)).unwrap();
        let p = prob_finite_dimensional(&spec, &InitialDistribution::delta(0)).unwrap();
        assert_eq!(p, Probability::Exact(ratio(2, 3)));
        let p = prob_finite_dimensional(&spec, &InitialDistribution::delta(1)).unwrap();
        assert_eq!(p, Probability::Exact(ratio(4, 9)));
        let sym = TransitionSpec::absorbing(ratio(1, 2), ratio(1, 2)).unwrap();
        let p = prob_finite_dimensional(&sym, &InitialDistribution::delta(4)).unwrap();
        assert_eq!(p, Probability::Exact(int(1)));
        let refl = TransitionSpec::reflecting(ratio(1, 2)).unwrap();
        assert!(prob_finite_dimensional(&refl, &InitialDistribution::delta(0)).is_err());
    }

    #[test]
    fn bounded_prime_probabilities() {
        let sym = TransitionSpec::absorbing(ratio(1, 2), ratio(1, 2)).unwrap();
        assert_eq!(prob_bounded_prime(&sym, &InitialDistribution::delta(0), 1).unwrap(), ratio(2, 3));
        assert_eq!(prob_bounded_prime(&sym, &InitialDistribution::delta(2), 1).unwrap(), int(0));
        let spec = TransitionSpec::absorbing(ratio(2, 3), ratio(1, 3)).unwrap();
        assert_eq!(
            prob_bounded_prime(&spec, &InitialDistribution::delta(0), 2).unwrap(),
            max_not_exceeding_probability(&spec, 2, 0).unwrap()
        );
    }

    #[test]
    fn bounded_prime_monotone_and_converges() {
        let spec = TransitionSpec::absorbing(ratio(3, 5), ratio(2, 5)).unwrap();
        let init = InitialDistribution::new(BTreeMap::from([(0, ratio(1, 2)), (2, ratio(1, 2))])).unwrap();
        let limit = prob_finite_dimensional(&spec, &init).unwrap();
        let limit = limit.exact().unwrap().clone();
        let mut prev = int(0);
        for k in 0..=64 {
            let v = prob_bounded_prime(&spec, &init, k).unwrap();
            assert!(v >= prev && v <= limit);
            prev = v;
        }
        assert!(crate::ratio::to_f64(&(limit - prev)) < 1e-10);
    }

    #[test]
    fn uhf_type() {
        assert_eq!(
            classify_uhf_type(&TransitionSpec::reflecting(ratio(1, 2)).unwrap()).unwrap(),
            UhfType::UniversalQ
        );
        assert_eq!(
            classify_uhf_type(&TransitionSpec::reflecting(ratio(3, 5)).unwrap()).unwrap(),
            UhfType::FiniteType
        );
        let table = TransitionSpec::new(
            Family::Table {
                prefix: vec![ratio(1, 3), ratio(1, 2)],
                tail: ratio(7, 10),
            },
            Boundary::Reflecting,
        )
        .unwrap();
        assert_eq!(classify_uhf_type(&table).unwrap(), UhfType::FiniteType);
        let abs = TransitionSpec::absorbing(ratio(1, 2), ratio(1, 2)).unwrap();
        assert!(matches!(classify_uhf_type(&abs), Err(Error::WrongMode(_))));
    }
}

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use serde::{Deserialize, Serialize};

use super::group::is_prime;
use crate::error::{invalid, Error, Result};
use crate::ratio::to_f64;

/// Truncation threshold for the infinite products over `k`.
pub const PRODUCT_TERM_CUTOFF: f64 = 1e-13;

/// A finite abelian `p`-group given by its exponent partition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimeComponent {
    pub prime: u64,
    /// `lambda_1 >= lambda_2 >= ... >= 1`; empty for the trivial group.
    pub partition: Vec<u32>,
}

impl PrimeComponent {
    pub fn new(prime: u64, mut partition: Vec<u32>) -> Result<Self> {
        if !is_prime(prime) {
            return Err(Error::Hypothesis(format!("{prime} is not prime")));
        }
        partition.retain(|&l| l > 0);
        partition.sort_unstable_by(|a, b| b.cmp(a));
        Ok(Self { prime, partition })
    }

    pub fn trivial(prime: u64) -> Result<Self> {
        Self::new(prime, Vec::new())
    }

    /// Conjugate partition: `mu_i = #{j : lambda_j >= i}` for `i = 1..=lambda_1`.
    fn conjugate(&self) -> Vec<u64> {
        let top = self.partition.first().copied().unwrap_or(0);
        (1..=top).map(|i| self.partition.iter().filter(|&&l| l >= i).count() as u64).collect()
    }

    /// The weight `N(V)`, exact.
    pub fn weight(&self) -> BigRational {
        let p = BigInt::from(self.prime);
        let mu = self.conjugate();
        let exponent: u64 = mu.iter().map(|m| m * (m + 1) / 2).sum();
        let mut value = BigRational::new(BigInt::one(), p.pow(exponent as u32));
        for (i, &m) in mu.iter().enumerate() {
            let next = mu.get(i + 1).copied().unwrap_or(0);
            for j in 1..=(m - next) / 2 {
                let p2j = p.pow(2 * j as u32);
                // (1 - p^{-2j})^{-1} = p^{2j} / (p^{2j} - 1)
                value *= BigRational::new(p2j.clone(), p2j - 1);
            }
        }
        value
    }
}

/// `prod_{k >= 0} (1 - p^{-2k-1})`, stopping once the factor's deviation from 1
/// falls below [`PRODUCT_TERM_CUTOFF`].
pub fn odd_power_product(prime: u64) -> f64 {
    let p = prime as f64;
    let mut product = 1.0;
    let mut term = 1.0 / p;
    while term >= PRODUCT_TERM_CUTOFF {
        product *= 1.0 - term;
        term /= p * p;
    }
    product
}

/// Limiting probability that the cokernel has, for each listed prime, the
/// given `p`-primary part.
pub fn wood_limit_probability(components: &[PrimeComponent], degree: u64) -> Result<f64> {
    if degree == 0 {
        return Err(invalid("degree must be at least 1"));
    }
    let mut seen = Vec::new();
    let mut value = 1.0;
    for c in components {
        let p = c.prime;
        if p == 2 || !is_prime(p) {
            return Err(Error::Hypothesis(format!("{p} is not an odd prime")));
        }
        if (degree - 1) % p == 0 {
            return Err(Error::Hypothesis(format!("{p} divides degree - 1 = {}", degree - 1)));
        }
        if seen.contains(&p) {
            return Err(Error::Hypothesis(format!("prime {p} listed twice")));
        }
        seen.push(p);
        value *= to_f64(&c.weight()) * odd_power_product(p);
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::ratio;

    /// Finite abelian p-group `Z/p^{l_1} + ...` as mixed-radix vectors.
    struct PGroup {
        orders: Vec<u64>,
    }

    impl PGroup {
        fn new(p: u64, partition: &[u32]) -> Self {
            Self { orders: partition.iter().map(|&l| p.pow(l)).collect() }
        }

        fn elements(&self) -> Vec<Vec<u64>> {
            let mut out = vec![vec![]];
            for &o in &self.orders {
                out = out.into_iter().flat_map(|v| (0..o).map(move |x| [v.clone(), vec![x]].concat())).collect();
            }
            out
        }

        fn size(&self) -> u64 {
            self.orders.iter().product()
        }

        fn add_scaled(&self, acc: &mut [u64], v: &[u64], k: u64) {
            for (i, a) in acc.iter_mut().enumerate() {
                *a = (*a + k * v[i]) % self.orders[i];
            }
        }

        fn automorphisms(&self) -> u64 {
            let elems = self.elements();
            let gens = self.orders.len();
            // Generator i may map to any element whose order divides orders[i].
            let targets: Vec<Vec<&Vec<u64>>> = self
                .orders
                .iter()
                .map(|&o| {
                    elems
                        .iter()
                        .filter(|e| e.iter().zip(&self.orders).all(|(x, m)| (x * o) % m == 0))
                        .collect()
                })
                .collect();
            let mut count = 0;
            let mut choice = vec![0usize; gens];
            loop {
                let mut images = std::collections::HashSet::new();
                for e in &elems {
                    let mut acc = vec![0; gens];
                    for (i, &x) in e.iter().enumerate() {
                        self.add_scaled(&mut acc, targets[i][choice[i]], x);
                    }
                    images.insert(acc);
                }
                if images.len() as u64 == self.size() {
                    count += 1;
                }
                let mut i = 0;
                loop {
                    if i == gens {
                        return count;
                    }
                    choice[i] += 1;
                    if choice[i] < targets[i].len() {
                        break;
                    }
                    choice[i] = 0;
                    i += 1;
                }
            }
        }

        /// Symmetric pairings `V x V -> Q/Z` with trivial radical.
        fn perfect_symmetric_pairings(&self) -> u64 {
            let k = self.orders.len();
            let top = self.orders.iter().copied().max().unwrap_or(1);
            let slots: Vec<(usize, usize, u64)> = (0..k)
                .flat_map(|i| (i..k).map(move |j| (i, j)))
                .map(|(i, j)| (i, j, self.orders[i].min(self.orders[j])))
                .collect();
            let elems = self.elements();
            let mut count = 0;
            let mut values = vec![0u64; slots.len()];
            loop {
                // Pairing value on (e_i, e_j), scaled to denominator `top`.
                let mut b = vec![vec![0u64; k]; k];
                for (s, &(i, j, m)) in slots.iter().enumerate() {
                    b[i][j] = values[s] * (top / m);
                    b[j][i] = b[i][j];
                }
                let radical_trivial = elems.iter().skip(1).all(|v| {
                    (0..k).any(|j| (0..k).map(|i| v[i] * b[i][j]).sum::<u64>() % top != 0)
                });
                if radical_trivial {
                    count += 1;
                }
                let mut s = 0;
                loop {
                    if s == slots.len() {
                        return count;
                    }
                    values[s] += 1;
                    if values[s] < slots[s].2 {
                        break;
                    }
                    values[s] = 0;
                    s += 1;
                }
            }
        }

        fn weight(&self) -> BigRational {
            BigRational::new(
                self.perfect_symmetric_pairings().into(),
                (self.size() * self.automorphisms()).into(),
            )
        }
    }

    #[test]
    fn weight_matches_pairing_count() {
        for (p, partition) in [
            (3, vec![]),
            (3, vec![1]),
            (3, vec![2]),
            (3, vec![1, 1]),
            (3, vec![2, 1]),
            (5, vec![1]),
            (5, vec![1, 1]),
            (3, vec![1, 1, 1]),
        ] {
            let c = PrimeComponent::new(p, partition.clone()).unwrap();
            assert_eq!(c.weight(), PGroup::new(p, &partition).weight(), "p={p} {partition:?}");
        }
    }

    #[test]
    fn weights_by_formula() {
        assert_eq!(PrimeComponent::new(3, vec![1]).unwrap().weight(), ratio(1, 3));
        assert_eq!(PrimeComponent::new(3, vec![1, 1]).unwrap().weight(), ratio(1, 24));
        assert_eq!(PrimeComponent::trivial(7).unwrap().weight(), ratio(1, 1));
    }

    #[test]
    fn limit_values() {
        let partial: f64 = (0..=40).map(|k| 1.0 - 3f64.powi(-2 * k - 1)).product();
        let trivial = wood_limit_probability(&[PrimeComponent::trivial(3).unwrap()], 3).unwrap();
        assert!((trivial - partial).abs() < 1e-12);
        assert!((trivial - 0.6390046).abs() < 1e-7);
        let z3 = wood_limit_probability(&[PrimeComponent::new(3, vec![1]).unwrap()], 3).unwrap();
        assert!((z3 - 0.2130015).abs() < 1e-7);
        let z3sq = wood_limit_probability(&[PrimeComponent::new(3, vec![1, 1]).unwrap()], 3).unwrap();
        assert!((z3sq - 0.0266252).abs() < 1e-7);
    }

    #[test]
    fn hypothesis_violations() {
        let c = |p| PrimeComponent { prime: p, partition: vec![] };
        assert!(matches!(wood_limit_probability(&[c(2)], 4), Err(Error::Hypothesis(_))));
        assert!(matches!(wood_limit_probability(&[c(3)], 4), Err(Error::Hypothesis(_))));
        assert!(matches!(wood_limit_probability(&[c(9)], 3), Err(Error::Hypothesis(_))));
        assert!(matches!(wood_limit_probability(&[c(3), c(3)], 3), Err(Error::Hypothesis(_))));
        assert!(PrimeComponent::new(4, vec![1]).is_err());
        assert!(wood_limit_probability(&[c(3), c(5)], 3).is_ok());
    }

    fn partitions(total: u32, largest: u32) -> Vec<Vec<u32>> {
        if total == 0 {
            return vec![vec![]];
        }
        (1..=largest.min(total))
            .rev()
            .flat_map(|first| partitions(total - first, first).into_iter().map(move |rest| [vec![first], rest].concat()))
            .collect()
    }

    #[test]
    fn small_groups_form_subprobability() {
        let mut sum = 0.0;
        for size in 0..=4 {
            for partition in partitions(size, size) {
                let c = PrimeComponent::new(3, partition).unwrap();
                sum += wood_limit_probability(&[c], 3).unwrap();
            }
        }
        assert!(sum <= 1.0 && sum > 0.99, "{sum}");
    }
}

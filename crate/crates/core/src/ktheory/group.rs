use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::snf::{bigint_strings, normalise_chain};
use crate::error::{invalid, Error, Result};

/// `Z^free_rank + Z/d_1 + ... + Z/d_k` with `d_1 | ... | d_k` and every `d_i >= 2`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GroupRecord", into = "GroupRecord")]
pub struct FiniteAbelianGroup {
    free_rank: usize,
    torsion: Vec<BigInt>,
}

#[derive(Serialize, Deserialize)]
struct GroupRecord {
    free_rank: usize,
    #[serde(with = "bigint_strings")]
    torsion: Vec<BigInt>,
    #[serde(default, skip_deserializing)]
    display: String,
}

impl From<FiniteAbelianGroup> for GroupRecord {
    fn from(g: FiniteAbelianGroup) -> Self {
        GroupRecord {
            display: g.to_string(),
            free_rank: g.free_rank,
            torsion: g.torsion,
        }
    }
}

impl TryFrom<GroupRecord> for FiniteAbelianGroup {
    type Error = Error;
    fn try_from(r: GroupRecord) -> Result<Self> {
        FiniteAbelianGroup::from_cyclic_orders(r.free_rank, r.torsion)
    }
}

impl FiniteAbelianGroup {
    pub fn trivial() -> Self {
        Self { free_rank: 0, torsion: Vec::new() }
    }

    /// Direct sum of `Z^free_rank` and cyclic groups of the given orders, in any order.
    pub fn from_cyclic_orders(free_rank: usize, orders: Vec<BigInt>) -> Result<Self> {
        if let Some(bad) = orders.iter().find(|d| !d.is_positive()) {
            return Err(invalid(format!("cyclic order {bad} must be positive")));
        }
        let mut orders = orders;
        normalise_chain(&mut orders);
        orders.retain(|d| !d.is_one());
        Ok(Self { free_rank, torsion: orders })
    }

    pub fn free_rank(&self) -> usize {
        self.free_rank
    }

    pub fn torsion(&self) -> &[BigInt] {
        &self.torsion
    }

    pub fn is_finite(&self) -> bool {
        self.free_rank == 0
    }

    pub fn is_trivial(&self) -> bool {
        self.free_rank == 0 && self.torsion.is_empty()
    }

    pub fn torsion_order(&self) -> BigInt {
        self.torsion.iter().product()
    }

    /// Exponents `lambda_1 >= lambda_2 >= ...` of the `p`-primary part of the torsion.
    pub fn p_partition(&self, p: u64) -> Result<Vec<u32>> {
        if !is_prime(p) {
            return Err(invalid(format!("{p} is not prime")));
        }
        let p = BigInt::from(p);
        let mut parts: Vec<u32> = self.torsion.iter().map(|d| valuation(d, &p)).filter(|&v| v > 0).collect();
        parts.sort_unstable_by(|a, b| b.cmp(a));
        Ok(parts)
    }

    /// Prime-power decomposition of the torsion, found by trial division up to
    /// `bound`; cofactors with no prime factor below `bound` are returned unsplit.
    pub fn primary_decomposition(&self, bound: u64) -> PrimaryDecomposition {
        let mut parts: BTreeMap<u64, Vec<u32>> = BTreeMap::new();
        let mut unfactored = Vec::new();
        for d in &self.torsion {
            let mut rest = d.clone();
            let mut p = 2u64;
            while p <= bound && rest > BigInt::one() {
                if BigInt::from(p) * BigInt::from(p) > rest {
                    if let Some(q) = rest.to_u64() {
                        parts.entry(q).or_default().push(1);
                        rest = BigInt::one();
                    }
                    break;
                }
                let v = valuation(&rest, &BigInt::from(p));
                if v > 0 {
                    parts.entry(p).or_default().push(v);
                    rest /= BigInt::from(p).pow(v);
                }
                p += if p == 2 { 1 } else { 2 };
            }
            if !rest.is_one() {
                unfactored.push(rest);
            }
        }
        for v in parts.values_mut() {
            v.sort_unstable_by(|a, b| b.cmp(a));
        }
        PrimaryDecomposition { parts, unfactored }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PrimaryDecomposition {
    pub parts: BTreeMap<u64, Vec<u32>>,
    #[serde(with = "bigint_strings")]
    pub unfactored: Vec<BigInt>,
}

impl fmt::Display for FiniteAbelianGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut terms = Vec::new();
        match self.free_rank {
            0 => {}
            1 => terms.push("Z".to_string()),
            s => terms.push(format!("Z^{s}")),
        }
        terms.extend(self.torsion.iter().map(|d| format!("Z/{d}")));
        if terms.is_empty() {
            f.write_str("0")
        } else {
            f.write_str(&terms.join(" + "))
        }
    }
}

impl FromStr for FiniteAbelianGroup {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "0" {
            return Ok(Self::trivial());
        }
        let mut free = 0;
        let mut orders = Vec::new();
        for term in s.split('+').map(str::trim) {
            if term == "Z" {
                free += 1;
            } else if let Some(k) = term.strip_prefix("Z^") {
                free += k.parse::<usize>().map_err(|_| invalid(format!("bad rank in `{term}`")))?;
            } else if let Some(d) = term.strip_prefix("Z/") {
                orders.push(d.parse::<BigInt>().map_err(|_| invalid(format!("bad order in `{term}`")))?);
            } else {
                return Err(invalid(format!("unrecognised group term `{term}`")));
            }
        }
        Self::from_cyclic_orders(free, orders)
    }
}

/// The `p`-primary part of the torsion of `g`.
pub fn sylow_component(g: &FiniteAbelianGroup, p: u64) -> Result<FiniteAbelianGroup> {
    let parts = g.p_partition(p)?;
    let orders = parts.into_iter().map(|e| BigInt::from(p).pow(e)).collect();
    FiniteAbelianGroup::from_cyclic_orders(0, orders)
}

fn valuation(d: &BigInt, p: &BigInt) -> u32 {
    if d.is_zero() {
        return 0;
    }
    let mut v = 0;
    let mut rest = d.clone();
    loop {
        let (q, r) = rest.div_rem(p);
        if !r.is_zero() {
            return v;
        }
        rest = q;
        v += 1;
    }
}

pub(crate) fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d.saturating_mul(d) <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn group(s: &str) -> FiniteAbelianGroup {
        s.parse().unwrap()
    }

    #[test]
    fn display_and_parse() {
        let g = FiniteAbelianGroup::from_cyclic_orders(2, vec![4.into(), 6.into(), 1.into()]).unwrap();
        assert_eq!(g.to_string(), "Z^2 + Z/2 + Z/12");
        assert_eq!(group(&g.to_string()), g);
        assert_eq!(FiniteAbelianGroup::trivial().to_string(), "0");
        assert_eq!(group("Z + Z/3").free_rank(), 1);
        assert!("Q/Z".parse::<FiniteAbelianGroup>().is_err());
    }

    #[test]
    fn sylow_examples() {
        let g = FiniteAbelianGroup::from_cyclic_orders(0, vec![8.into(), 3.into()]).unwrap();
        assert_eq!(sylow_component(&g, 2).unwrap(), group("Z/8"));
        assert!(sylow_component(&FiniteAbelianGroup::trivial(), 3).unwrap().is_trivial());
        assert_eq!(sylow_component(&group("Z/12"), 3).unwrap(), group("Z/3"));
        assert!(sylow_component(&g, 9).is_err());
        assert_eq!(group("Z/9 + Z/3 + Z/5").p_partition(3).unwrap(), vec![2, 1]);
    }

    #[test]
    fn primary_parts() {
        let g = group("Z/12 + Z/360");
        let d = g.primary_decomposition(1000);
        assert_eq!(d.parts, BTreeMap::from([(2, vec![3, 2]), (3, vec![2, 1]), (5, vec![1])]));
        assert!(d.unfactored.is_empty());
        let big = group("Z/1000003");
        assert_eq!(big.primary_decomposition(2000).parts, BTreeMap::from([(1000003, vec![1])]));
        assert_eq!(big.primary_decomposition(10).unfactored, vec![BigInt::from(1000003)]);
        let composite = BigInt::from(1_000_003u64) * BigInt::from(1_000_033u64);
        let g = FiniteAbelianGroup::from_cyclic_orders(0, vec![composite.clone() * 2]).unwrap();
        let d = g.primary_decomposition(100);
        assert_eq!(d.parts, BTreeMap::from([(2, vec![1])]));
        assert_eq!(d.unfactored, vec![composite]);
    }

    #[test]
    fn json_round_trip() {
        let g = group("Z + Z/2 + Z/340282366920938463463374607431768211457");
        let text = serde_json::to_string(&g).unwrap();
        assert!(text.contains("\"display\""));
        assert_eq!(serde_json::from_str::<FiniteAbelianGroup>(&text).unwrap(), g);
    }
}

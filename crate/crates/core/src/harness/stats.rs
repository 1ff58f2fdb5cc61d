use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Closed interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// `z * sqrt(p (1 - p) / n)`.
pub fn binomial_half_width(p: f64, n: u64, z: f64) -> f64 {
    z * (p * (1.0 - p) / n as f64).sqrt()
}

/// Acceptance band for a frequency whose true value lies in `target`.
pub fn binomial_band(target: Interval, n: u64, z: f64) -> Interval {
    Interval::new(
        (target.lo - binomial_half_width(target.lo, n, z)).max(0.0),
        (target.hi + binomial_half_width(target.hi, n, z)).min(1.0),
    )
}

/// Kolmogorov-Smirnov distance between the samples and `cdf`.
/// Atoms of `cdf` are handled through its left limits.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(invalid("KS distance needs at least one sample"));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(invalid("KS distance got a NaN sample"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let x = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == x {
            j += 1;
        }
        let below = i as f64 / n;
        let at = j as f64 / n;
        d = d.max((cdf(next_down(x)) - below).abs()).max((cdf(x) - at).abs());
        i = j;
    }
    Ok(d)
}

fn next_down(x: f64) -> f64 {
    if x == 0.0 {
        -f64::from_bits(1)
    } else if x > 0.0 {
        f64::from_bits(x.to_bits() - 1)
    } else {
        f64::from_bits(x.to_bits() + 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum DistributionRule {
    BinomialCi { z: f64 },
    Ks { threshold: f64 },
}

/// Bucket that collects outcomes with no analytic entry.
pub const OTHER_OUTCOME: &str = "other";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeVerdict {
    pub outcome: String,
    pub count: u64,
    pub empirical: f64,
    pub analytic: f64,
    /// True for the bucket of outcomes that had no analytic entry.
    pub unlisted: bool,
    pub pass: bool,
}

/// Compares observed outcome counts with analytic probabilities. Outcomes
/// missing from `analytic` are pooled into [`OTHER_OUTCOME`], whose analytic
/// mass is whatever `analytic` leaves uncovered.
pub fn compare_distribution(
    counts: &BTreeMap<String, u64>,
    analytic: &BTreeMap<String, f64>,
    rule: DistributionRule,
) -> Result<Vec<OutcomeVerdict>> {
    let total: u64 = counts.values().sum();
    if total == 0 {
        return Err(invalid("no observations to compare"));
    }
    if let Some((k, v)) = analytic.iter().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
        return Err(invalid(format!("analytic probability {v} for `{k}` is outside [0,1]")));
    }
    let n = total as f64;
    let mut rows: Vec<(String, u64, f64, bool)> = analytic
        .iter()
        .map(|(k, p)| (k.clone(), counts.get(k).copied().unwrap_or(0), *p, false))
        .collect();
    let other_count: u64 = counts.iter().filter(|(k, _)| !analytic.contains_key(*k)).map(|(_, c)| c).sum();
    let covered: f64 = analytic.values().sum();
    if other_count > 0 || covered < 1.0 - 1e-12 {
        rows.push((OTHER_OUTCOME.to_string(), other_count, (1.0 - covered).max(0.0), true));
    }

    let pass: Vec<bool> = match rule {
        DistributionRule::BinomialCi { z } => rows
            .iter()
            .map(|(_, c, p, _)| (*c as f64 / n - p).abs() <= binomial_half_width(*p, total, z))
            .collect(),
        DistributionRule::Ks { threshold } => {
            let (mut emp, mut ana, mut d) = (0.0, 0.0, 0.0f64);
            for (_, c, p, _) in &rows {
                emp += *c as f64 / n;
                ana += p;
                d = d.max((emp - ana).abs());
            }
            vec![d <= threshold; rows.len()]
        }
    };
    Ok(rows
        .into_iter()
        .zip(pass)
        .map(|((outcome, count, analytic, unlisted), pass)| OutcomeVerdict {
            outcome,
            count,
            empirical: count as f64 / n,
            analytic,
            unlisted,
            pass,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn coin(heads: u64, n: u64) -> Vec<OutcomeVerdict> {
        let counts = BTreeMap::from([("h".to_string(), heads), ("t".to_string(), n - heads)]);
        let analytic = BTreeMap::from([("h".to_string(), 0.5), ("t".to_string(), 0.5)]);
        compare_distribution(&counts, &analytic, DistributionRule::BinomialCi { z: 3.0 }).unwrap()
    }

    #[test]
    fn binomial_rule() {
        assert!(coin(50_020, 100_000).iter().all(|v| v.pass));
        assert!(coin(52_000, 100_000).iter().all(|v| !v.pass));
    }

    #[test]
    fn unlisted_outcomes_pool_into_other() {
        let counts = BTreeMap::from([("a".to_string(), 90), ("b".to_string(), 6), ("c".to_string(), 4)]);
        let analytic = BTreeMap::from([("a".to_string(), 0.9)]);
        let v = compare_distribution(&counts, &analytic, DistributionRule::BinomialCi { z: 3.0 }).unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!((v[1].outcome.as_str(), v[1].count, v[1].unlisted), (OTHER_OUTCOME, 10, true));
        assert!((v[1].analytic - 0.1).abs() < 1e-12);
        assert!(compare_distribution(&BTreeMap::new(), &analytic, DistributionRule::Ks { threshold: 0.1 }).is_err());
        let bad = BTreeMap::from([("a".to_string(), 1.5)]);
        assert!(compare_distribution(&counts, &bad, DistributionRule::Ks { threshold: 0.1 }).is_err());
    }

    #[test]
    fn categorical_ks() {
        let counts = BTreeMap::from([("1".to_string(), 30), ("2".to_string(), 70)]);
        let analytic = BTreeMap::from([("1".to_string(), 0.25), ("2".to_string(), 0.75)]);
        let v = compare_distribution(&counts, &analytic, DistributionRule::Ks { threshold: 0.06 }).unwrap();
        assert!(v.iter().all(|x| x.pass));
        let v = compare_distribution(&counts, &analytic, DistributionRule::Ks { threshold: 0.04 }).unwrap();
        assert!(v.iter().all(|x| !x.pass));
    }

    #[test]
    fn ks_on_uniform_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let samples: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>()).collect();
        let d = ks_distance(&samples, |x| x.clamp(0.0, 1.0)).unwrap();
        // 99.9% quantile of the KS statistic is about 1.95 / sqrt(n).
        assert!(d < 1.95 / (100_000f64).sqrt(), "{d}");
        let shifted = ks_distance(&samples, |x| (x - 0.05).clamp(0.0, 1.0)).unwrap();
        assert!(shifted > 0.04);
    }

    #[test]
    fn ks_with_an_atom() {
        // Half the mass at zero, the rest uniform on (0, 1].
        let cdf = |x: f64| if x < 0.0 { 0.0 } else { (0.5 + 0.5 * x).min(1.0) };
        let samples = [0.0, 0.0, 0.25, 0.75];
        let d = ks_distance(&samples, cdf).unwrap();
        assert!((d - 0.125).abs() < 1e-12, "{d}");
        assert!(ks_distance(&[], cdf).is_err());
        assert!(ks_distance(&[f64::NAN], cdf).is_err());
    }

    #[test]
    fn band_covers_interval() {
        let b = binomial_band(Interval::new(0.4, 0.5), 10_000, 3.0);
        assert!((b.lo - (0.4 - 0.0147)).abs() < 1e-4 && (b.hi - 0.515).abs() < 1e-12);
        assert_eq!(binomial_band(Interval::point(1.0), 10, 3.0), Interval::point(1.0));
    }
}

//! Simulation of the jump chain.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::series::{absorption_probability, b_series_decision, AbsorptionMode, Decision};
use super::{InitialDistribution, TransitionSpec};
use crate::error::{invalid, Result};

/// Largest escape level searched for.
const ESCAPE_SEARCH_LIMIT: u64 = 4096;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalkOptions {
    pub max_steps: u64,
    /// Declare escape once the residual absorption probability from the
    /// current state is below this value. Only used with an absorbing boundary.
    pub escape_epsilon: Option<f64>,
    /// Stop as soon as the walk reaches a state strictly above this bound.
    pub stop_above: Option<u64>,
}

impl WalkOptions {
    pub fn new(max_steps: u64) -> Self {
        WalkOptions {
            max_steps,
            escape_epsilon: None,
            stop_above: None,
        }
    }

    pub fn with_escape(mut self, epsilon: f64) -> Self {
        self.escape_epsilon = Some(epsilon);
        self
    }

    pub fn with_stop_above(mut self, bound: u64) -> Self {
        self.stop_above = Some(bound);
        self
    }
}

impl Default for WalkOptions {
    fn default() -> Self {
        WalkOptions::new(100_000).with_escape(1e-6)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Absorbed,
    Escaped,
    ExceededBound,
    Truncated,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkPath {
    pub states: Vec<i64>,
    pub absorbed: bool,
    /// Number of steps taken.
    pub truncated_at: u64,
    pub stop: StopReason,
}

impl WalkPath {
    /// Number of indices at which the path sits in `state`.
    pub fn visits(&self, state: i64) -> u64 {
        self.states.iter().filter(|&&s| s == state).count() as u64
    }

    pub fn max_state(&self) -> i64 {
        self.states.iter().copied().max().unwrap_or(-1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkSummary {
    pub start: u64,
    pub final_state: i64,
    pub steps: u64,
    pub max_state: i64,
    pub stop: StopReason,
}

impl WalkSummary {
    pub fn absorbed(&self) -> bool {
        self.stop == StopReason::Absorbed
    }
}

/// A chain together with its stopping rules.
#[derive(Clone, Debug)]
pub struct Walker {
    spec: TransitionSpec,
    options: WalkOptions,
    escape_level: Option<u64>,
}

impl Walker {
    pub fn new(spec: &TransitionSpec, options: WalkOptions) -> Result<Self> {
        if options.max_steps == 0 {
            return Err(invalid("max_steps must be at least 1"));
        }
        let escape_level = match options.escape_epsilon {
            Some(eps) if spec.is_absorbing() => {
                if !(eps > 0.0 && eps < 1.0) {
                    return Err(invalid("escape epsilon must lie in (0,1)"));
                }
                find_escape_level(spec, eps)?
            }
            _ => None,
        };
        Ok(Walker {
            spec: spec.clone(),
            options,
            escape_level,
        })
    }

    pub fn spec(&self) -> &TransitionSpec {
        &self.spec
    }

    pub fn options(&self) -> &WalkOptions {
        &self.options
    }

    /// Smallest state from which absorption has probability below epsilon.
    pub fn escape_level(&self) -> Option<u64> {
        self.escape_level
    }

    fn run<R: Rng + ?Sized>(&self, start: u64, rng: &mut R, mut visit: impl FnMut(i64)) -> WalkSummary {
        let mut state = start as i64;
        let mut steps = 0u64;
        let mut max_state = state;
        visit(state);
        let stop = loop {
            if state < 0 {
                break StopReason::Absorbed;
            }
            if let Some(bound) = self.options.stop_above {
                if state as u64 > bound {
                    break StopReason::ExceededBound;
                }
            }
            if let Some(level) = self.escape_level {
                if state as u64 >= level {
                    break StopReason::Escaped;
                }
            }
            if steps >= self.options.max_steps {
                break StopReason::Truncated;
            }
            let p = self.spec.p_f64(state as u64);
            let u: f64 = rng.random();
            state += if u < p { 1 } else { -1 };
            steps += 1;
            max_state = max_state.max(state);
            visit(state);
        };
        WalkSummary {
            start,
            final_state: state,
            steps,
            max_state,
            stop,
        }
    }

    pub fn summary<R: Rng + ?Sized>(&self, start: u64, rng: &mut R) -> WalkSummary {
        self.run(start, rng, |_| {})
    }

    pub fn path<R: Rng + ?Sized>(&self, start: u64, rng: &mut R) -> WalkPath {
        let mut states = Vec::new();
        let summary = self.run(start, rng, |s| states.push(s));
        WalkPath {
            states,
            absorbed: summary.absorbed(),
            truncated_at: summary.steps,
            stop: summary.stop,
        }
    }

    pub fn sample_summary<R: Rng + ?Sized>(&self, initial: &InitialDistribution, rng: &mut R) -> WalkSummary {
        let start = initial.sample(rng);
        self.summary(start, rng)
    }

    pub fn sample_path<R: Rng + ?Sized>(&self, initial: &InitialDistribution, rng: &mut R) -> WalkPath {
        let start = initial.sample(rng);
        self.path(start, rng)
    }
}

fn find_escape_level(spec: &TransitionSpec, eps: f64) -> Result<Option<u64>> {
    if b_series_decision(&spec.ratio_tail().shape) != Decision::Converges {
        return Ok(None);
    }
    for level in 0..=ESCAPE_SEARCH_LIMIT {
        let p = absorption_probability(spec, level, AbsorptionMode::AbsorbAtMinusOne)?;
        if p.hi() < eps {
            return Ok(Some(level));
        }
    }
    Ok(None)
}

/// A full path from a start drawn from `initial`, with no escape rule.
pub fn simulate_path<R: Rng + ?Sized>(
    spec: &TransitionSpec,
    initial: &InitialDistribution,
    max_steps: u64,
    rng: &mut R,
) -> Result<WalkPath> {
    let walker = Walker::new(spec, WalkOptions::new(max_steps))?;
    Ok(walker.sample_path(initial, rng))
}

/// Probability of absorption at `-1` within `steps` steps from `start`,
/// by dynamic programming over the state distribution.
pub fn finite_horizon_absorption(spec: &TransitionSpec, start: u64, steps: u64) -> Result<f64> {
    if !spec.is_absorbing() {
        return Ok(0.0);
    }
    let width = (start + steps + 2) as usize;
    let p: Vec<f64> = (0..width as u64).map(|i| spec.p_f64(i)).collect();
    let mut mass = vec![0.0f64; width];
    let mut next = vec![0.0f64; width];
    mass[start as usize] = 1.0;
    let mut absorbed = 0.0;
    // After t steps the walk lies in [max(0, start - t), start + t].
    for t in 0..steps {
        let lo = start.saturating_sub(t) as usize;
        let hi = (start + t) as usize;
        next[lo.saturating_sub(1)..=hi + 1].iter_mut().for_each(|v| *v = 0.0);
        for s in lo..=hi {
            let m = mass[s];
            if m == 0.0 {
                continue;
            }
            next[s + 1] += m * p[s];
            if s == 0 {
                absorbed += m * (1.0 - p[0]);
            } else {
                next[s - 1] += m * (1.0 - p[s]);
            }
        }
        std::mem::swap(&mut mass, &mut next);
    }
    Ok(absorbed.min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::{int, ratio};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn nearly_deterministic_upward_walk() {
        let p = int(1) - ratio(1, 1_000_000_000_000);
        let spec = TransitionSpec::reflecting(p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let path = simulate_path(&spec, &InitialDistribution::delta(0), 3, &mut rng).unwrap();
        assert_eq!(path.states, vec![0, 1, 2, 3]);
        assert!(!path.absorbed);
        assert_eq!(path.stop, StopReason::Truncated);
    }

    #[test]
    fn forced_absorption_from_zero() {
        let spec = TransitionSpec::absorbing(ratio(1, 2), int(1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let path = simulate_path(&spec, &InitialDistribution::delta(0), 50, &mut rng).unwrap();
        assert_eq!(path.states, vec![0, -1]);
        assert!(path.absorbed);
    }

    #[test]
    fn zero_steps_rejected() {
        let spec = TransitionSpec::reflecting(ratio(1, 2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(simulate_path(&spec, &InitialDistribution::delta(0), 0, &mut rng).is_err());
    }

    #[test]
    fn equal_seeds_equal_paths() {
        let spec = TransitionSpec::absorbing(ratio(1, 2), ratio(1, 2)).unwrap();
        let init = InitialDistribution::delta(3);
        let a = simulate_path(&spec, &init, 500, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = simulate_path(&spec, &init, 500, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn path_steps_are_unit() {
        let spec = TransitionSpec::absorbing(ratio(2, 5), ratio(1, 3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let path = simulate_path(&spec, &InitialDistribution::delta(2), 300, &mut rng).unwrap();
            assert!(path.states.windows(2).all(|w| (w[0] - w[1]).abs() == 1));
            let first_absorbed = path.states.iter().position(|&s| s == -1);
            if let Some(idx) = first_absorbed {
                assert_eq!(idx, path.states.len() - 1);
            }
        }
    }

    #[test]
    fn escape_level_for_drunkard() {
        // (2/3)^{L+1} < 1e-6 first at L = 34.
        let spec = TransitionSpec::absorbing(ratio(3, 5), ratio(2, 5)).unwrap();
        let walker = Walker::new(&spec, WalkOptions::new(10).with_escape(1e-6)).unwrap();
        assert_eq!(walker.escape_level(), Some(34));
        let sym = TransitionSpec::absorbing(ratio(1, 2), ratio(1, 2)).unwrap();
        let walker = Walker::new(&sym, WalkOptions::new(10).with_escape(1e-6)).unwrap();
        assert_eq!(walker.escape_level(), None);
    }

    #[test]
    fn stop_above_halts_on_exceeding() {
        let spec = TransitionSpec::reflecting(int(1) - ratio(1, 1_000_000_000_000)).unwrap();
        let walker = Walker::new(&spec, WalkOptions::new(100).with_stop_above(2)).unwrap();
        let s = walker.summary(0, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(s.stop, StopReason::ExceededBound);
        assert_eq!(s.final_state, 3);
        assert_eq!(s.steps, 3);
    }

    #[test]
    fn finite_horizon_small_cases() {
        let spec = TransitionSpec::absorbing(ratio(1, 2), ratio(1, 2)).unwrap();
        assert_eq!(finite_horizon_absorption(&spec, 0, 1).unwrap(), 0.5);
        // 0 -> -1, or 0 -> 1 -> 0 -> -1.
        assert!((finite_horizon_absorption(&spec, 0, 3).unwrap() - 0.625).abs() < 1e-15);
        let long = finite_horizon_absorption(&spec, 0, 20_000).unwrap();
        assert!(long < 1.0 && long > 0.99);
        let reflecting = TransitionSpec::reflecting(ratio(1, 2)).unwrap();
        assert_eq!(finite_horizon_absorption(&reflecting, 0, 10).unwrap(), 0.0);
    }
}

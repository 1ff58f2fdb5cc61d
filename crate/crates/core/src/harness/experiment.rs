use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::path::Path;
use std::time::Instant;

use num_rational::BigRational;
use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::report::{round_sig, ComparisonRecord, Report};
use super::seed::{trial_rng, GENERATOR};
use super::stats::{binomial_band, ks_distance, Interval};
use crate::error::{Error, Result};
use crate::graphs::{double_to_digraph, kirchberg_predicates, sample_regular_multigraph};
use crate::ktheory::{k_groups, wood_limit_probability, PrimeComponent};
use crate::markov::{
    absorption_probability, finite_horizon_absorption, max_not_exceeding_probability, AbsorptionMode,
    InitialDistribution, Probability, StopReason, TransitionSpec, WalkOptions, WalkSummary, Walker,
};
use crate::ratio::{format_ratio, to_f64};
use crate::simplex::{extremal_traces_at_most_prob, tower_from_path, Measure};
use crate::uhf::{build_supernatural, prob_bounded_prime, prob_finite_dimensional};
use crate::villadsen::{ccdf_r, cdf_r, expected_r, zstable_probability, BetaWalkSpec, QFamily, RocSampler};

/// Trials per work unit. Fixed so that results do not depend on the thread count.
const CHUNK: u64 = 1024;

/// Largest horizon used when computing the finite-time absorption deficit.
const DEFICIT_HORIZON_CAP: u64 = 10_000;

fn default_keep_samples() -> usize {
    10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub name: String,
    pub construction: Construction,
    pub trials: u64,
    pub master_seed: u64,
    #[serde(default)]
    pub comparisons: Vec<Comparison>,
    /// Number of leading trials echoed in the report.
    #[serde(default = "default_keep_samples")]
    pub keep_samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Construction {
    MarkovOnly {
        chain: TransitionSpec,
        initial: InitialDistribution,
        #[serde(default)]
        walk: WalkOptions,
    },
    Uhf {
        chain: TransitionSpec,
        initial: InitialDistribution,
        #[serde(default)]
        walk: WalkOptions,
    },
    Simplex {
        chain: TransitionSpec,
        initial: InitialDistribution,
        measure: Measure,
        #[serde(default)]
        walk: WalkOptions,
    },
    Villadsen {
        walk: BetaWalkSpec,
    },
    Zstable {
        family: QFamily,
        /// Choices `lo + 1 ..= hi` are simulated.
        window: [u64; 2],
    },
    GraphKtheory {
        vertices: usize,
        degree: usize,
    },
}

impl Construction {
    pub fn label(&self) -> &'static str {
        match self {
            Construction::MarkovOnly { .. } => "markov_only",
            Construction::Uhf { .. } => "uhf",
            Construction::Simplex { .. } => "simplex",
            Construction::Villadsen { .. } => "villadsen",
            Construction::Zstable { .. } => "zstable",
            Construction::GraphKtheory { .. } => "graph_ktheory",
        }
    }
}

/// Observable computed from each trial; each one names the analytic
/// operation it is checked against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stat", rename_all = "snake_case")]
pub enum Statistic {
    /// Absorption at `-1`.
    Absorbed,
    /// Absorbed without the walk ever exceeding `k`.
    MaxAtMost { k: u64 },
    /// The UHF algebra is a matrix algebra.
    FiniteDimensional,
    /// Matrix algebra whose largest prime is at most the `k`-th prime.
    BoundedPrime { k: u64 },
    /// Limit simplex with at most `k` extreme points.
    ExtremalTracesAtMost { k: u64 },
    /// `R >= r`.
    RadiusAtLeast { r: f64 },
    RadiusMean,
    /// KS distance of the sampled radii to the analytic CDF.
    RadiusKs,
    /// A tame choice occurs inside the simulated window.
    TameInWindow,
    Simple,
    PurelyInfinite,
    /// `K_0` is finite and its `p`-primary part has this partition.
    SylowIs { prime: u64, partition: Vec<u32> },
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statistic::Absorbed => write!(f, "absorbed"),
            Statistic::MaxAtMost { k } => write!(f, "max_at_most(k={k})"),
            Statistic::FiniteDimensional => write!(f, "finite_dimensional"),
            Statistic::BoundedPrime { k } => write!(f, "bounded_prime(k={k})"),
            Statistic::ExtremalTracesAtMost { k } => write!(f, "extremal_traces_at_most(k={k})"),
            Statistic::RadiusAtLeast { r } => write!(f, "radius_at_least(r={r})"),
            Statistic::RadiusMean => write!(f, "radius_mean"),
            Statistic::RadiusKs => write!(f, "radius_ks"),
            Statistic::TameInWindow => write!(f, "tame_in_window"),
            Statistic::Simple => write!(f, "simple"),
            Statistic::PurelyInfinite => write!(f, "purely_infinite"),
            Statistic::SylowIs { prime, partition } => write!(f, "sylow_is(p={prime}, partition={partition:?})"),
        }
    }
}

impl Statistic {
    /// Module operation supplying the analytic target, as `module::function`.
    pub fn operation(&self) -> &'static str {
        match self {
            Statistic::Absorbed => "markov::absorption_probability",
            Statistic::MaxAtMost { .. } => "markov::max_not_exceeding_probability",
            Statistic::FiniteDimensional => "uhf::prob_finite_dimensional",
            Statistic::BoundedPrime { .. } => "uhf::prob_bounded_prime",
            Statistic::ExtremalTracesAtMost { .. } => "simplex::extremal_traces_at_most_prob",
            Statistic::RadiusAtLeast { .. } => "villadsen::ccdf_r",
            Statistic::RadiusMean => "villadsen::expected_r",
            Statistic::RadiusKs => "villadsen::cdf_r",
            Statistic::TameInWindow => "villadsen::zstable_probability",
            Statistic::Simple | Statistic::PurelyInfinite => "graphs::kirchberg_predicates",
            Statistic::SylowIs { .. } => "ktheory::wood_limit_probability",
        }
    }

    fn is_scalar(&self) -> bool {
        matches!(self, Statistic::RadiusMean | Statistic::RadiusKs)
    }

    fn fits(&self, construction: &Construction) -> bool {
        use Statistic as S;
        match construction {
            Construction::MarkovOnly { .. } => matches!(self, S::Absorbed | S::MaxAtMost { .. }),
            Construction::Uhf { .. } => matches!(self, S::FiniteDimensional | S::BoundedPrime { .. }),
            Construction::Simplex { .. } => matches!(self, S::ExtremalTracesAtMost { .. }),
            Construction::Villadsen { .. } => {
                matches!(self, S::RadiusAtLeast { .. } | S::RadiusMean | S::RadiusKs)
            }
            Construction::Zstable { .. } => matches!(self, S::TameInWindow),
            Construction::GraphKtheory { .. } => matches!(self, S::Simple | S::PurelyInfinite | S::SylowIs { .. }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum Tolerance {
    /// `z` standard errors around the analytic value.
    Binomial { z: f64 },
    Absolute { tol: f64 },
    /// Upper bound on the KS distance.
    Ks { threshold: f64 },
    AtLeast { value: f64 },
    AtMost { value: f64 },
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance::Binomial { z: 3.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    #[serde(flatten)]
    pub statistic: Statistic,
    #[serde(default)]
    pub tolerance: Tolerance,
}

impl ExperimentSpec {
    /// Parses a JSON config; errors carry the line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = serde_json::from_str(text).map_err(|e| Error::Config {
            location: format!("line {}, column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config { location, message } => Error::Config {
                location: format!("{}: {location}", path.display()),
                message,
            },
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let config = |location: String, message: String| Error::Config { location, message };
        if self.trials == 0 {
            return Err(config("trials".into(), "at least one trial is required".into()));
        }
        match &self.construction {
            Construction::Zstable { window: [lo, hi], family } => {
                family.validate()?;
                if lo >= hi {
                    return Err(config("construction.window".into(), "window must satisfy lo < hi".into()));
                }
            }
            Construction::GraphKtheory { vertices, degree } => {
                if *vertices < 2 || vertices % 2 == 1 || *degree == 0 {
                    return Err(config(
                        "construction".into(),
                        "graphs need an even vertex count >= 2 and degree >= 1".into(),
                    ));
                }
            }
            Construction::Villadsen { walk } => walk.validate()?,
            _ => {}
        }
        let stop_above = match &self.construction {
            Construction::MarkovOnly { walk, .. } | Construction::Uhf { walk, .. } | Construction::Simplex { walk, .. } => {
                if walk.max_steps == 0 {
                    return Err(config("construction.walk.max_steps".into(), "must be at least 1".into()));
                }
                walk.stop_above
            }
            _ => None,
        };
        for (i, c) in self.comparisons.iter().enumerate() {
            let location = format!("comparisons[{i}]");
            if !c.statistic.fits(&self.construction) {
                return Err(config(
                    location,
                    format!("statistic `{}` does not apply to a {} experiment", c.statistic, self.construction.label()),
                ));
            }
            let ks_stat = matches!(c.statistic, Statistic::RadiusKs);
            let ks_rule = matches!(c.tolerance, Tolerance::Ks { .. });
            if ks_stat != ks_rule {
                return Err(config(location, "the KS rule goes with the radius_ks statistic only".into()));
            }
            if let (Some(bound), Statistic::Absorbed | Statistic::FiniteDimensional) = (stop_above, &c.statistic) {
                return Err(config(
                    location,
                    format!("absorption cannot be observed when walks stop above {bound}"),
                ));
            }
            let needed = match c.statistic {
                Statistic::MaxAtMost { k } | Statistic::BoundedPrime { k } => Some(k),
                Statistic::ExtremalTracesAtMost { k } => Some(k.saturating_sub(1)),
                _ => None,
            };
            if let (Some(bound), Some(k)) = (stop_above, needed) {
                if bound < k {
                    return Err(config(location, format!("walks stop above {bound}, below the bound {k}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    /// Include wall-clock runtime. Off by default so reports are reproducible byte for byte.
    pub record_runtime: bool,
}

/// Everything observed in one trial.
#[derive(Default)]
struct Observation {
    walk: Option<WalkSummary>,
    radius: Option<f64>,
    tame: Option<bool>,
    simple: Option<bool>,
    purely_infinite: Option<bool>,
    k0_finite: bool,
    sylow: BTreeMap<u64, Vec<u32>>,
    record: Option<Value>,
}

impl Observation {
    fn indicator(&self, stat: &Statistic) -> bool {
        let walk_max = |k: u64| self.walk.as_ref().is_some_and(|w| w.absorbed() && w.max_state <= k as i64);
        match stat {
            Statistic::Absorbed | Statistic::FiniteDimensional => self.walk.as_ref().is_some_and(WalkSummary::absorbed),
            Statistic::MaxAtMost { k } | Statistic::BoundedPrime { k } => walk_max(*k),
            Statistic::ExtremalTracesAtMost { k } => *k >= 1 && walk_max(k - 1),
            Statistic::RadiusAtLeast { r } => self.radius.is_some_and(|x| x >= *r),
            Statistic::TameInWindow => self.tame == Some(true),
            Statistic::Simple => self.simple == Some(true),
            Statistic::PurelyInfinite => self.purely_infinite == Some(true),
            Statistic::SylowIs { prime, partition } => {
                let mut want = partition.clone();
                want.retain(|&l| l > 0);
                want.sort_unstable_by(|a, b| b.cmp(a));
                self.k0_finite && self.sylow.get(prime) == Some(&want)
            }
            Statistic::RadiusMean | Statistic::RadiusKs => false,
        }
    }
}

#[derive(Clone, Debug)]
enum StatTally {
    Count { hits: u64 },
    Scalar { sum: f64, sum_sq: f64, values: Option<Vec<f64>> },
}

#[derive(Clone, Debug)]
struct Tally {
    trials: u64,
    stats: Vec<StatTally>,
    diagnostics: BTreeMap<String, u64>,
    samples: Vec<Value>,
}

impl Tally {
    fn empty(comparisons: &[Comparison]) -> Self {
        Tally {
            trials: 0,
            stats: comparisons
                .iter()
                .map(|c| match c.statistic {
                    Statistic::RadiusMean => StatTally::Scalar { sum: 0.0, sum_sq: 0.0, values: None },
                    Statistic::RadiusKs => StatTally::Scalar { sum: 0.0, sum_sq: 0.0, values: Some(Vec::new()) },
                    _ => StatTally::Count { hits: 0 },
                })
                .collect(),
            diagnostics: BTreeMap::new(),
            samples: Vec::new(),
        }
    }

    fn absorb(&mut self, comparisons: &[Comparison], obs: Observation) {
        self.trials += 1;
        for (tally, c) in self.stats.iter_mut().zip(comparisons) {
            match tally {
                StatTally::Count { hits } => *hits += u64::from(obs.indicator(&c.statistic)),
                StatTally::Scalar { sum, sum_sq, values } => {
                    let x = obs.radius.unwrap_or(0.0);
                    *sum += x;
                    *sum_sq += x * x;
                    if let Some(v) = values {
                        v.push(x);
                    }
                }
            }
        }
        let mut bump = |key: &str| *self.diagnostics.entry(key.to_string()).or_insert(0) += 1;
        if let Some(w) = &obs.walk {
            bump(match w.stop {
                StopReason::Absorbed => "walks_absorbed",
                StopReason::Escaped => "walks_escaped",
                StopReason::ExceededBound => "walks_exceeded_bound",
                StopReason::Truncated => "walks_truncated",
            });
        }
        if obs.simple == Some(false) {
            bump("graphs_not_simple");
        }
        if obs.simple.is_some() && !obs.k0_finite {
            bump("graphs_k0_infinite");
        }
        if let Some(record) = obs.record {
            self.samples.push(record);
        }
    }

    /// Appends `other`, which must cover the trials right after `self`.
    fn merge(mut self, other: Tally) -> Tally {
        self.trials += other.trials;
        for (a, b) in self.stats.iter_mut().zip(other.stats) {
            match (a, b) {
                (StatTally::Count { hits }, StatTally::Count { hits: h }) => *hits += h,
                (
                    StatTally::Scalar { sum, sum_sq, values },
                    StatTally::Scalar { sum: s, sum_sq: q, values: v },
                ) => {
                    *sum += s;
                    *sum_sq += q;
                    if let (Some(values), Some(v)) = (values, v) {
                        values.extend(v);
                    }
                }
                _ => unreachable!("tallies built from the same comparisons"),
            }
        }
        for (k, v) in other.diagnostics {
            *self.diagnostics.entry(k).or_insert(0) += v;
        }
        self.samples.extend(other.samples);
        self
    }
}

enum Prepared {
    Walk {
        walker: Walker,
        initial: InitialDistribution,
        kind: WalkKind,
    },
    Radius(RocSampler),
    Tame {
        family: QFamily,
        lo: u64,
        hi: u64,
    },
    Graph {
        vertices: usize,
        degree: usize,
        primes: Vec<u64>,
    },
}

#[derive(Clone, Copy)]
enum WalkKind {
    Markov,
    Uhf,
    Simplex(Measure),
}

impl Prepared {
    fn new(spec: &ExperimentSpec) -> Result<Self> {
        let walk = |chain: &TransitionSpec, initial: &InitialDistribution, options: &WalkOptions, kind| {
            Ok::<_, Error>(Prepared::Walk {
                walker: Walker::new(chain, options.clone())?,
                initial: initial.clone(),
                kind,
            })
        };
        match &spec.construction {
            Construction::MarkovOnly { chain, initial, walk: w } => walk(chain, initial, w, WalkKind::Markov),
            Construction::Uhf { chain, initial, walk: w } => walk(chain, initial, w, WalkKind::Uhf),
            Construction::Simplex { chain, initial, measure, walk: w } => {
                walk(chain, initial, w, WalkKind::Simplex(*measure))
            }
            Construction::Villadsen { walk } => Ok(Prepared::Radius(RocSampler::new(walk)?)),
            Construction::Zstable { family, window } => Ok(Prepared::Tame {
                family: family.clone(),
                lo: window[0],
                hi: window[1],
            }),
            Construction::GraphKtheory { vertices, degree } => {
                let mut primes: Vec<u64> = spec
                    .comparisons
                    .iter()
                    .filter_map(|c| match c.statistic {
                        Statistic::SylowIs { prime, .. } => Some(prime),
                        _ => None,
                    })
                    .collect();
                primes.sort_unstable();
                primes.dedup();
                Ok(Prepared::Graph {
                    vertices: *vertices,
                    degree: *degree,
                    primes,
                })
            }
        }
    }

    fn observe(&self, master_seed: u64, trial: u64, keep: bool) -> Result<Observation> {
        let mut rng = trial_rng(master_seed, trial);
        let mut obs = Observation::default();
        match self {
            Prepared::Walk { walker, initial, kind } => {
                let start = initial.sample(&mut rng);
                if !keep && !matches!(kind, WalkKind::Simplex(_)) {
                    obs.walk = Some(walker.summary(start, &mut rng));
                    return Ok(obs);
                }
                let path = walker.path(start, &mut rng);
                let summary = WalkSummary {
                    start,
                    final_state: *path.states.last().expect("paths are non-empty"),
                    steps: path.truncated_at,
                    max_state: path.max_state(),
                    stop: path.stop,
                };
                let mut record = json!({
                    "trial": trial,
                    "start": start,
                    "steps": summary.steps,
                    "max_state": summary.max_state,
                    "stop": summary.stop,
                });
                match kind {
                    WalkKind::Markov => {}
                    WalkKind::Uhf => {
                        let n = build_supernatural(&path);
                        record["supernatural"] = json!(n.to_string());
                        record["terminal"] = json!(n.terminal);
                    }
                    WalkKind::Simplex(measure) => {
                        let tower = tower_from_path(&path, *measure, &mut rng)?;
                        record["max_dim"] = json!(tower.max_dim());
                        record["collapse_rows"] = json!(tower.rows().count());
                    }
                }
                obs.walk = Some(summary);
                obs.record = keep.then_some(record);
            }
            Prepared::Radius(sampler) => {
                let s = sampler.sample(&mut rng);
                obs.radius = Some(s.r);
                obs.record = keep.then(|| json!({ "trial": trial, "w0": s.w0, "bits": s.bits, "r": round_sig(s.r) }));
            }
            Prepared::Tame { family, lo, hi } => {
                let tame = crate::villadsen::tame_in_window(family, *lo, *hi, &mut rng);
                obs.tame = Some(tame);
                obs.record = keep.then(|| json!({ "trial": trial, "tame": tame }));
            }
            Prepared::Graph { vertices, degree, primes } => {
                let g = sample_regular_multigraph(*vertices, *degree, &mut rng)?;
                let d = double_to_digraph(&g);
                let preds = kirchberg_predicates(&d);
                obs.simple = preds.simple;
                obs.purely_infinite = Some(preds.purely_infinite);
                let k = k_groups(&d)?;
                obs.k0_finite = k.k0.is_finite();
                for &p in primes {
                    obs.sylow.insert(p, k.k0.p_partition(p)?);
                }
                obs.record = keep.then(|| {
                    json!({
                        "trial": trial,
                        "k0": k.k0.to_string(),
                        "k1_rank": k.k1_rank,
                        "simple": preds.simple,
                        "purely_infinite": preds.purely_infinite,
                    })
                });
            }
        }
        Ok(obs)
    }

    fn run_chunk(&self, spec: &ExperimentSpec, range: Range<u64>) -> Result<Tally> {
        let mut tally = Tally::empty(&spec.comparisons);
        for trial in range {
            let keep = trial < spec.keep_samples as u64;
            tally.absorb(&spec.comparisons, self.observe(spec.master_seed, trial, keep)?);
        }
        Ok(tally)
    }
}

/// Runs every trial and checks each comparison against its analytic value.
pub fn run_experiment(spec: &ExperimentSpec, options: &RunOptions) -> Result<Report> {
    spec.validate()?;
    let clock = Instant::now();
    let prepared = Prepared::new(spec)?;
    let chunks: Vec<Range<u64>> = (0..spec.trials.div_ceil(CHUNK))
        .map(|c| c * CHUNK..((c + 1) * CHUNK).min(spec.trials))
        .collect();
    let work = || {
        chunks
            .par_iter()
            .map(|r| prepared.run_chunk(spec, r.clone()))
            .collect::<Result<Vec<Tally>>>()
    };
    let tallies = match options.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
            .install(work)?,
        None => work()?,
    };
    let tally = tallies.into_iter().fold(Tally::empty(&spec.comparisons), Tally::merge);

    let mut comparisons = Vec::with_capacity(spec.comparisons.len());
    for (c, stat) in spec.comparisons.iter().zip(&tally.stats) {
        comparisons.push(evaluate(spec, c, stat, tally.trials)?);
    }
    let all_passed = comparisons.iter().all(|c| c.pass);
    Ok(Report {
        name: spec.name.clone(),
        construction: spec.construction.label().to_string(),
        trials: spec.trials,
        master_seed: spec.master_seed,
        generator: GENERATOR.to_string(),
        comparisons,
        diagnostics: tally.diagnostics,
        samples: tally.samples,
        all_passed,
        runtime_seconds: options.record_runtime.then(|| round_sig(clock.elapsed().as_secs_f64())),
        config: spec.clone(),
    }
    .rounded())
}

/// Analytic value as an interval, plus its exact form when there is one.
struct Target {
    value: Interval,
    exact: Option<BigRational>,
}

impl Target {
    fn exact(v: BigRational) -> Self {
        Target {
            value: Interval::point(to_f64(&v)),
            exact: Some(v),
        }
    }

    fn float(v: f64) -> Self {
        Target {
            value: Interval::point(v),
            exact: None,
        }
    }

    fn probability(p: Probability) -> Self {
        match p {
            Probability::Exact(v) => Self::exact(v),
            Probability::Bounds { lo, hi } => Target {
                value: Interval::new(lo, hi),
                exact: None,
            },
        }
    }
}

fn weighted(initial: &InitialDistribution, mut f: impl FnMut(u64) -> Result<BigRational>) -> Result<BigRational> {
    let mut total = BigRational::zero();
    for (state, w) in initial.weights() {
        total += w * f(*state)?;
    }
    Ok(total)
}

fn analytic_target(spec: &ExperimentSpec, stat: &Statistic) -> Result<Target> {
    let c = &spec.construction;
    Ok(match (stat, c) {
        (Statistic::Absorbed, Construction::MarkovOnly { chain, initial, .. }) => {
            let mut terms = Vec::new();
            for (state, w) in initial.weights() {
                terms.push((w, absorption_probability(chain, *state, AbsorptionMode::AbsorbAtMinusOne)?));
            }
            Target::probability(Probability::weighted_sum(terms))
        }
        (Statistic::MaxAtMost { k }, Construction::MarkovOnly { chain, initial, .. }) => {
            Target::exact(weighted(initial, |i| max_not_exceeding_probability(chain, *k, i))?)
        }
        (Statistic::FiniteDimensional, Construction::Uhf { chain, initial, .. }) => {
            Target::probability(prob_finite_dimensional(chain, initial)?)
        }
        (Statistic::BoundedPrime { k }, Construction::Uhf { chain, initial, .. }) => {
            Target::exact(prob_bounded_prime(chain, initial, *k)?)
        }
        (Statistic::ExtremalTracesAtMost { k }, Construction::Simplex { chain, initial, .. }) => {
            Target::exact(extremal_traces_at_most_prob(chain, initial, *k)?)
        }
        (Statistic::RadiusAtLeast { r }, Construction::Villadsen { walk }) => Target::float(ccdf_r(walk, *r)?),
        (Statistic::RadiusMean, Construction::Villadsen { walk }) => Target::float(expected_r(walk)?),
        (Statistic::RadiusKs, Construction::Villadsen { .. }) => Target::float(0.0),
        (Statistic::TameInWindow, Construction::Zstable { family, .. }) => Target::exact(zstable_probability(family)?),
        (Statistic::Simple | Statistic::PurelyInfinite, Construction::GraphKtheory { .. }) => Target::float(1.0),
        (Statistic::SylowIs { prime, partition }, Construction::GraphKtheory { degree, .. }) => {
            let component = PrimeComponent::new(*prime, partition.clone())?;
            Target::float(wood_limit_probability(&[component], *degree as u64)?)
        }
        _ => unreachable!("validated statistic/construction pairs"),
    })
}

/// Mass the simulation cannot see: absorption after the step budget, and
/// absorption after the escape rule fired.
fn absorption_shortfall(spec: &ExperimentSpec, stat: &Statistic, analytic_lo: f64) -> Result<f64> {
    let (chain, initial, walk) = match (&spec.construction, stat) {
        (Construction::MarkovOnly { chain, initial, walk }, Statistic::Absorbed)
        | (Construction::Uhf { chain, initial, walk }, Statistic::FiniteDimensional) => (chain, initial, walk),
        _ => return Ok(0.0),
    };
    let horizon = walk.max_steps.min(DEFICIT_HORIZON_CAP);
    let mut within = 0.0;
    for (state, w) in initial.weights() {
        within += to_f64(w) * finite_horizon_absorption(chain, *state, horizon)?;
    }
    Ok((analytic_lo - within).max(0.0) + walk.escape_epsilon.unwrap_or(0.0))
}

fn evaluate(spec: &ExperimentSpec, c: &Comparison, stat: &StatTally, trials: u64) -> Result<ComparisonRecord> {
    let target = analytic_target(spec, &c.statistic)?;
    let n = trials as f64;
    let (empirical, successes, std_error) = match stat {
        StatTally::Count { hits } => {
            let p = *hits as f64 / n;
            (p, Some(*hits), None)
        }
        StatTally::Scalar { sum, sum_sq, values } => match &c.statistic {
            Statistic::RadiusKs => {
                let Construction::Villadsen { walk } = &spec.construction else {
                    unreachable!("validated")
                };
                let samples = values.as_deref().unwrap_or(&[]);
                (ks_distance(samples, |r| cdf_r(walk, r))?, None, None)
            }
            _ => {
                let mean = sum / n;
                let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
                (mean, None, Some((var / n).sqrt()))
            }
        },
    };
    let value = target.value;
    let acceptance = match c.tolerance {
        Tolerance::Binomial { z } => match std_error {
            Some(se) => Interval::new(value.lo - z * se, value.hi + z * se),
            None => {
                // Mean of the simulated frequency, allowing for truncated walks.
                let shortfall = absorption_shortfall(spec, &c.statistic, value.lo)?;
                let reachable = Interval::new((value.lo - shortfall).max(0.0), value.hi);
                binomial_band(reachable, trials, z)
            }
        },
        Tolerance::Absolute { tol } => Interval::new(value.lo - tol, value.hi + tol),
        Tolerance::Ks { threshold } => Interval::new(0.0, threshold),
        Tolerance::AtLeast { value } => Interval::new(value, if c.statistic.is_scalar() { f64::MAX } else { 1.0 }),
        Tolerance::AtMost { value } => Interval::new(if c.statistic.is_scalar() { f64::MIN } else { 0.0 }, value),
    };
    Ok(ComparisonRecord {
        statistic: c.statistic.to_string(),
        operation: c.statistic.operation().to_string(),
        empirical,
        successes,
        trials,
        analytic: value,
        exact: target.exact.as_ref().map(format_ratio),
        acceptance,
        tolerance: c.tolerance,
        pass: acceptance.contains(empirical),
    })
}

//! Random towers of finite-dimensional simplices.
//!
//! A walk `Y_0, Y_1, ...` fixes the dimensions `max(Y_t, 0)`. A down step is
//! the standard inclusion; an up step to dimension `n` collapses the new
//! vertex onto a point of the base simplex, given by a barycentric row of
//! length `n` drawn from one of three measures.

use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::markov::{max_at_most, InitialDistribution, TransitionSpec, WalkOptions, WalkPath, Walker};

/// Law of the collapsing rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    /// Deterministic uniform rows; the limit is the Bauer simplex with
    /// boundary `{1/n} U {0}`.
    #[serde(alias = "k")]
    Bauer,
    /// A uniformly random vertex; Bauer simplex over the Cantor set.
    #[serde(alias = "c")]
    Cantor,
    /// Flat Dirichlet points on a scheduled face; Poulsen simplex.
    #[serde(alias = "p")]
    Poulsen,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowCoords {
    /// Every entry `1/len`.
    Uniform,
    /// The unit vector at this index.
    Vertex(usize),
    /// Leading entries; the rest of the row is zero.
    Face(Vec<f64>),
}

/// Barycentric coordinates `(a_1, ..., a_n)` of the image of the new vertex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepresentingRow {
    /// Row length, equal to the dimension reached by the up step.
    pub len: usize,
    pub coords: RowCoords,
}

impl RepresentingRow {
    pub fn entries(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.len];
        match &self.coords {
            RowCoords::Uniform => out.iter_mut().for_each(|v| *v = 1.0 / self.len as f64),
            RowCoords::Vertex(j) => out[*j] = 1.0,
            RowCoords::Face(head) => out[..head.len()].copy_from_slice(head),
        }
        out
    }

    /// Exact entries for the uniform and vertex rows.
    pub fn exact_entries(&self) -> Option<Vec<BigRational>> {
        let n = self.len;
        match &self.coords {
            RowCoords::Uniform => Some(vec![BigRational::new(1.into(), (n as i64).into()); n]),
            RowCoords::Vertex(j) => Some(
                (0..n)
                    .map(|i| if i == *j { BigRational::one() } else { BigRational::zero() })
                    .collect(),
            ),
            RowCoords::Face(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConnectingStep {
    StandardInclusion,
    Collapse(RepresentingRow),
}

/// Face schedule of the Poulsen measure: for the measure index
/// `m = s_n + i` (`s_n = n(n+1)/2`, `1 <= i <= n+1`) the face is spanned by
/// the first `n - i + 2` vertices. Index `0` is the one-point simplex.
pub fn poulsen_face_size(index: u64) -> usize {
    if index == 0 {
        return 1;
    }
    let mut n = 0u64;
    while (n + 1) * (n + 2) / 2 < index {
        n += 1;
    }
    let i = index - n * (n + 1) / 2;
    (n + 2 - i) as usize
}

fn flat_dirichlet<R: Rng + ?Sized>(size: usize, rng: &mut R) -> Vec<f64> {
    if size == 1 {
        return vec![1.0];
    }
    let draws: Vec<f64> = (0..size).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|x| x / total).collect()
}

/// The collapsing row for an up step reaching dimension `new_dim >= 1`.
pub fn sample_connecting_step<R: Rng + ?Sized>(measure: Measure, new_dim: usize, rng: &mut R) -> Result<ConnectingStep> {
    if new_dim == 0 {
        return Err(invalid("an up step reaches dimension at least 1"));
    }
    let coords = match measure {
        Measure::Bauer => RowCoords::Uniform,
        Measure::Cantor => RowCoords::Vertex(rng.random_range(0..new_dim)),
        Measure::Poulsen => {
            let face = poulsen_face_size(new_dim as u64 - 1);
            RowCoords::Face(flat_dirichlet(face, rng))
        }
    };
    Ok(ConnectingStep::Collapse(RepresentingRow { len: new_dim, coords }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimplexTower {
    pub dims: Vec<u64>,
    /// `steps[t]` connects level `t + 1` to level `t`.
    pub steps: Vec<ConnectingStep>,
    pub measure: Measure,
}

/// One serialized level of a tower.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TowerRecord {
    pub dim: u64,
    pub step: String,
    pub row: Option<Vec<f64>>,
}

impl SimplexTower {
    pub fn rows(&self) -> impl Iterator<Item = &RepresentingRow> {
        self.steps.iter().filter_map(|s| match s {
            ConnectingStep::Collapse(row) => Some(row),
            ConnectingStep::StandardInclusion => None,
        })
    }

    pub fn max_dim(&self) -> u64 {
        self.dims.iter().copied().max().unwrap_or(0)
    }

    pub fn records(&self) -> Vec<TowerRecord> {
        let mut out = vec![TowerRecord {
            dim: self.dims[0],
            step: "start".into(),
            row: None,
        }];
        for (step, dim) in self.steps.iter().zip(&self.dims[1..]) {
            out.push(match step {
                ConnectingStep::StandardInclusion => TowerRecord {
                    dim: *dim,
                    step: "inclusion".into(),
                    row: None,
                },
                ConnectingStep::Collapse(row) => TowerRecord {
                    dim: *dim,
                    step: "collapse".into(),
                    row: Some(row.entries()),
                },
            });
        }
        out
    }
}

pub fn tower_from_path<R: Rng + ?Sized>(path: &WalkPath, measure: Measure, rng: &mut R) -> Result<SimplexTower> {
    let dims: Vec<u64> = path.states.iter().map(|&s| s.max(0) as u64).collect();
    let mut steps = Vec::with_capacity(dims.len().saturating_sub(1));
    for w in path.states.windows(2) {
        if w[1] == w[0] - 1 {
            steps.push(ConnectingStep::StandardInclusion);
        } else if w[1] == w[0] + 1 {
            steps.push(sample_connecting_step(measure, w[1] as usize, rng)?);
        } else {
            return Err(invalid(format!("path step {} -> {} is not a unit step", w[0], w[1])));
        }
    }
    Ok(SimplexTower { dims, steps, measure })
}

pub fn sample_tower<R: Rng + ?Sized>(
    spec: &TransitionSpec,
    initial: &InitialDistribution,
    measure: Measure,
    max_steps: u64,
    rng: &mut R,
) -> Result<SimplexTower> {
    let walker = Walker::new(spec, WalkOptions::new(max_steps))?;
    let path = walker.sample_path(initial, rng);
    tower_from_path(&path, measure, rng)
}

/// Probability that the limit simplex has at most `k` extreme points, that
/// is, that the walk never rises above `k - 1`.
pub fn extremal_traces_at_most_prob(spec: &TransitionSpec, initial: &InitialDistribution, k: u64) -> Result<BigRational> {
    if k < 1 {
        return Err(invalid("k must be at least 1"));
    }
    let mut total = BigRational::zero();
    for (state, w) in initial.weights() {
        total += w * max_at_most(spec, k - 1, *state)?;
    }
    Ok(total)
}

/// Population-tree view of a vertex-collapse tower: each up step splits
/// one current vertex in two.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplittingTree {
    /// `(level, vertex)` for every split.
    pub splits: Vec<(u64, usize)>,
    /// Level at which each final vertex was created or last split.
    pub leaf_last_event: Vec<u64>,
    pub final_level: u64,
}

pub fn splitting_tree(tower: &SimplexTower) -> Result<SplittingTree> {
    if tower.measure != Measure::Cantor {
        return Err(Error::WrongMode("splitting trees need a vertex-collapse tower"));
    }
    let mut last_event = vec![0u64; tower.dims[0] as usize + 1];
    let mut splits = Vec::new();
    for (t, step) in tower.steps.iter().enumerate() {
        let level = t as u64 + 1;
        match step {
            ConnectingStep::StandardInclusion => {
                if tower.dims[t + 1] < tower.dims[t] {
                    last_event.pop();
                }
            }
            ConnectingStep::Collapse(row) => {
                let RowCoords::Vertex(j) = row.coords else {
                    return Err(invalid("vertex-collapse tower holds a non-vertex row"));
                };
                last_event[j] = level;
                last_event.push(level);
                splits.push((level, j));
            }
        }
    }
    Ok(SplittingTree {
        splits,
        leaf_last_event: last_event,
        final_level: tower.steps.len() as u64,
    })
}

/// First final vertex whose last split or creation lies more than `depth`
/// levels before the final level.
pub fn isolated_leaf_check(tower: &SimplexTower, depth: u64) -> Result<Option<usize>> {
    let tree = splitting_tree(tower)?;
    Ok(tree
        .leaf_last_event
        .iter()
        .position(|&event| event + depth < tree.final_level))
}

/// Largest, over the targets, of the smallest l1 distance to a sampled row.
/// Rows and targets are compared after zero padding.
pub fn poulsen_coverage_stat(tower: &SimplexTower, targets: &[Vec<f64>]) -> Result<f64> {
    if tower.measure != Measure::Poulsen {
        return Err(Error::WrongMode("coverage statistic needs a Lebesgue-measure tower"));
    }
    let rows: Vec<Vec<f64>> = tower.rows().map(RepresentingRow::entries).collect();
    if rows.is_empty() {
        return Ok(f64::INFINITY);
    }
    let distance = |a: &[f64], b: &[f64]| -> f64 {
        let n = a.len().max(b.len());
        (0..n)
            .map(|i| (a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0)).abs())
            .sum()
    };
    Ok(targets
        .iter()
        .map(|t| rows.iter().map(|r| distance(r, t)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::StopReason;
    use crate::ratio::{int, ratio};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn path(states: Vec<i64>) -> WalkPath {
        WalkPath {
            truncated_at: states.len() as u64 - 1,
            absorbed: states.last() == Some(&-1),
            stop: StopReason::Truncated,
            states,
        }
    }

    #[test]
    fn uniform_row() {
        let ConnectingStep::Collapse(row) = sample_connecting_step(Measure::Bauer, 4, &mut rng(0)).unwrap() else {
            panic!("up step must collapse");
        };
        assert_eq!(row.exact_entries().unwrap(), vec![ratio(1, 4); 4]);
    }

    #[test]
    fn rows_are_barycentric() {
        let mut r = rng(1);
        for measure in [Measure::Bauer, Measure::Cantor, Measure::Poulsen] {
            for n in 1..40 {
                let ConnectingStep::Collapse(row) = sample_connecting_step(measure, n, &mut r).unwrap() else {
                    panic!();
                };
                let e = row.entries();
                assert_eq!(e.len(), n);
                assert!(e.iter().all(|x| *x >= 0.0));
                assert!((e.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                if let Some(exact) = row.exact_entries() {
                    assert_eq!(exact.iter().sum::<BigRational>(), int(1));
                }
            }
        }
        assert!(sample_connecting_step(Measure::Bauer, 0, &mut r).is_err());
    }

    #[test]
    fn vertex_rows_are_uniform() {
        // Chi-square with 2 degrees of freedom; 13.8 is the 0.999 quantile.
        let mut r = rng(2);
        let mut counts = [0u32; 3];
        let draws = 10_000;
        for _ in 0..draws {
            let ConnectingStep::Collapse(row) = sample_connecting_step(Measure::Cantor, 3, &mut r).unwrap() else {
                panic!();
            };
            let RowCoords::Vertex(j) = row.coords else { panic!() };
            counts[j] += 1;
        }
        let expected = draws as f64 / 3.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        assert!(chi2 < 13.8, "chi2 = {chi2}, counts = {counts:?}");
    }

    #[test]
    fn poulsen_schedule() {
        // m = 1: n = 0, i = 1 -> {e0}; m = 2, 3: n = 1 -> {e0, e1}, {e0};
        // m = 4..6: n = 2 -> sizes 3, 2, 1.
        let sizes: Vec<usize> = (0..=10).map(poulsen_face_size).collect();
        assert_eq!(sizes, vec![1, 1, 2, 1, 3, 2, 1, 4, 3, 2, 1]);
        for m in 0..500u64 {
            assert!(poulsen_face_size(m) as u64 <= m + 1);
        }
    }

    #[test]
    fn tower_from_small_paths() {
        let t = tower_from_path(&path(vec![1, 0]), Measure::Bauer, &mut rng(0)).unwrap();
        assert_eq!(t.steps, vec![ConnectingStep::StandardInclusion]);
        assert_eq!(t.dims, vec![1, 0]);
        let t = tower_from_path(&path(vec![0, -1]), Measure::Bauer, &mut rng(0)).unwrap();
        assert_eq!(t.dims, vec![0, 0]);
        let t = tower_from_path(&path(vec![0, 1, 2, 3]), Measure::Bauer, &mut rng(0)).unwrap();
        for (n, row) in (1..).zip(t.rows()) {
            assert_eq!(row.len, n);
            assert_eq!(row.coords, RowCoords::Uniform);
        }
        assert!(tower_from_path(&path(vec![0, 2]), Measure::Bauer, &mut rng(0)).is_err());
    }

    #[test]
    fn towers_are_deterministic() {
        let spec = TransitionSpec::reflecting(ratio(3, 5)).unwrap();
        let init = InitialDistribution::delta(0);
        for measure in [Measure::Cantor, Measure::Poulsen] {
            let a = sample_tower(&spec, &init, measure, 300, &mut rng(7)).unwrap();
            let b = sample_tower(&spec, &init, measure, 300, &mut rng(7)).unwrap();
            assert_eq!(a, b);
            assert!(a.dims.windows(2).all(|w| w[0].abs_diff(w[1]) == 1));
        }
    }

    #[test]
    fn extremal_trace_formula() {
        let spec = TransitionSpec::absorbing(ratio(1, 2), ratio(1, 2)).unwrap();
        let init = InitialDistribution::delta(0);
        assert_eq!(extremal_traces_at_most_prob(&spec, &init, 1).unwrap(), ratio(1, 2));
        assert_eq!(extremal_traces_at_most_prob(&spec, &init, 2).unwrap(), ratio(2, 3));
        assert_eq!(extremal_traces_at_most_prob(&spec, &InitialDistribution::delta(3), 2).unwrap(), int(0));
        assert!(extremal_traces_at_most_prob(&spec, &init, 0).is_err());
        for k in 1..8i64 {
            for i in 0..=k {
                let v = extremal_traces_at_most_prob(&spec, &InitialDistribution::delta(i as u64), k as u64).unwrap();
                assert_eq!(v, ratio((k - i).max(0), k + 1));
            }
        }
    }

    fn vertex_tower(choices: &[usize]) -> SimplexTower {
        let steps = choices
            .iter()
            .enumerate()
            .map(|(t, &j)| {
                ConnectingStep::Collapse(RepresentingRow {
                    len: t + 1,
                    coords: RowCoords::Vertex(j),
                })
            })
            .collect();
        SimplexTower {
            dims: (0..=choices.len() as u64).collect(),
            steps,
            measure: Measure::Cantor,
        }
    }

    #[test]
    fn dead_end_is_found() {
        let tower = vertex_tower(&[0; 30]);
        assert_eq!(isolated_leaf_check(&tower, 5).unwrap(), Some(1));
    }

    #[test]
    fn round_robin_splitting_has_no_dead_end() {
        // Always split the leaf with the oldest last event.
        let mut last = vec![0u64];
        let mut choices = Vec::new();
        for level in 1..=64u64 {
            let j = (0..last.len()).min_by_key(|&j| last[j]).unwrap();
            choices.push(j);
            last[j] = level;
            last.push(level);
        }
        let tower = vertex_tower(&choices);
        // Leaves at the end number 65; each was touched within the last 65 levels.
        assert_eq!(isolated_leaf_check(&tower, 65).unwrap(), None);
        assert!(isolated_leaf_check(&tower, 10).unwrap().is_some());
    }

    #[test]
    fn leaf_check_rejects_other_measures() {
        let t = tower_from_path(&path(vec![0, 1]), Measure::Bauer, &mut rng(0)).unwrap();
        assert!(isolated_leaf_check(&t, 1).is_err());
        assert!(poulsen_coverage_stat(&t, &[]).is_err());
    }

    #[test]
    fn coverage_statistic() {
        let t = tower_from_path(&path(vec![0, 1, 2, 3]), Measure::Poulsen, &mut rng(3)).unwrap();
        let first = t.rows().nth(2).unwrap().entries();
        assert_eq!(poulsen_coverage_stat(&t, &[first]).unwrap(), 0.0);
        let empty = tower_from_path(&path(vec![3, 2, 1]), Measure::Poulsen, &mut rng(3)).unwrap();
        assert_eq!(poulsen_coverage_stat(&empty, &[vec![1.0]]).unwrap(), f64::INFINITY);
    }
}

//! Exact hitting probabilities on a finite window of states.

use std::collections::{BTreeSet, VecDeque};
use std::ops::RangeInclusive;

use num_rational::BigRational;
use num_traits::{One, Zero};

use super::TransitionSpec;
use crate::error::{invalid, Error, Result};

/// Probability that the chain started at `start` ever enters `target`,
/// computed as the minimal non-negative solution of the hitting equations
/// on `states`. State `-1` is absorbing.
///
/// Every transition with positive probability out of a non-target state of
/// the window must stay inside the window.
pub fn finite_hitting_oracle(
    spec: &TransitionSpec,
    states: RangeInclusive<i64>,
    target: &BTreeSet<i64>,
    start: i64,
) -> Result<BigRational> {
    let (lo, hi) = (*states.start(), *states.end());
    if lo < -1 || lo > hi {
        return Err(invalid(format!("state window {lo}..={hi} is not a subrange of -1, 0, 1, ...")));
    }
    if !states.contains(&start) {
        return Err(invalid(format!("start {start} outside the state window")));
    }
    if let Some(t) = target.iter().find(|t| !states.contains(t)) {
        return Err(invalid(format!("target state {t} outside the state window")));
    }
    if target.contains(&start) {
        return Ok(BigRational::one());
    }

    let n = (hi - lo + 1) as usize;
    let idx = |s: i64| (s - lo) as usize;
    // Outgoing transitions (to, probability) per state.
    let mut moves: Vec<Vec<(i64, BigRational)>> = vec![Vec::new(); n];
    for s in lo..=hi {
        if s < 0 || target.contains(&s) {
            continue;
        }
        let p = spec.p(s as u64);
        let q = BigRational::one() - &p;
        for (to, w) in [(s + 1, p), (s - 1, q)] {
            if w.is_zero() {
                continue;
            }
            if !states.contains(&to) {
                return Err(Error::Precondition(format!(
                    "transition {s} -> {to} leaves the state window {lo}..={hi}"
                )));
            }
            moves[idx(s)].push((to, w));
        }
    }

    // States that can reach the target; all others have hitting probability 0.
    let mut reaches = vec![false; n];
    let mut queue: VecDeque<i64> = target.iter().copied().collect();
    for &t in target {
        reaches[idx(t)] = true;
    }
    while let Some(t) = queue.pop_front() {
        for s in lo..=hi {
            if !reaches[idx(s)] && moves[idx(s)].iter().any(|(to, _)| *to == t) {
                reaches[idx(s)] = true;
                queue.push_back(s);
            }
        }
    }
    if !reaches[idx(start)] {
        return Ok(BigRational::zero());
    }

    let unknowns: Vec<i64> = (lo..=hi).filter(|s| reaches[idx(*s)] && !target.contains(s)).collect();
    let position = |s: i64| unknowns.iter().position(|u| *u == s);
    let m = unknowns.len();
    // Rows of [I - Q | b].
    let mut system: Vec<Vec<BigRational>> = vec![vec![BigRational::zero(); m + 1]; m];
    for (row, &s) in unknowns.iter().enumerate() {
        system[row][row] = BigRational::one();
        for (to, w) in &moves[idx(s)] {
            if target.contains(to) {
                system[row][m] += w;
            } else if let Some(col) = position(*to) {
                system[row][col] -= w;
            }
        }
    }
    let solution = solve(system)?;
    Ok(solution[position(start).expect("start is an unknown")].clone())
}

fn solve(mut a: Vec<Vec<BigRational>>) -> Result<Vec<BigRational>> {
    let m = a.len();
    for col in 0..m {
        let pivot = (col..m)
            .find(|&r| !a[r][col].is_zero())
            .ok_or_else(|| Error::Singular(format!("no pivot in column {col}")))?;
        a.swap(col, pivot);
        let inv = BigRational::one() / &a[col][col];
        for v in a[col].iter_mut().skip(col) {
            *v *= &inv;
        }
        for r in 0..m {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let factor = a[r][col].clone();
            for c in col..=m {
                let delta = &factor * &a[col][c];
                a[r][c] -= delta;
            }
        }
    }
    Ok(a.into_iter().map(|row| row[m].clone()).collect())
}

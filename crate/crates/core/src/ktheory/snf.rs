use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Dense integer matrix with arbitrary-precision entries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Vec<BigInt>>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![vec![BigInt::zero(); cols]; rows],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.entries[i][i] = BigInt::one();
        }
        m
    }

    pub fn from_rows<T: Into<BigInt> + Clone>(rows: &[Vec<T>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != cols) {
            return Err(invalid(format!("row {i} has length {}, expected {cols}", rows[i].len())));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            entries: rows.iter().map(|r| r.iter().cloned().map(Into::into).collect()).collect(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.entries[i][j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: BigInt) {
        self.entries[i][j] = value;
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.entries[j][i] = self.entries[i][j].clone();
            }
        }
        t
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmithNormalForm {
    /// `d_1 | d_2 | ... | d_rank`, all positive.
    #[serde(with = "bigint_strings")]
    pub invariant_factors: Vec<BigInt>,
    pub rank: usize,
    pub nullity: usize,
    pub rows: usize,
    pub cols: usize,
}

impl SmithNormalForm {
    /// Free rank of the cokernel `Z^rows / image`.
    pub fn cokernel_free_rank(&self) -> usize {
        self.rows - self.rank
    }
}

pub(crate) mod bigint_strings {
    use num_bigint::BigInt;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[BigInt], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| x.to_string()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigInt>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|s| s.parse().map_err(|_| D::Error::custom(format!("bad integer `{s}`"))))
            .collect()
    }
}

/// Quotient rounded to nearest, so the remainder is at most half the divisor.
fn nearest_quotient(a: &BigInt, b: &BigInt) -> BigInt {
    let two = BigInt::from(2);
    (a * &two + b).div_floor(&(b * two))
}

/// Rewrites a diagonal into a divisibility chain using `diag(a, b) ~ diag(gcd, lcm)`.
pub(crate) fn normalise_chain(diag: &mut [BigInt]) {
    for d in diag.iter_mut() {
        *d = d.abs();
    }
    for i in 0..diag.len() {
        for j in i + 1..diag.len() {
            if (&diag[j] % &diag[i]).is_zero() {
                continue;
            }
            let g = diag[i].gcd(&diag[j]);
            let l = &diag[i] / &g * &diag[j];
            diag[i] = g;
            diag[j] = l;
        }
    }
}

/// Integer elimination with pivoting on the smallest nonzero entry.
pub fn smith_normal_form(m: &IntMatrix) -> SmithNormalForm {
    let (rows, cols) = (m.rows, m.cols);
    let mut a = m.entries.clone();
    let mut diag = Vec::new();

    for t in 0..rows.min(cols) {
        let Some((pi, pj)) = smallest_entry(&a, t..rows, t..cols) else {
            break;
        };
        a.swap(t, pi);
        swap_cols(&mut a, t, pj);

        loop {
            // Column t below the pivot.
            let mut leftover = false;
            for i in t + 1..rows {
                if a[i][t].is_zero() {
                    continue;
                }
                let q = nearest_quotient(&a[i][t], &a[t][t]);
                let (top, bottom) = a.split_at_mut(i);
                let pivot_row = &top[t];
                let row = &mut bottom[0];
                for k in t..cols {
                    if !pivot_row[k].is_zero() {
                        row[k] -= &q * &pivot_row[k];
                    }
                }
                leftover |= !row[t].is_zero();
            }
            if leftover {
                let (pi, _) = smallest_entry(&a, t..rows, t..t + 1).expect("nonzero column");
                a.swap(t, pi);
                continue;
            }
            // Row t right of the pivot; column t is clear so only row t changes.
            let pivot = a[t][t].clone();
            for k in t + 1..cols {
                if !a[t][k].is_zero() {
                    let q = nearest_quotient(&a[t][k], &pivot);
                    a[t][k] -= &q * &pivot;
                    leftover |= !a[t][k].is_zero();
                }
            }
            if leftover {
                let (_, pj) = smallest_entry(&a, t..t + 1, t..cols).expect("nonzero row");
                swap_cols(&mut a, t, pj);
                continue;
            }
            break;
        }
        diag.push(a[t][t].clone());
    }

    normalise_chain(&mut diag);
    let rank = diag.len();
    SmithNormalForm {
        invariant_factors: diag,
        rank,
        nullity: cols - rank,
        rows,
        cols,
    }
}

fn smallest_entry(
    a: &[Vec<BigInt>],
    rows: std::ops::Range<usize>,
    cols: std::ops::Range<usize>,
) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize, BigInt)> = None;
    for i in rows {
        for j in cols.clone() {
            let v = &a[i][j];
            if v.is_zero() {
                continue;
            }
            if best.as_ref().is_none_or(|(_, _, b)| v.magnitude() < b.magnitude()) {
                let unit = v.magnitude().is_one();
                best = Some((i, j, v.clone()));
                if unit {
                    return best.map(|(i, j, _)| (i, j));
                }
            }
        }
    }
    best.map(|(i, j, _)| (i, j))
}

fn swap_cols(a: &mut [Vec<BigInt>], x: usize, y: usize) {
    if x != y {
        for row in a.iter_mut() {
            row.swap(x, y);
        }
    }
}

/// Largest dimension accepted by [`minors_gcd_oracle`].
pub const ORACLE_MAX_DIM: usize = 6;

/// Invariant factors as quotients of successive gcds of `k x k` minors.
pub fn minors_gcd_oracle(m: &IntMatrix) -> Result<SmithNormalForm> {
    if m.rows > ORACLE_MAX_DIM || m.cols > ORACLE_MAX_DIM {
        return Err(invalid(format!(
            "minors oracle is limited to {ORACLE_MAX_DIM}x{ORACLE_MAX_DIM}, got {}x{}",
            m.rows, m.cols
        )));
    }
    let mut factors = Vec::new();
    let mut previous = BigInt::one();
    for k in 1..=m.rows.min(m.cols) {
        let mut g = BigInt::zero();
        for rs in subsets(m.rows, k) {
            for cs in subsets(m.cols, k) {
                let sub: Vec<Vec<BigInt>> = rs.iter().map(|&i| cs.iter().map(|&j| m.entries[i][j].clone()).collect()).collect();
                g = g.gcd(&laplace_det(&sub));
            }
        }
        if g.is_zero() {
            break;
        }
        factors.push(&g / &previous);
        previous = g;
    }
    let rank = factors.len();
    Ok(SmithNormalForm {
        invariant_factors: factors,
        rank,
        nullity: m.cols - rank,
        rows: m.rows,
        cols: m.cols,
    })
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

fn laplace_det(m: &[Vec<BigInt>]) -> BigInt {
    match m.len() {
        0 => BigInt::one(),
        1 => m[0][0].clone(),
        n => {
            let mut det = BigInt::zero();
            for j in 0..n {
                if m[0][j].is_zero() {
                    continue;
                }
                let minor: Vec<Vec<BigInt>> = m[1..]
                    .iter()
                    .map(|row| row.iter().enumerate().filter(|(c, _)| *c != j).map(|(_, v)| v.clone()).collect())
                    .collect();
                let term = &m[0][j] * laplace_det(&minor);
                if j % 2 == 0 {
                    det += term;
                } else {
                    det -= term;
                }
            }
            det
        }
    }
}

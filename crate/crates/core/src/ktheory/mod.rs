//! K-theory of graph algebras: Smith normal form over the integers, finite
//! abelian groups, and the limiting cokernel distribution for random regular
//! graphs.

mod group;
mod snf;
mod wood;

pub use group::{sylow_component, FiniteAbelianGroup, PrimaryDecomposition};
pub use snf::{minors_gcd_oracle, smith_normal_form, IntMatrix, SmithNormalForm, ORACLE_MAX_DIM};
pub use wood::{odd_power_product, wood_limit_probability, PrimeComponent, PRODUCT_TERM_CUTOFF};

use num_bigint::BigInt;
use num_traits::One;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphs::Digraph;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KGroups {
    pub k0: FiniteAbelianGroup,
    /// `K_1` is free abelian of this rank.
    pub k1_rank: usize,
}

/// `A^t - I` for the adjacency matrix `A`.
pub fn transpose_minus_identity(d: &Digraph) -> IntMatrix {
    let n = d.n();
    let mut m = IntMatrix::zeros(n, n);
    for (i, row) in d.adjacency().iter().enumerate() {
        for (j, &a) in row.iter().enumerate() {
            let mut v = BigInt::from(a);
            if i == j {
                v -= BigInt::one();
            }
            m.set(j, i, v);
        }
    }
    m
}

/// `K_0 = coker(A^t - I)` and `K_1 = ker(A^t - I)`.
pub fn k_groups(d: &Digraph) -> Result<KGroups> {
    if let Some(v) = (0..d.n()).find(|&v| d.out_degree(v) == 0) {
        return Err(Error::Precondition(format!("vertex {v} is a sink")));
    }
    let snf = smith_normal_form(&transpose_minus_identity(d));
    let k0 = FiniteAbelianGroup::from_cyclic_orders(snf.cokernel_free_rank(), snf.invariant_factors)?;
    Ok(KGroups { k0, k1_rank: snf.nullity })
}

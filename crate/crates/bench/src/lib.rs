//! Fixed inputs shared by the criterion benches.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use randcstar_core::graphs::{double_to_digraph, sample_regular_multigraph, Digraph};
use randcstar_core::ktheory::{transpose_minus_identity, IntMatrix};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Doubled random `degree`-regular multigraph on `vertices` vertices.
pub fn doubled_graph(vertices: usize, degree: usize, seed: u64) -> Digraph {
    let g = sample_regular_multigraph(vertices, degree, &mut rng(seed)).expect("valid graph parameters");
    double_to_digraph(&g)
}

/// The K0 relation matrix of [`doubled_graph`].
pub fn relation_matrix(vertices: usize, degree: usize, seed: u64) -> IntMatrix {
    transpose_minus_identity(&doubled_graph(vertices, degree, seed))
}

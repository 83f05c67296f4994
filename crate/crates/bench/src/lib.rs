//! Fixtures shared by the benchmarks.

use pdl_core::encoder::EmbeddingVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` Gaussian-ish random embeddings of width `dim`.
pub fn random_embeddings(n: usize, dim: usize, seed: u64) -> Vec<EmbeddingVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|window_id| EmbeddingVector {
            window_id,
            values: (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
        })
        .collect()
}

/// `n` random token windows of length `l` over sensor ids `4..vocab`.
pub fn random_windows(n: usize, l: usize, vocab: u32, seed: u64) -> Vec<Vec<u32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..l).map(|_| rng.random_range(4..vocab)).collect()).collect()
}

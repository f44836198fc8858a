//! Synthetic inputs shared by the benchmarks.

use ndarray::Array2;
use polar::{normalize_rows, DirectionMatrix, EmbeddingSet, PolarPair};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` unit-normalized words of dimension `d`, named `w0..`.
pub fn embeddings(n: usize, d: usize, seed: u64) -> EmbeddingSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0));
    let vocab = (0..n).map(|i| format!("w{i}")).collect();
    normalize_rows(EmbeddingSet::new(vocab, m).expect("valid shape")).expect("nonzero rows")
}

/// Direction matrix over pairs `(w{2i}, w{2i+1})`; needs `e.len() >= 2 * n_pairs`.
pub fn directions(e: &EmbeddingSet, n_pairs: usize) -> DirectionMatrix {
    let pairs: Vec<PolarPair> = (0..n_pairs)
        .map(|i| PolarPair::new(format!("w{}", 2 * i), format!("w{}", 2 * i + 1)).expect("distinct words"))
        .collect();
    DirectionMatrix::build(e, &pairs).expect("all pairs in vocabulary")
}

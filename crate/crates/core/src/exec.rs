//! Data-parallel fan-out over independent work items.
//!
//! With the `parallel` feature the parallel mode runs on rayon's pool;
//! without it both modes run sequentially. Results are always returned in
//! index order, so reductions over them do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Maps `f` over `0..len`, keeping index order.
pub fn map_indices<T, F>(exec: Execution, len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..len).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..len).map(f).collect()
}

/// Like [`map_indices`] but stops at the first error.
pub fn try_map_indices<T, E, F>(exec: Execution, len: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..len).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..len).map(f).collect()
}

/// Folds `0..len` into per-chunk accumulators and merges them with a
/// commutative, associative `merge`. Use only for exact (integer) merges.
pub fn fold_indices<A, F, M>(exec: Execution, len: u64, identity: A, fold: F, merge: M) -> A
where
    A: Send + Sync + Clone,
    F: Fn(A, u64) -> A + Sync + Send,
    M: Fn(A, A) -> A + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..len)
            .into_par_iter()
            .fold(|| identity.clone(), &fold)
            .reduce(|| identity.clone(), &merge);
    }
    let _ = (exec, &merge);
    (0..len).fold(identity, fold)
}

/// The random stream for work item `index` under `master_seed`. Streams
/// are counter-based, so a run's randomness depends only on this pair.
pub fn stream_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Derives an independent master seed for a labelled sub-task.
pub fn derive_seed(master_seed: u64, tag: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = master_seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn modes_agree() {
        let a = map_indices(Execution::Sequential, 100, |i| stream_rng(7, i as u64).gen::<u64>());
        let b = map_indices(Execution::Parallel, 100, |i| stream_rng(7, i as u64).gen::<u64>());
        assert_eq!(a, b);
        let s = fold_indices(Execution::Parallel, 1000, 0u64, |a, i| a + i, |a, b| a + b);
        assert_eq!(s, 999 * 1000 / 2);
    }

    #[test]
    fn streams_differ() {
        let a: u64 = stream_rng(1, 0).gen();
        let b: u64 = stream_rng(1, 1).gen();
        let c: u64 = stream_rng(2, 0).gen();
        assert!(a != b && a != c);
        assert_ne!(derive_seed(1, 2), derive_seed(1, 3));
    }
}

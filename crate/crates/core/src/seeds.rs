//! Per-task seed derivation.
//!
//! Every random stream in a run is keyed by `derive(root, path)`, where
//! `path` is the task's coordinates (e.g. `[n_index, replica, stream]`).
//! Each path element is folded in with one SplitMix64 finalization, so the
//! seed of a task depends only on the root seed and its coordinates, never
//! on the order or thread in which tasks execute. The derived seed keys a
//! ChaCha8 stream, which is itself counter based.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tag for disorder realizations.
pub const STREAM_DISORDER: u64 = 0;
/// Stream tag for the dynamics noise.
pub const STREAM_DYNAMICS: u64 = 1;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive(root: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(root), |acc, &c| splitmix64(acc ^ splitmix64(c)))
}

pub fn rng_for(root: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(root, path))
}

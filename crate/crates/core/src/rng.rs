//! Per-path random streams.
//!
//! Each path owns a ChaCha stream keyed by `(seed, path_index)`, so results
//! do not depend on how paths are spread over threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type PathRng = ChaCha8Rng;

pub fn path_rng(seed: u64, path_index: u64) -> PathRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng
}

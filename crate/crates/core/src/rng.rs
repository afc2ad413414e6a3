//! Seeded random streams.
//!
//! Every random quantity in the crate is drawn from ChaCha12 (`rand_chacha`
//! 0.9) keyed by a 64-bit seed. Bulk sampling is split into fixed-size row
//! chunks, each drawn from its own stream of the same key, so results do not
//! depend on how many threads do the work.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// The project-wide generator.
pub type FqRng = ChaCha12Rng;

/// Human-readable generator identity, recorded in run manifests.
pub const GENERATOR: &str = "ChaCha12 (rand_chacha 0.9, seed_from_u64, per-chunk streams)";

/// Rows drawn per stream when sampling in bulk.
pub const CHUNK_ROWS: usize = 4096;

pub fn seeded(seed: u64) -> FqRng {
    FqRng::seed_from_u64(seed)
}

/// Independent stream `stream` under the key derived from `seed`.
pub fn stream(seed: u64, stream: u64) -> FqRng {
    let mut rng = seeded(seed);
    rng.set_stream(stream);
    rng
}

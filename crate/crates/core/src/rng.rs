//! Seeded, platform-independent random streams.
//!
//! Every random draw in the crate goes through [`substream`]: a ChaCha8
//! generator keyed by the run seed, with the sample (or series) index selecting
//! one of its 2^64 independent streams. Streams never overlap, so samples can
//! be drawn in any order or concurrently with bit-identical results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Generator identity recorded in manifests.
pub const RNG_IDENTITY: &str = "rand_chacha-0.9/ChaCha8Rng seed_from_u64(seed), stream=index";

/// Independent stream `index` of the generator seeded with `seed`.
pub fn substream(seed: u64, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Packs a two-level index (e.g. kernel, series) into one stream id.
pub fn nested_index(outer: u32, inner: u32) -> u64 {
    (u64::from(outer) << 32) | u64::from(inner)
}

//! Named random sub-streams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator keyed by the
//! run seed and selected by a `(Stream, index)` pair, so each component
//! (simulation, subsampling, multi-start jitter) is reproducible on its own
//! regardless of what the others consume.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Simulate = 1,
    Subtitles = 2,
    Bootstrap = 3,
    InitJitter = 4,
}

pub fn substream(seed: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((stream as u64) << 48) ^ index);
    rng
}

//! Seeded random streams.
//!
//! Every random draw in the crate goes through a ChaCha8 generator keyed by
//! `(seed, stream)`. The seed identifies a sample (or a training run), the
//! stream identifies the purpose, so two purposes never share random numbers
//! and adding draws to one purpose cannot perturb another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) const STREAM_UES: u64 = 1;
pub(crate) const STREAM_BLOCKAGES: u64 = 2;
pub(crate) const STREAM_SHADOW: u64 = 3;
pub(crate) const STREAM_BCD_INIT: u64 = 4;
pub(crate) const STREAM_WEIGHT_INIT: u64 = 5;
pub(crate) const STREAM_SHUFFLE: u64 = 6;
pub(crate) const STREAM_DROPOUT: u64 = 7;

pub(crate) fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

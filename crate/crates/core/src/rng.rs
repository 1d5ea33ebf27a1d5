//! Seeded random streams.
//!
//! Every stage draws from its own ChaCha20 stream derived from one root seed,
//! so a stage can be replayed without re-running the stages before it.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Named substreams of a root seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    State = 1,
    Monomials = 2,
    Shots = 3,
    Noise = 4,
    Init = 5,
    Sensing = 6,
    Eigen = 7,
}

/// Returns the generator for `(seed, stream, index)`.
///
/// `index` distinguishes independent draws within one stream, e.g. one
/// shot stream per measurement setting.
pub fn substream(seed: u64, stream: Stream, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(((stream as u64) << 48) ^ index);
    rng
}

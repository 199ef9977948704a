//! Seed splitting.
//!
//! Every run takes a single `u64` seed. Each randomised component draws from
//! its own ChaCha8 stream of that seed: the generator is seeded with the run
//! seed and then switched to the stream number listed in [`Stream`]. Streams
//! never overlap, so adding draws in one component leaves the others intact.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Autoencoder = 1,
    KMeans = 2,
    Gumbel = 3,
    Baseline = 4,
    Gcn = 5,
    Louvain = 6,
    Split = 7,
    Generator = 8,
}

pub fn component_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

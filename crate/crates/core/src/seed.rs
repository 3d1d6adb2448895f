//! Counter-based random streams.
//!
//! One 64-bit seed is expanded into independent ChaCha8 streams keyed by
//! `(replicate, dataset, purpose)`: the generator is seeded with the user
//! seed and its stream id is set to
//! `replicate << 24 | dataset << 8 | purpose`. A draw therefore depends
//! only on its key, never on how replicates are scheduled across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    Truth = 1,
    Covariates = 2,
    Noise = 3,
    Censoring = 4,
    TestCovariates = 5,
    TestNoise = 6,
    Split = 7,
}

/// Dataset slot for streams that are not tied to one dataset.
pub const ALL_DATASETS: usize = 0xFFFF;

pub fn stream_id(replicate: usize, dataset: usize, purpose: Purpose) -> u64 {
    assert!(dataset <= ALL_DATASETS, "dataset index out of range");
    ((replicate as u64) << 24) | ((dataset as u64) << 8) | purpose as u64
}

pub fn rng_for(seed: u64, replicate: usize, dataset: usize, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(replicate, dataset, purpose));
    rng
}

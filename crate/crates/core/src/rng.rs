//! Seeded random streams.
//!
//! Every stochastic component draws from a ChaCha stream whose key is built
//! from the experiment seed plus a domain tag and up to two indices (worker id,
//! generation, population slot). Streams with different keys are independent,
//! so results never depend on thread scheduling or evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Domain tags keep streams of different subsystems apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Sgd = 1,
    PopulationInit = 2,
    Generation = 3,
    Dataset = 4,
    ModelInit = 5,
}

pub fn stream(seed: u64, domain: Domain, a: u64, b: u64) -> Stream {
    let mut key = [0u8; 32];
    for (chunk, word) in key.chunks_exact_mut(8).zip([seed, domain as u64, a, b]) {
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Stream owned by SGD worker `worker`. Worker 0 is also the serial stream.
pub fn worker_stream(seed: u64, worker: usize) -> Stream {
    stream(seed, Domain::Sgd, worker as u64, 0)
}

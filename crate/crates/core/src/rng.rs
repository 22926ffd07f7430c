//! Seed derivation. Every random stream in a run descends from one global
//! seed so that a run is a pure function of `(config, data, seed)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Independent purposes a node draws randomness for. Keeping them apart
/// means e.g. the push schedule does not shift when the aggregator changes
/// how many training draws happen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Bootstrap = 1,
    Timing = 2,
    Views = 3,
    Training = 4,
    Split = 5,
    Clustering = 6,
    Federated = 7,
    Latency = 8,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn derive_seed(global: u64, id: u64, stream: Stream) -> u64 {
    splitmix64(splitmix64(splitmix64(global) ^ id) ^ (stream as u64).wrapping_mul(0xA24B_AED4_963E_E407))
}

pub fn stream_rng(global: u64, id: u64, stream: Stream) -> SimRng {
    SimRng::seed_from_u64(derive_seed(global, id, stream))
}

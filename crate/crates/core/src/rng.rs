//! Positional seed derivation.
//!
//! Every random stream in the crate is a ChaCha8 generator keyed by a 64-bit
//! seed and a stream id. Seeds for sweep instances are derived from their
//! position (ratio index, iteration index), never from execution order, so a
//! parallel sweep reproduces a sequential one exactly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent streams used while building one instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Stations = 1,
    Users = 2,
    Shadowing = 3,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of iteration `iteration` at grid position `ratio_index` of a sweep.
pub fn derive_seed(base: u64, ratio_index: u64, iteration: u64) -> u64 {
    let a = splitmix64(base);
    let b = splitmix64(a ^ ratio_index.wrapping_mul(0xD6E8_FEB8_6659_FD93));
    splitmix64(b ^ iteration.wrapping_mul(0xA076_1D64_78BD_642F))
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

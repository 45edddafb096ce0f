//! Reproducible random streams.
//!
//! Every independent unit of work (a chain, a block of Monte Carlo draws)
//! owns a ChaCha8 generator keyed by `(seed, stream)`. ChaCha provides 2^64
//! independent streams per key, so results are fixed by the seed and the
//! work decomposition, never by thread scheduling.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream-space tags; keeps chains, importance draws and HS draws from
/// sharing a stream under the same seed.
pub mod domain {
    pub const CHAIN: u64 = 0;
    pub const IMPORTANCE: u64 = 1;
    pub const HS_ORACLE: u64 = 2;
    pub const LAW: u64 = 3;
    pub const MEASURE: u64 = 4;
    pub const VERIFY: u64 = 5;
}

/// Generator for stream `index` of `domain` under `seed`.
pub fn stream_rng(seed: u64, domain: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((domain << 48) | (index & ((1 << 48) - 1)));
    rng
}

/// Derives a fresh base seed from a caller-owned generator, for operations
/// that fan out into parallel blocks.
pub fn derive_seed<R: RngCore + ?Sized>(rng: &mut R) -> u64 {
    rng.next_u64()
}

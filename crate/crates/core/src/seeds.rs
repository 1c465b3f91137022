//! Deterministic seed tree.
//!
//! Every random quantity in the crate is derived from one root seed through
//! `leaf_seed(root, stream, index)`. Streams separate purposes (driver
//! increments, driver extension, field draws, bootstrap, ...) so that adding
//! samples in one stream never perturbs another. The mix is SplitMix64,
//! applied to the root xored with a stream/index tag.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags for derived seed streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Driver = 1,
    DriverExtension = 2,
    DriverRefinement = 3,
    Field = 4,
    Bootstrap = 5,
    Scatter = 6,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the seed for `(stream, index)` under `root`.
pub fn leaf_seed(root: u64, stream: Stream, index: u64) -> u64 {
    let tagged = splitmix64(root ^ (stream as u64).wrapping_mul(0xA076_1D64_78BD_642F));
    splitmix64(tagged ^ index.wrapping_mul(0xE703_7ED1_A0B4_28DB))
}

/// RNG seeded for `(stream, index)` under `root`.
pub fn leaf_rng(root: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(leaf_seed(root, stream, index))
}

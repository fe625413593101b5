//! Deterministic seed derivation. Every random stream in the crate is keyed by
//! a master seed plus a path of integers (purpose, group, replicate, ...), so
//! adding work never reshuffles earlier streams and results do not depend on
//! scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Purpose tags for named sub-streams.
pub mod stream {
    pub const SPLIT: u64 = 1;
    pub const CV_FOLDS: u64 = 2;
    pub const BOOTSTRAP: u64 = 3;
    pub const SEPARATE: u64 = 4;
    pub const REPLICATE_CV: u64 = 5;
    pub const SYNTHETIC: u64 = 6;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable hash of `(master, path...)`.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |acc, &p| {
        splitmix64(acc ^ splitmix64(p))
    })
}

pub fn rng_from(master: u64, path: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(master, path))
}

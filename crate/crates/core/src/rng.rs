//! Seed derivation. Every random stream in the crate is a ChaCha8 generator
//! seeded from a master seed and a path of stream labels, so parallel work
//! draws the same numbers regardless of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream labels used when deriving child seeds.
pub mod stream {
    pub const TREE: u64 = 0x7472_6565;
    pub const IMPORTANCE: u64 = 0x696d_7070;
    pub const FOLDS: u64 = 0x666f_6c64;
    pub const FIELD: u64 = 0x6669_656c;
    pub const SAMPLE: u64 = 0x7361_6d70;
    pub const FOREST: u64 = 0x666f_7273;
    pub const SCENARIO: u64 = 0x7363_656e;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed with a path of labels into an independent child seed.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &label| splitmix64(acc ^ splitmix64(label)))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_rng(master: u64, path: &[u64]) -> Rng {
    rng_from_seed(derive_seed(master, path))
}

//! Deterministic randomness: every stochastic step draws from a ChaCha
//! generator seeded by mixing the run seed with a purpose tag and indices,
//! so independent subprocesses never share or reorder a stream.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

/// Purpose tags for derived seeds. Distinct tags give disjoint streams.
pub mod tags {
    pub const WORLD: u64 = 1;
    pub const STORE: u64 = 2;
    pub const SUPPORT: u64 = 3;
    pub const QUERY: u64 = 4;
    pub const SC_STREAM: u64 = 5;
    pub const CALIBRATE: u64 = 6;
    pub const BASE_SYNTH: u64 = 7;
    pub const CORRUPT_SUPPORT: u64 = 8;
    pub const CORRUPT_QUERY: u64 = 9;
    pub const BOOTSTRAP: u64 = 10;
    pub const EPISODE: u64 = 11;
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Mixes a seed with one more component.
pub fn mix(seed: u64, part: u64) -> u64 {
    splitmix64(seed ^ splitmix64(part))
}

/// Folds several components into one derived seed.
pub fn mix_all(seed: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(seed, |acc, &p| mix(acc, p))
}

pub fn rng_from(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// d independent standard-normal draws.
pub fn standard_normal_vec(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

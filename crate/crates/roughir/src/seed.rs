//! Seed derivation.
//!
//! Every random stream is identified by `(root, stream, index)`: a 64-bit
//! root seed, a stream id naming the component that consumes randomness,
//! and a replication (or batch, or grid-point) index. The derived seed is
//! `mix(mix(mix(root) ^ stream) ^ index)` with the SplitMix64 finalizer as
//! `mix`, and it seeds a ChaCha8 generator. Results therefore do not depend
//! on how replications are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream ids. Values are part of the reproducibility contract.
pub mod stream {
    pub const SIMULATE: u64 = 0x01;
    pub const SIGMA_MC: u64 = 0x10;
    pub const SIGMA_LAG_SUM: u64 = 0x11;
    pub const STABLE_TABLE: u64 = 0x20;
    pub const EXP_CLT_FBM: u64 = 0x30;
    pub const EXP_DIFFUSION: u64 = 0x31;
    pub const EXP_TREND: u64 = 0x32;
    pub const EXP_LEVY: u64 = 0x33;
    pub const EXP_LOCAL_MBM: u64 = 0x35;
    pub const TEST: u64 = 0xff;
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive(root: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(root) ^ stream) ^ index)
}

pub fn rng(root: u64, stream: u64, index: u64) -> Rng {
    Rng::seed_from_u64(derive(root, stream, index))
}

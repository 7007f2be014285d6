//! Deterministic random substreams.
//!
//! Every stochastic step derives its generator from `(seed, domain, index)`
//! so results never depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub mod domain {
    pub const ENDMEMBERS: u64 = 1;
    pub const PIXEL: u64 = 2;
    pub const FOLDS: u64 = 3;
    pub const SPLIT: u64 = 4;
    pub const INIT: u64 = 5;
    pub const SHUFFLE: u64 = 6;
    pub const AUGMENT: u64 = 7;
    pub const LABEL_PICK: u64 = 8;
    pub const SUBSET: u64 = 9;
}

pub fn substream(seed: u64, domain: u64, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ domain.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(index);
    rng
}

/// Stream index for per-sample draws inside a training epoch.
pub fn epoch_sample_index(epoch: usize, sample: usize) -> u64 {
    ((epoch as u64) << 32) | (sample as u64 & 0xFFFF_FFFF)
}

//! Counter-based expansion of one master seed into independent streams.
//!
//! A stream is addressed by `(master, purpose, index)`; the triple is packed
//! into a ChaCha key, so streams never overlap and any stream can be
//! regenerated without touching the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a random stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    Signal = 1,
    Noise = 2,
    Permutation = 3,
    Orthogonal = 4,
    Test = 0xff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedStream {
    master: u64,
    path: u64,
}

impl SeedStream {
    pub fn new(master: u64) -> Self {
        Self { master, path: 0 }
    }

    /// Child stream for work unit `index` (trial, sweep point, ...).
    pub fn child(&self, index: u64) -> Self {
        // splitmix64 finalizer keeps nested indices from colliding
        let mut z = self
            .path
            .wrapping_add(0x9e37_79b9_7f4a_7c15)
            .wrapping_add(index.wrapping_mul(0xbf58_476d_1ce4_e5b9));
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
        Self {
            master: self.master,
            path: z,
        }
    }

    pub fn rng(&self, purpose: Purpose, index: u64) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&self.master.to_le_bytes());
        key[8..16].copy_from_slice(&self.path.to_le_bytes());
        key[16..24].copy_from_slice(&(purpose as u64).to_le_bytes());
        key[24..32].copy_from_slice(&index.to_le_bytes());
        ChaCha8Rng::from_seed(key)
    }
}

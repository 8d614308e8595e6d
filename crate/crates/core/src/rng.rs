//! Counter-based seeding: every random component draws from its own named
//! substream of one master seed, so replicates and components can be
//! reproduced in isolation and in any execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedStream {
    master: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn tag_hash(tag: &str) -> u64 {
    // FNV-1a
    tag.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

impl SeedStream {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    /// Seed of substream `(tag, index)`.
    pub fn seed(&self, tag: &str, index: u64) -> u64 {
        let a = splitmix64(self.master ^ tag_hash(tag));
        splitmix64(a ^ splitmix64(index.wrapping_add(0x632b_e59b_d9b4_e019)))
    }

    pub fn rng(&self, tag: &str, index: u64) -> StreamRng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.master.to_le_bytes());
        key[8..16].copy_from_slice(&tag_hash(tag).to_le_bytes());
        key[16..24].copy_from_slice(&index.to_le_bytes());
        key[24..].copy_from_slice(&self.seed(tag, index).to_le_bytes());
        ChaCha8Rng::from_seed(key)
    }

    /// A child stream, e.g. one per replicate.
    pub fn child(&self, tag: &str, index: u64) -> SeedStream {
        SeedStream::new(self.seed(tag, index))
    }
}

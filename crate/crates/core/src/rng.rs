//! Seed derivation.
//!
//! Every random quantity in a run is drawn from a ChaCha stream addressed by
//! `(key, stream)`, where the key is derived from the run's single 64-bit seed
//! by hashing a path of labels. ChaCha is counter based, so two streams never
//! share state and the draw order inside one stream is the only thing that
//! fixes its output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A node in the seed tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedStream {
    key: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn hash_label(label: &str) -> u64 {
    // FNV-1a; labels are short static identifiers.
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        SeedStream {
            key: splitmix64(seed),
        }
    }

    /// Child node addressed by an integer index (seed number, run number, ...).
    pub fn child(&self, index: u64) -> Self {
        SeedStream {
            key: splitmix64(self.key ^ splitmix64(index.wrapping_add(0x5851_F42D_4C95_7F2D))),
        }
    }

    /// Child node addressed by a label.
    pub fn named(&self, label: &str) -> Self {
        self.child(hash_label(label))
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.key)
    }
}

impl From<u64> for SeedStream {
    fn from(seed: u64) -> Self {
        SeedStream::new(seed)
    }
}

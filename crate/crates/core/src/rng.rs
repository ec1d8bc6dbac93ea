//! Seeded random streams.
//!
//! Every stream is a ChaCha8 generator seeded through `seed_from_u64`, whose
//! output is fixed by the `rand_chacha` crate across platforms. Uniform
//! floats use the top 53 bits of one `u64` draw. Independent streams for
//! parallel work come from ChaCha's 64-bit stream selector, and labelled
//! sub-seeds from the first eight bytes of SHA-256.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Stream = ChaCha8Rng;

pub fn generator(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream `index` of the generator family keyed by `seed`.
pub fn substream(seed: u64, index: u64) -> Stream {
    let mut rng = generator(seed);
    rng.set_stream(index);
    rng
}

/// Uniform draw on [0, 1).
pub fn unit_f64<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Stable seed for the run called `label` under `master`.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

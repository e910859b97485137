//! Seed derivation. Every random stream in the crate is a ChaCha8 generator
//! whose seed is a pure function of a root seed and a list of labels, so
//! parallel and serial execution consume identical streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

/// Label component for [`derive_seed`].
#[derive(Debug, Clone, Copy)]
pub enum Label<'a> {
    Str(&'a str),
    Int(u64),
}

impl<'a> From<&'a str> for Label<'a> {
    fn from(s: &'a str) -> Self {
        Label::Str(s)
    }
}

impl From<u64> for Label<'_> {
    fn from(n: u64) -> Self {
        Label::Int(n)
    }
}

impl From<usize> for Label<'_> {
    fn from(n: usize) -> Self {
        Label::Int(n as u64)
    }
}

/// SHA-256 over the root seed and the labels, truncated to 64 bits.
pub fn derive_seed(root: u64, labels: &[Label<'_>]) -> u64 {
    let mut h = Sha256::new();
    h.update(root.to_le_bytes());
    for label in labels {
        match label {
            Label::Str(s) => {
                h.update([0u8]);
                h.update((s.len() as u64).to_le_bytes());
                h.update(s.as_bytes());
            }
            Label::Int(n) => {
                h.update([1u8]);
                h.update(n.to_le_bytes());
            }
        }
    }
    let digest = h.finalize();
    let mut out = [0u8; 8];
    out.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(out)
}

pub fn rng_from(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Shorthand for `rng_from(derive_seed(root, labels))`.
pub fn derived_rng(root: u64, labels: &[Label<'_>]) -> Rng {
    rng_from(derive_seed(root, labels))
}

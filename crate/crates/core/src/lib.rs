//! Probing toolkit for code-switched (Spanish-English) text.
//!
//! The crate works on precomputed per-layer embeddings stored in the CSEM
//! container format ([`embedstore`]) and provides:
//!
//! - corpus ingestion and statistics ([`corpus`]),
//! - linear probe classifiers for sentence-level code-switch detection and
//!   token-level language identification ([`probe`]),
//! - structural distance probes, MST parsing and UUAS / distance-Spearman
//!   evaluation ([`structprobe`]),
//! - exact graph edit distance between unordered trees ([`treedist`]),
//! - synthetic code-switch generation by random token and noun-phrase
//!   replacement ([`csgen`]),
//! - cosine-similarity consistency analysis ([`semsim`]),
//! - the shared rank-statistics kernel ([`stats`]).

pub mod corpus;
pub mod csgen;
pub mod embedstore;
mod error;
pub mod optim;
pub mod probe;
pub mod semsim;
pub mod stats;
pub mod structprobe;
pub mod tree;
pub mod treedist;

pub use error::{Error, Result};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The RNG used everywhere a seed is accepted. ChaCha output is stable
/// across platforms and crate versions, which keeps seeded runs reproducible.
pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// 64-bit FNV-1a, used to derive per-record seeds from string ids.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

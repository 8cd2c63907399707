//! Core algorithms for domain-adaptive fine-tuning of sequence labelers.
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature. Everything here is pure computation over in-memory data: corpora
//! and orthographic shift generation, subword vocabularies, a miniature
//! transformer encoder with hand-written backpropagation, the masked-LM
//! masking protocol, the training pipelines for the four system variants,
//! tagset handling and evaluation. File formats and the command-line front
//! end live in the companion `seqadapt` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod corpus;
pub mod encoder;
pub mod error;
pub mod eval;
pub mod hash;
pub mod mlm;
pub mod pipelines;
pub mod shift;
pub mod synthetic;
pub mod tagmap;
pub mod tokenizer;

pub use error::{Error, Result};

/// Deterministic RNG used across the crate.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Builds the crate RNG from a 64-bit seed.
pub fn rng_from_seed(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}

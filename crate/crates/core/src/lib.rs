//! Relation-aware heterogeneous graph neural networks.
//!
//! The crate is `no_std` (it needs `alloc`) and contains everything that is pure
//! computation:
//!
//! - [`tensor`]: a small dense-matrix reverse-mode autodiff tape with a
//!   finite-difference gradient checker.
//! - [`hetgraph`]: typed heterogeneous graphs, decomposition into relation-specific
//!   graphs with inverse relations, and layered neighbor sampling.
//! - [`layers`]: the relation-aware layer (relation-specific attention convolution,
//!   weighted residual, cross-relation message passing, relation representation
//!   update) and the relation-aware fusing head.
//! - [`training`]: losses, Adam, cosine annealing, negative sampling and the
//!   early-stopped training loops for node classification and link prediction.
//! - [`eval`]: accuracy, macro-F1, NMI, ARI, RMSE/MAE and k-means.
//!
//! File formats, synthetic data generation and the command line driver live in the
//! `rhgnn-cli` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

mod error;
pub mod eval;
pub mod hetgraph;
pub mod layers;
pub mod math;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};

/// Deterministic RNG used throughout the crate.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Builds the crate RNG from a 64-bit seed.
pub fn seeded_rng(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}

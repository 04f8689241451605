//! Synthetic tabular data generation with covariance-conditioned tail outliers.
//!
//! This crate holds the numerical core and builds without `std` (it needs
//! `alloc`). File formats, the command-line tool and thread pools live in
//! the `zgen` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod classifier;
pub mod corr;
pub mod covgen;
pub mod cvae;
pub mod error;
pub mod gan;
pub mod harness;
pub mod linalg;
pub mod nnet;
pub mod preprocess;
pub mod rng;
pub mod special;
pub mod split;
pub mod stats;
pub mod table;

pub use error::{Error, Result};

/// Stable 64-bit FNV-1a hash.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    use core::hash::Hasher;
    let mut h = fnv::FnvHasher::default();
    h.write(bytes);
    h.finish()
}

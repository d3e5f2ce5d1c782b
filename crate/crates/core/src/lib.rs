//! Style-popularity influence discovery and forecasting.
//!
//! The pipeline runs attribute records through a Gaussian-mixture style
//! model, bins the style posteriors into weekly per-city popularity
//! trajectories, discovers directed city-to-city influence with lagged
//! Granger tests, and trains per-city networks wired to their influencers
//! under a coherence penalty that ties the cities of a style together.

pub mod config;
pub mod datamodel;
pub mod error;
pub mod forecast;
pub mod influence;
pub mod numstats;
pub mod pipeline;
pub mod styles;
pub mod synthetic;
pub mod trajectories;

pub use error::{Error, Result};

/// Derives an independent stream seed from a master seed and a stage label
/// (splitmix64 over the master seed xor an FNV-1a hash of the label).
pub fn derive_seed(master: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = (master ^ h).wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

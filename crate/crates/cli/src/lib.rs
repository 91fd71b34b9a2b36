//! Command-line orchestration for the histosr toolkit: degradation, IQA
//! curation, scorer training, evaluation reports, tiling and sampler checks.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;

pub use commands::{run, Context};
pub use error::{CliError, CliResult, EXIT_RUNTIME, EXIT_VALIDATION};

/// SplitMix64 finalizer.
fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for item `index` under a master seed; independent of processing order.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

//! Seed derivation.
//!
//! Every random stream in the workbench descends from one top-level seed.
//! A child seed is `mix(mix(parent ^ fnv1a(tag)) + index)` where `mix` is the
//! SplitMix64 finalizer and `fnv1a` is 64-bit FNV-1a over the tag's UTF-8
//! bytes. The mapping is fixed so that parallel and sequential execution
//! draw identical streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |hash, &b| (hash ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// SplitMix64 output function.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive(parent: u64, tag: &str, index: u64) -> u64 {
    mix(mix(parent ^ fnv1a(tag.as_bytes())).wrapping_add(index))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_rng(parent: u64, tag: &str, index: u64) -> ChaCha8Rng {
    rng(derive(parent, tag, index))
}

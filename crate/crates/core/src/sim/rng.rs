//! Per-entity random streams.
//!
//! Every molecule, receptor and burst owns a generator derived from
//! `(seed, domain, index)` alone, so the draws an entity sees do not depend
//! on how work is split between threads.

use rand_pcg::Pcg64Mcg;

/// Stream families; part of the key so two entity kinds with the same index
/// never share a stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Molecule = 1,
    Receptor = 2,
    Burst = 3,
    Experiment = 4,
    Synthetic = 5,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a key tuple into a 64-bit value.
pub fn derive_seed(seed: u64, domain: Domain, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64((domain as u64) ^ splitmix64(index).rotate_left(17)))
}

/// Generator for entity `index` of `domain`.
pub fn stream(seed: u64, domain: Domain, index: u64) -> Pcg64Mcg {
    let hi = derive_seed(seed, domain, index);
    let lo = splitmix64(hi ^ 0x6a09_e667_f3bc_c909);
    // MCG state must be odd.
    Pcg64Mcg::new(((hi as u128) << 64) | (lo as u128) | 1)
}

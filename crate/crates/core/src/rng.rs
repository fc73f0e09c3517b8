//! Counter-based seeding.
//!
//! Every random quantity in the crate is drawn from a ChaCha stream addressed
//! by `(seed, index)`, so draw `i` of any procedure can be regenerated without
//! producing draws `0..i` first, and parallel execution order never changes
//! results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags keep derived seeds of unrelated procedures apart.
pub mod tag {
    pub const SPLIT: u64 = 0x5350_4c49_5400_0001;
    pub const FOLDS: u64 = 0x464f_4c44_5300_0002;
    pub const PERMUTE: u64 = 0x5045_524d_5500_0003;
    pub const FIT: u64 = 0x4649_5400_0000_0004;
    pub const BOOTSTRAP: u64 = 0x424f_4f54_0000_0005;
    pub const TREE: u64 = 0x5452_4545_0000_0006;
    pub const TUNE: u64 = 0x5455_4e45_0000_0007;
    pub const ENSEMBLE: u64 = 0x454e_5345_4d00_0008;
    pub const DGP: u64 = 0x4447_5000_0000_0009;
    pub const REPLICATION: u64 = 0x5245_504c_0000_000a;
    pub const TEST: u64 = 0x5445_5354_0000_000b;
}

/// SplitMix64 finalizer.
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from `seed` and an index. Distinct `(seed, index)`
/// pairs give statistically independent children.
#[inline]
pub fn derive(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index ^ 0x6a09_e667_f3bc_c908))
}

/// The random stream addressed by `(seed, index)`.
pub fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

//! Deterministic counter-based RNG derivation.
//!
//! Work is partitioned into (stream, block) units, each owning an
//! independent ChaCha8 generator keyed by the user seed and the unit
//! coordinates. Results are therefore identical for any parallel schedule.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Samples drawn per block by the Monte Carlo and simulation drivers.
pub const BLOCK_SIZE: u64 = 16_384;

/// RNG for block `block` of stream `stream` under `seed`.
///
/// The three coordinates occupy disjoint bytes of the ChaCha key, so
/// distinct units can never collide.
pub fn block_rng(seed: u64, stream: u64, block: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&stream.to_le_bytes());
    key[16..24].copy_from_slice(&block.to_le_bytes());
    key[24..32].copy_from_slice(b"mcserblk");
    ChaCha8Rng::from_seed(key)
}

/// Split `total` into [`BLOCK_SIZE`]-sized blocks: (block count, last size).
pub fn blocks_of(total: u64) -> (u64, u64) {
    if total == 0 {
        return (0, 0);
    }
    let full = total / BLOCK_SIZE;
    let rem = total % BLOCK_SIZE;
    if rem == 0 {
        (full, BLOCK_SIZE)
    } else {
        (full + 1, rem)
    }
}

/// Number of samples in block `block` out of `total`.
pub fn block_len(total: u64, block: u64) -> u64 {
    let (count, last) = blocks_of(total);
    debug_assert!(block < count);
    if block + 1 == count {
        last
    } else {
        BLOCK_SIZE
    }
}

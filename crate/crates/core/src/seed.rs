//! Named random substreams derived from one root seed, and seeded
//! frame subsampling.

use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Seed for the substream `name` of `root`. Distinct names give
/// independent-looking seeds; the mapping is stable across releases.
pub fn substream(root: u64, name: &str) -> u64 {
    // FNV-1a over the name, then a splitmix64 finalizer over the mix
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = root ^ h.rotate_left(17);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Indices kept when choosing `keep` of every `block` consecutive frames
/// out of `count`. A trailing partial block keeps the same fraction,
/// rounded up. The result is sorted.
pub fn subsample(count: usize, keep: usize, block: usize, seed: u64) -> Result<Vec<usize>> {
    if keep == 0 || keep > block {
        return Err(Error::InvalidConfig("subsample needs 1 <= m <= n".into()));
    }
    let mut out = Vec::with_capacity(count * keep / block + 1);
    for (b, start) in (0..count).step_by(block).enumerate() {
        let len = block.min(count - start);
        let m = (keep * len).div_ceil(block);
        let mut rng = ChaCha8Rng::seed_from_u64(substream(seed, "subsample") ^ b as u64);
        let mut picked: Vec<usize> = sample(&mut rng, len, m).into_iter().map(|i| start + i).collect();
        picked.sort_unstable();
        out.extend(picked);
    }
    Ok(out)
}

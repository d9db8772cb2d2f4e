//! Deterministic random substreams.
//!
//! Every Monte Carlo loop in the crate splits its trials into fixed-size
//! chunks. Chunk `c` of a computation draws from a xoshiro256++ generator
//! seeded by hashing `(seed, label, c)`, so the numbers a trial sees depend
//! only on the seed, the purpose label and the trial's chunk, never on how
//! many workers ran the chunks. Partial results are merged in chunk order.

use alloc::vec::Vec;
use core::ops::Range;

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

/// Generator used throughout the crate.
pub type StreamRng = Xoshiro256PlusPlus;

/// Trials per chunk for Monte Carlo loops over host vectors.
pub const TRIAL_CHUNK: usize = 64;

/// Purpose labels, so that e.g. host draws and attack noise never share a stream.
pub mod labels {
    pub const KEY: u64 = 0x4b45_5900;
    pub const HOST: u64 = 0x484f_5354;
    pub const HOST_H0: u64 = 0x4830_0000;
    pub const HOST_H1: u64 = 0x4831_0000;
    pub const NOISE: u64 = 0x4e4f_4953;
    pub const NOISE_H0: u64 = 0x4e30_0000;
    pub const NOISE_H1: u64 = 0x4e31_0000;
    pub const MOMENTS: u64 = 0x4d4f_4d00;
    pub const CALIBRATION: u64 = 0x4341_4c00;
    pub const INNER: u64 = 0x494e_4e00;
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for stream `index` of the `(seed, label)` family.
pub fn substream(seed: u64, label: u64, index: u64) -> StreamRng {
    let key = mix64(seed ^ mix64(label));
    Xoshiro256PlusPlus::seed_from_u64(mix64(key ^ mix64(index ^ 0x6a09_e667_f3bc_c909)))
}

/// Splits `0..total` into consecutive ranges of length `chunk` (the last may be shorter).
pub fn chunk_ranges(total: usize, chunk: usize) -> Vec<Range<usize>> {
    assert!(chunk > 0);
    (0..total.div_ceil(chunk))
        .map(|c| c * chunk..((c + 1) * chunk).min(total))
        .collect()
}

/// Evaluates `f(chunk_index, trial_range)` over every chunk and returns the
/// results in chunk order. Runs on the rayon pool when the `parallel`
/// feature is enabled.
pub fn map_chunks<T, F>(total: usize, chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, Range<usize>) -> T + Sync + Send,
{
    let ranges = chunk_ranges(total, chunk);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        ranges
            .into_par_iter()
            .enumerate()
            .map(|(c, r)| f(c, r))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        ranges.into_iter().enumerate().map(|(c, r)| f(c, r)).collect()
    }
}

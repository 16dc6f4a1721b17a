//! Counter-based random streams.
//!
//! Every random draw in the crate comes from a ChaCha stream addressed by
//! `(seed, domain, major, minor)`, so replicate `k` of round `r` sees the
//! same numbers whether replicates run serially or in parallel.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains; distinct purposes never share a stream.
pub mod domain {
    pub const NULL_OUTCOME: u64 = 1;
    pub const RESAMPLING: u64 = 2;
    pub const SIMULATION: u64 = 3;
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent generator for `(seed, domain)` and a 64-bit stream index
/// built from `major` (high 32 bits) and `minor` (low 32 bits).
pub fn stream(seed: u64, domain: u64, major: u64, minor: u64) -> ChaCha8Rng {
    let mut state = seed ^ domain.wrapping_mul(0xD1B5_4A32_D192_ED03);
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream((major << 32) ^ (minor & 0xFFFF_FFFF));
    rng
}

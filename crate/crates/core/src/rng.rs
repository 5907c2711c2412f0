//! Reproducible random streams for Monte Carlo trials.
//!
//! Every trial owns a ChaCha8 key derived from `(seed, trial)`; each sampler
//! step reads from its own stream of that key. Draws therefore depend only
//! on the `(seed, trial, step)` coordinates and never on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer, used to spread `(seed, trial)` over a 256-bit key.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn key(seed: u64, trial: u64) -> [u8; 32] {
    let mut out = [0u8; 32];
    let mut state = mix64(seed) ^ trial.wrapping_mul(0xd6e8_feb8_6659_fd93);
    for chunk in out.chunks_exact_mut(8) {
        state = mix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    out
}

/// The generator for one `(seed, trial, stream)` coordinate.
pub fn stream_rng(seed: u64, trial: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(key(seed, trial));
    rng.set_stream(stream);
    rng
}

//! Counter-based per-replication random streams.
//!
//! A replication stream is a ChaCha8 keystream whose key comes from the master
//! seed and an experiment tag and whose 64-bit stream id is the replication
//! index. No stream depends on any other having been consumed first.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the 256-bit ChaCha key for `(master_seed, tag)`.
pub fn derive_key(master_seed: u64, tag: u64) -> [u8; 32] {
    let mut state = master_seed ^ splitmix64(&mut tag.wrapping_mul(0xD6E8_FEB8_6659_FD93));
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

/// Stream for replication `replication` of experiment `tag` under `master_seed`.
pub fn stream_rng(master_seed: u64, tag: u64, replication: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(derive_key(master_seed, tag));
    rng.set_stream(replication);
    rng
}

/// Tag mixing a grid coordinate (e.g. the field size) into an experiment tag.
pub fn grid_tag(tag: u64, coordinate: u64) -> u64 {
    let mut s = tag ^ coordinate.rotate_left(32);
    splitmix64(&mut s)
}

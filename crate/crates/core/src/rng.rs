//! Seeded random streams.
//!
//! Every consumer of randomness asks for a named substream of the root seed,
//! optionally indexed by a counter (iteration, point index). Streams are
//! ChaCha8 keyed by a hash of `(root, name)` with the counter as the ChaCha
//! stream id, so results never depend on call order or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn stream_key(root: u64, name: &str) -> [u8; 32] {
    // FNV-1a over the name, then mixed with the root seed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut key = [0u8; 32];
    let mut s = splitmix64(root ^ splitmix64(h));
    for chunk in key.chunks_mut(8) {
        s = splitmix64(s);
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    key
}

/// Substream `name` of `root`, positioned at counter `index`.
pub fn stream(root: u64, name: &str, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::from_seed(stream_key(root, name));
    rng.set_stream(index);
    rng
}

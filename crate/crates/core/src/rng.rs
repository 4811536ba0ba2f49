//! Deterministic splittable random streams.
//!
//! Every source of randomness in a run is a substream derived from one root
//! seed plus a list of integer tags (a purpose tag, then indices such as
//! device id and round). Substreams are independent of execution order, so
//! serial and parallel runs of the same configuration produce bit-identical
//! results.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags for derived substreams. Listed here so call sites cannot
/// collide by accident.
pub mod tag {
    pub const INIT: u64 = 1;
    pub const PARTITION: u64 = 2;
    pub const CLIENT_SAMPLING: u64 = 3;
    pub const DEVICE: u64 = 4;
    pub const CERTIFY: u64 = 5;
    pub const BLOBS: u64 = 6;
    pub const SPLIT: u64 = 7;
    pub const NOISE: u64 = 8;
}

/// splitmix64 step: returns the output for the advanced state.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives independent random streams from a single root seed.
#[derive(Debug, Clone, Copy)]
pub struct StreamFactory {
    seed: u64,
}

impl StreamFactory {
    pub fn new(seed: u64) -> Self {
        StreamFactory { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derives a ChaCha8 stream keyed by the root seed and the tag list.
    /// Each tag is folded through splitmix64 before mixing so that
    /// structurally different tag lists land in unrelated keys.
    pub fn stream(&self, tags: &[u64]) -> ChaCha8Rng {
        let mut state = self.seed ^ 0x6a09_e667_f3bc_c908;
        let _ = splitmix64(&mut state);
        for &t in tags {
            state ^= t.wrapping_mul(0x9e37_79b9_7f4a_7c15);
            let _ = splitmix64(&mut state);
        }
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }

    /// Stream for the local training of `device` in learning round `round`.
    pub fn device_stream(&self, device: usize, round: usize) -> ChaCha8Rng {
        self.stream(&[tag::DEVICE, device as u64, round as u64])
    }

    /// Stream for sampling the client subset of `round`.
    pub fn client_sampling_stream(&self, round: usize) -> ChaCha8Rng {
        self.stream(&[tag::CLIENT_SAMPLING, round as u64])
    }

    /// Stream for certifying test point `index`.
    pub fn certify_stream(&self, index: usize) -> ChaCha8Rng {
        self.stream(&[tag::CERTIFY, index as u64])
    }
}

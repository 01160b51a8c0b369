//! Splittable random-number substreams.
//!
//! Every stochastic component draws from its own stream, keyed by
//! `(experiment seed, r index, replication index, role)`. Streams are
//! ChaCha8 generators with keys derived by a SplitMix64 chain, so distinct
//! keys give independent streams and a fixed key always reproduces the same
//! draws regardless of how replications are scheduled.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a substream is used for. Distinct roles never share a stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StreamRole {
    Arrivals,
    Services,
    Initial,
    Diffusion,
    Bootstrap,
}

impl StreamRole {
    fn tag(self) -> u64 {
        match self {
            StreamRole::Arrivals => 1,
            StreamRole::Services => 2,
            StreamRole::Initial => 3,
            StreamRole::Diffusion => 4,
            StreamRole::Bootstrap => 5,
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the substream for `(seed, r_index, replication, role)`.
pub fn substream(seed: u64, r_index: u64, replication: u64, role: StreamRole) -> ChaCha8Rng {
    let mut state = seed;
    // Absorb the key fields, then squeeze a 256-bit ChaCha key.
    for field in [r_index, replication, role.tag()] {
        let mixed = splitmix64(&mut state);
        state ^= field.wrapping_mul(0xd605_bbb5_8c8e_c2a9) ^ mixed;
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

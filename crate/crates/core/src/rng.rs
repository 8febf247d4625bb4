//! Purpose-keyed random streams.
//!
//! Every random decision in a trial draws from a stream identified by
//! `(key, purpose)`. Streams with different purposes are independent, and a
//! stream's output never depends on how much any other stream was consumed.
//! This is what lets several mechanisms share one trial's clustering and
//! rankings, and lets a misreporting agent be replayed against exactly the
//! same rounding and assignment draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. The tag selects the ChaCha stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Clusters,
    Rankings,
    AssignStage1,
    AssignStage2,
    /// Seat/quota remainder permutations (Partition).
    Quotas,
    /// Randomized rounding of cluster shares.
    Rounding,
    /// Per-trial agent priority used to break score ties.
    Ties,
    Other(u32),
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Clusters => 1,
            Purpose::Rankings => 2,
            Purpose::AssignStage1 => 3,
            Purpose::AssignStage2 => 4,
            Purpose::Quotas => 5,
            Purpose::Rounding => 6,
            Purpose::Ties => 7,
            Purpose::Other(x) => 0x100 + u64::from(x),
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes a sequence of words into one 64-bit key.
pub fn mix(parts: &[u64]) -> u64 {
    let mut state = 0x5EED_0F_F1CE_u64;
    let mut acc = 0u64;
    for &p in parts {
        state ^= p;
        acc = splitmix64(&mut state) ^ acc.rotate_left(17);
    }
    splitmix64(&mut state) ^ acc
}

/// A family of independent random streams sharing one key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Streams {
    seed: [u8; 32],
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Self::from_parts(&[seed])
    }

    /// Keyed by an arbitrary tuple, e.g. `(master seed, cell hash, trial)`.
    pub fn from_parts(parts: &[u64]) -> Self {
        let mut state = mix(parts);
        let mut seed = [0u8; 32];
        for chunk in seed.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        Streams { seed }
    }

    pub fn rng(&self, purpose: Purpose) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(purpose.tag());
        rng
    }
}

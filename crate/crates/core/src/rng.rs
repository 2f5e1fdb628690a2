//! Counter-based random streams.
//!
//! Every random draw in the crate comes from a stream addressed by
//! `(master_seed, purpose, iteration, index)`. The address fully determines the
//! generator state, so scenario sets are identical no matter how work is split
//! across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Distinct purposes never share draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Purpose {
    /// Scenarios feeding the mini-batch gradient at an iteration.
    Gradient,
    /// Scenarios used to score iterates.
    Evaluation,
    /// Finite-difference evaluations; the iteration slot carries `2 * coord + side`.
    FiniteDifference,
    /// Generic Monte Carlo estimation outside the optimizer.
    MonteCarlo,
    /// Diagnostics (Lemma-type identities, KS checks).
    Diagnostic,
    /// Drawing asset drifts and volatilities for a synthetic market.
    Market,
    /// Seeds of independent optimizer repetitions.
    Repetition,
    /// Projection sweeps and other test-style random inputs.
    Sweep,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Gradient => 0x4752_4144,
            Purpose::Evaluation => 0x4556_414c,
            Purpose::FiniteDifference => 0x4644_4946,
            Purpose::MonteCarlo => 0x4d43_4152,
            Purpose::Diagnostic => 0x4449_4147,
            Purpose::Market => 0x4d4b_5420,
            Purpose::Repetition => 0x5245_5053,
            Purpose::Sweep => 0x5357_5050,
        }
    }
}

/// Address of one random stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub purpose: Purpose,
    pub iteration: u64,
    pub index: u64,
}

impl StreamKey {
    pub fn new(seed: u64, purpose: Purpose) -> Self {
        StreamKey {
            seed,
            purpose,
            iteration: 0,
            index: 0,
        }
    }

    pub fn iteration(self, iteration: u64) -> Self {
        StreamKey { iteration, ..self }
    }

    pub fn index(self, index: u64) -> Self {
        StreamKey { index, ..self }
    }

    /// Generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut state = self.seed ^ 0x243f_6a88_85a3_08d3;
        let words = [
            mix(&mut state, self.purpose.tag()),
            mix(&mut state, self.iteration),
            mix(&mut state, self.index),
            mix(&mut state, 0x1319_8a2e_0370_7344),
        ];
        let mut seed = [0u8; 32];
        for (chunk, word) in seed.chunks_exact_mut(8).zip(words) {
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }

    /// A 64-bit seed derived from this address, for seeding nested runs.
    pub fn derive_seed(&self) -> u64 {
        let mut state = self.seed ^ 0x9e37_79b9_7f4a_7c15;
        mix(&mut state, self.purpose.tag());
        mix(&mut state, self.iteration);
        mix(&mut state, self.index)
    }
}

// splitmix64 absorbing one word.
fn mix(state: &mut u64, word: u64) -> u64 {
    *state = state.wrapping_add(word).wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

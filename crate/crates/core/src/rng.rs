//! Counter-based random streams.
//!
//! Every stochastic input is addressed by a [`StreamKey`]: an experiment
//! seed, a replication index and a process index. The key maps to a ChaCha8
//! block cipher keyed by the seed, with the (replication, process) pair
//! selecting the 64-bit stream. Streams are independent of each other and of
//! the order in which they are consumed, so work can be split across
//! threads without any shared generator state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

const PROCESS_BITS: u32 = 16;

/// Address of one independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub replication: u64,
    pub process: u16,
}

impl StreamKey {
    pub fn new(seed: u64, replication: u64, process: u16) -> Self {
        Self {
            seed,
            replication,
            process,
        }
    }

    pub fn with_process(self, process: u16) -> Self {
        Self { process, ..self }
    }

    /// Instantiates the generator for this stream.
    ///
    /// Replication indices must stay below 2^48 so that the packed stream
    /// id is injective.
    pub fn rng(&self) -> StreamRng {
        debug_assert!(self.replication < 1 << (64 - PROCESS_BITS));
        let mut state = self.seed;
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream((self.replication << PROCESS_BITS) | u64::from(self.process));
        rng
    }
}

/// Derives the seed of grid cell `cell` from an experiment's base seed.
pub fn cell_seed(base_seed: u64, cell: u64) -> u64 {
    let mut state = base_seed ^ cell.wrapping_mul(0xD1B5_4A32_D192_ED03);
    splitmix64(&mut state);
    splitmix64(&mut state)
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

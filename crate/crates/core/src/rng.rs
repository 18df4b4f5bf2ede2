//! Named random streams derived from one master seed.
//!
//! Every random draw in the toolkit comes from a [`Stream`] identified by a
//! master seed and a path such as `"generator/replicate-17"`. The derivation
//! is fixed and language independent:
//!
//! 1. `h = fnv1a64(path)` (offset basis `0xcbf29ce484222325`, prime
//!    `0x100000001b3`, bytes of the UTF-8 path).
//! 2. `s = splitmix64(master ^ h)` where `splitmix64` is one output step of
//!    the SplitMix64 generator started at the given state.
//! 3. The 32-byte ChaCha8 key is the little-endian concatenation of four
//!    consecutive SplitMix64 outputs started at state `s`.
//!
//! Two streams with different paths are statistically independent for all
//! practical purposes, and a replicate's stream does not depend on how
//! replicates are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// One SplitMix64 step: advances `state` and returns the mixed output.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the stream `path` under `master`.
pub fn derive_seed(master: u64, path: &str) -> u64 {
    let mut state = master ^ fnv1a64(path.as_bytes());
    splitmix64(&mut state)
}

pub type StreamRng = ChaCha8Rng;

/// A named stream. Cheap to clone; `rng()` always restarts from the beginning.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Stream {
    master: u64,
    path: String,
}

impl Stream {
    pub fn new(master: u64, path: impl Into<String>) -> Self {
        Self {
            master,
            path: path.into(),
        }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn path(&self) -> &str {
        &self.path
    }

    /// Child stream `"<path>/<name>"`.
    pub fn child(&self, name: impl AsRef<str>) -> Stream {
        Stream {
            master: self.master,
            path: format!("{}/{}", self.path, name.as_ref()),
        }
    }

    pub fn replicate(&self, index: usize) -> Stream {
        self.child(format!("replicate-{index}"))
    }

    pub fn seed(&self) -> u64 {
        derive_seed(self.master, &self.path)
    }

    pub fn rng(&self) -> StreamRng {
        rng_from_seed(self.seed())
    }
}

/// ChaCha8 keyed by four SplitMix64 outputs of `seed`.
pub fn rng_from_seed(seed: u64) -> StreamRng {
    let mut state = seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

//! Keyed random substreams.
//!
//! Every draw in a run comes from a stream identified by
//! `(master seed, frame, mechanism, id)`. The key is mixed into a ChaCha8
//! seed, so a stream's output depends only on its key and never on how many
//! other streams were consumed before it. That makes per-packet work
//! order-independent and replayable.

use std::fmt;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

/// What a substream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mechanism {
    Motion,
    Spawn,
    Birth,
    TrackLifetime,
    Death,
    Observe,
    /// Free-form streams for tools and tests.
    Aux,
}

impl Mechanism {
    fn tag(self) -> u64 {
        match self {
            Self::Motion => 1,
            Self::Spawn => 2,
            Self::Birth => 3,
            Self::TrackLifetime => 4,
            Self::Death => 5,
            Self::Observe => 6,
            Self::Aux => 7,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Motion => "motion",
            Self::Spawn => "spawn",
            Self::Birth => "birth",
            Self::TrackLifetime => "track_lifetime",
            Self::Death => "death",
            Self::Observe => "observe",
            Self::Aux => "aux",
        }
    }
}

/// Identity of a substream below the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StreamKey {
    pub frame: u64,
    pub mechanism: Mechanism,
    pub id: u64,
}

impl StreamKey {
    pub fn new(frame: usize, mechanism: Mechanism, id: u64) -> Self {
        Self { frame: frame as u64, mechanism, id }
    }
}

impl fmt::Display for StreamKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.mechanism.as_str(), self.frame, self.id)
    }
}

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn derive_seed(master: u64, key: StreamKey) -> [u8; 32] {
    let mut state = master;
    // absorb each key word, then squeeze four output words
    for word in [key.frame, key.mechanism.tag(), key.id] {
        state ^= splitmix64(&mut state) ^ word;
    }
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    seed
}

/// A deterministic random stream.
#[derive(Debug, Clone)]
pub struct RngStream {
    key: StreamKey,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, key: StreamKey) -> Self {
        Self { key, rng: ChaCha8Rng::from_seed(derive_seed(master_seed, key)) }
    }

    /// Convenience for tests and tools: an `Aux` stream with the given id.
    pub fn aux(master_seed: u64, id: u64) -> Self {
        Self::new(master_seed, StreamKey::new(0, Mechanism::Aux, id))
    }

    pub fn key(&self) -> StreamKey {
        self.key
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// Uniform draw on the open interval (0, 1).
    pub fn uniform_open01(&mut self) -> f64 {
        loop {
            let u: f64 = self.rng.random();
            if u > 0.0 {
                return u;
            }
        }
    }

    /// Poisson count; zero for a non-positive or non-finite mean.
    pub fn poisson(&mut self, mean: f64) -> u64 {
        if !(mean > 0.0) || !mean.is_finite() {
            return 0;
        }
        match Poisson::new(mean) {
            Ok(p) => {
                let k: f64 = p.sample(&mut self.rng);
                k as u64
            }
            Err(_) => 0,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
}

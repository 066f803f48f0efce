//! Reproducible, splittable random streams.
//!
//! Every random draw in the crate comes from a ChaCha12 stream addressed by
//! `(master seed, replicate, cell, purpose)`:
//!
//! * the 256-bit ChaCha key is four SplitMix64 outputs seeded with
//!   `master ^ mix(replicate)`;
//! * the 64-bit ChaCha stream id is `cell << 8 | purpose`.
//!
//! Two addresses that differ in any component never share a stream (for
//! `cell < 2^56`), and a stream's output depends on nothing but its address.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type StreamRng = ChaCha12Rng;

/// What a stream is used for. The discriminant is part of the stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Purpose {
    JumpCount = 1,
    JumpLocations = 2,
    JumpSizes = 3,
    SeriesLevels = 4,
    SeriesLocations = 5,
    SeriesMarks = 6,
    InitialField = 7,
    Validation = 8,
}

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed scope for one replicate; hands out per-cell, per-purpose streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedScope {
    pub master: u64,
    pub replicate: u64,
}

impl SeedScope {
    pub fn new(master: u64, replicate: u64) -> Self {
        Self { master, replicate }
    }

    pub fn stream(&self, cell: u64, purpose: Purpose) -> StreamRng {
        let mut mix = self.replicate;
        let mut state = self.master ^ splitmix64(&mut mix);
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha12Rng::from_seed(key);
        rng.set_stream((cell << 8) | purpose as u64);
        rng
    }
}

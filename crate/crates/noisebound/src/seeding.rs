//! Named, independently derived generator streams.
//!
//! Every stochastic component of a run draws from its own ChaCha stream,
//! derived from the run seed plus a stream label and up to two indices
//! (client, iteration). Consequences:
//!
//! * runs are bit-reproducible: the draws of one component never shift
//!   another component's stream;
//! * logically parallel units (federated clients inside a round) can be
//!   evaluated in any order or concurrently with identical results;
//! * a federated run with a single client consumes exactly the streams of a
//!   plain single-algorithm run, because a plain run is addressed as
//!   "client 0" — this is what makes the one-client federated trajectory
//!   bit-identical to the corresponding DP-SGD trajectory.
//!
//! Derivation is SplitMix64 over the (seed, label, k, t) words, expanded to
//! a 32-byte ChaCha key. SplitMix64 is a bijective mixer, so distinct
//! addresses give distinct keys.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a derived stream is for. The numeric discriminant is part of the
/// derivation address, so the order of variants must stay fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    /// Initial parameter draw.
    Init = 1,
    /// Data order: batch shuffling / partition construction for client `k`.
    Data = 2,
    /// Additive noise at one iteration.
    Noise = 3,
    /// Held-out statistics subsampling at one iteration.
    Stats = 4,
    /// Gradient-pair subsampling for the pair-cost statistic.
    Pairs = 5,
    /// Client selection at one federated round.
    Select = 6,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed for `(seed, tag)` — used when a run needs several
/// *datasets* (train/test/pool, or one per federated client) that must be
/// mutually independent yet reproducible from the one run seed. Distinct
/// tags give distinct children.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut state = seed ^ tag.wrapping_mul(0xd6e8_feb8_6659_fd93);
    splitmix64(&mut state)
}

/// Derive the generator for `(seed, stream, k, t)`.
///
/// `k` is a client index (0 for non-federated runs), `t` an iteration or
/// round index (0 where the stream is per-run rather than per-iteration).
pub fn stream_rng(seed: u64, stream: Stream, k: u64, t: u64) -> ChaCha8Rng {
    let mut state = seed
        ^ (stream as u64).wrapping_mul(0xa076_1d64_78bd_642f)
        ^ k.wrapping_mul(0xe703_7ed1_a0b4_28db)
        ^ t.wrapping_mul(0x8ebc_6af0_9c88_c6e3);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

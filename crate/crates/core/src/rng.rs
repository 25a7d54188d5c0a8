//! Deterministic random-number streams.
//!
//! Every waveform draws from its own counter-derived stream, so a batch is
//! bit-identical whether synthesized serially or across any number of worker
//! threads. Auxiliary consumers (basis completion, verification re-runs,
//! sweep trials) derive independent sub-seeds from the same master seed.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 step, the standard 64-bit seed scrambler.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Expand a 64-bit seed into a 256-bit ChaCha key.
fn expand_key(seed: u64) -> [u8; 32] {
    let mut state = seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

/// Mix a seed with a domain tag and an index into a fresh sub-seed.
pub fn derive_seed(seed: u64, tag: u64, index: u64) -> u64 {
    let mut state = seed ^ tag.rotate_left(24);
    let a = splitmix64(&mut state);
    let mut state2 = a ^ index;
    splitmix64(&mut state2)
}

/// Domain tags for [`derive_seed`].
pub mod tag {
    pub const BASIS: u64 = 0x4241_5349;
    pub const VERIFY_PLUS: u64 = 0x5652_4659;
    pub const VERIFY_MINUS: u64 = 0x5652_464D;
    pub const SWEEP_POINT: u64 = 0x5357_5054;
}

/// Stream for waveform `index` of the batch seeded by `seed`.
///
/// All waveforms share one key; the ChaCha stream counter separates them, so
/// any subset of waveforms can be generated independently and in any order.
pub fn waveform_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(expand_key(seed));
    rng.set_stream(index);
    rng
}

/// Stream for a non-waveform purpose (e.g. basis completion).
pub fn tagged_rng(seed: u64, tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(expand_key(derive_seed(seed, tag, 0)))
}

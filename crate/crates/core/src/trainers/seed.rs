//! Counter-based seed derivation. A child seed depends only on its parent, a
//! stream tag and an index, never on how many other seeds were drawn before,
//! so results do not depend on scheduling or worker count.

/// Stream tags used by the trainers.
pub mod stream {
    pub const ITERATION: u64 = 1;
    pub const DIRECTION: u64 = 2;
    pub const RESET: u64 = 3;
    pub const EVALUATION: u64 = 4;
    pub const SAMPLE: u64 = 5;
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// One round of the SplitMix64 output function.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(parent: u64, stream: u64, index: u64) -> u64 {
    let a = splitmix64(parent ^ stream.wrapping_mul(GOLDEN).rotate_left(17));
    splitmix64(a ^ splitmix64(index.wrapping_add(stream << 32)))
}

//! Counter-keyed seed derivation.
//!
//! Every random stream in the crate is a ChaCha8 generator whose 256-bit key is
//! derived from a master seed plus a path of integer keys (cell index,
//! replication index, purpose tag, arm...). Streams never depend on execution
//! order, so serial and parallel runs draw identical numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream tags used inside one replication seed.
pub(crate) mod tag {
    pub const ARM_CHOICE: u64 = 0;
    pub const REWARDS: u64 = 1;
    pub const BROWNIAN: u64 = 2;
    pub const CHI: u64 = 3;
    pub const ORACLE: u64 = 4;
    pub const LINEAR_MC: u64 = 5;
    pub const ODE_DRIVER: u64 = 6;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `master` and a key path.
pub fn derive_seed(master: u64, keys: &[u64]) -> u64 {
    keys.iter().fold(splitmix64(master), |acc, &k| {
        splitmix64(acc ^ splitmix64(k.wrapping_add(0x632b_e59b_d9b4_e019)))
    })
}

/// A generator keyed on `master` and a key path.
pub fn stream(master: u64, keys: &[u64]) -> SimRng {
    let mut state = derive_seed(master, keys);
    let mut bytes = [0u8; 32];
    for chunk in bytes.chunks_exact_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}

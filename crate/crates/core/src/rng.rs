//! Seeded random streams. One run seed fans out into independent ChaCha
//! streams so that e.g. toggling augmentation never perturbs the dropout
//! masks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Init = 1,
    /// Epoch shuffling and augmentation draws.
    Data = 2,
    Dropout = 3,
}

pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

//! Per-run random stream tree.
//!
//! Every consumer of randomness in a run owns a ChaCha8 stream keyed by
//! `(run seed, role, index)`, so the draws one player sees never depend on
//! how many draws anybody else made or on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Role {
    /// One stream per player: delay draw, then posterior samples in arm
    /// order, then reward binarization.
    Player = 1,
    /// Reward noise for every matched pair, in player order.
    Environment = 2,
    /// The central platform of centralized algorithms.
    Platform = 3,
    /// Market generation for seed-dependent generators.
    Market = 4,
}

pub fn substream(seed: u64, role: Role, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((role as u64) << 48) | (index & 0xFFFF_FFFF_FFFF));
    rng
}

//! Seeded random streams.
//!
//! Every random quantity is drawn from a ChaCha8 stream keyed by the master
//! seed and selected by `(replicate index, role)`. Streams never overlap, so
//! replicate `i` produces the same draws regardless of which worker runs it
//! or in which order replicates are evaluated.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for within one replicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamRole {
    /// Per-hypothesis noise.
    Noise = 0,
    /// Shared factors (equicorrelation factor, common control).
    Shared = 1,
    /// Raw group samples for the filtering demonstration.
    Samples = 2,
    /// Mixture membership draws.
    Membership = 3,
}

const ROLES: u64 = 8;

/// Returns the stream for `(seed, replicate, role)`.
pub fn stream(seed: u64, replicate: u64, role: StreamRole) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate.wrapping_mul(ROLES).wrapping_add(role as u64));
    rng
}

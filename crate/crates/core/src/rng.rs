//! Seeded random-number streams.
//!
//! All stochastic routines in this crate draw from ChaCha8 streams keyed by
//! `(seed, domain, index)`. Each Monte Carlo trial gets its own stream, so a
//! sequence of trials produces the same numbers no matter how the trials are
//! batched or scheduled, and estimates from different domains (eigenvalue
//! sampling vs. post-selection vs. probe vectors) never share randomness.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Eigenvalue-sampling trials of the log-determinant estimator.
pub const DOMAIN_LOGDET: u64 = 1;
/// Post-selection trials of the data-fit estimator.
pub const DOMAIN_DATAFIT: u64 = 2;
/// Probe vectors of the classical trace estimators.
pub const DOMAIN_PROBE: u64 = 3;
/// Synthetic dataset input locations.
pub const DOMAIN_INPUTS: u64 = 4;
/// Synthetic dataset output draws.
pub const DOMAIN_OUTPUTS: u64 = 5;

const TRIAL_BITS: u32 = 48;
const TRIAL_MASK: u64 = (1 << TRIAL_BITS) - 1;

/// RNG for one trial: ChaCha8 keyed by `seed`, on the stream identified by
/// `(domain, trial)`. Trials must stay below 2^48.
pub fn trial_rng(seed: u64, domain: u64, trial: u64) -> ChaCha8Rng {
    debug_assert!(trial <= TRIAL_MASK);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((domain << TRIAL_BITS) | (trial & TRIAL_MASK));
    rng
}

/// Derives a child seed from a master seed and a label (SplitMix64 step).
/// Used to give every estimator invocation inside a larger procedure its own
/// independent seed.
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    let mut z = seed ^ label.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

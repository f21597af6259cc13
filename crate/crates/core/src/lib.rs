//! Entanglement distribution between two quantum network nodes, modeled as
//! discrete-time Markov decision processes.
//!
//! The crate provides:
//!
//! - [`quantum`]: Bell-diagonal state algebra, depolarizing memory noise,
//!   DEJMPS distillation, twirling, and BB84 / six-state secret-key-rate
//!   utilities.
//! - [`env`]: the WN2M2, BN2M2 and WN2M3 environments as stochastic state
//!   machines with action admissibility masks and multi-channel rewards.
//! - [`policy`]: softmax policies over Fourier-basis features with action
//!   masking and log-probability gradients.
//! - [`optim`]: a REINFORCE-style trainer that ascends arbitrary
//!   differentiable utilities of multiple expected returns via the chain
//!   rule, using Adam.
//! - [`baseline`]: threshold heuristic policies and grid search over
//!   consume/discard thresholds.
//! - [`harness`]: experiment configuration, Monte Carlo policy evaluation,
//!   link-length sweeps, CSV/JSON persistence and SVG plots.
//! - [`oracles`]: independent cross-checks (a 16x16 density-matrix
//!   distillation circuit, literal transition tables, finite differences,
//!   an exactly enumerable toy MDP) used by tests and the `oracle-check`
//!   CLI subcommand.

pub mod baseline;
pub mod env;
pub mod harness;
pub mod optim;
pub mod oracles;
pub mod policy;
pub mod quantum;

pub use env::{Action, EnvKind, Environment, LinkMdp, MdpState, RewardChannel, RewardVector};
pub use policy::{FourierBasis, FourierBasisSpec, PolicyParameters, SoftmaxPolicy};
pub use quantum::{BellDiagonalState, LinkParameters, WernerState};

/// Derives a per-stream seed from a base seed and two stream labels.
///
/// Every stochastic component (episode sampling, evaluation trials, grid
/// points) draws its generator from this function so that runs are
/// reproducible regardless of worker count, and distinct streams never
/// share a generator.
pub fn derive_seed(base: u64, stream: u64, index: u64) -> u64 {
    // SplitMix64 finalizer over the three words.
    let mut z = base
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream labels for [`derive_seed`].
pub mod streams {
    /// Training episode sampling; combined with the iteration index.
    pub const TRAIN: u64 = 0x51;
    /// Evaluation episodes; combined with the trial index.
    pub const EVAL: u64 = 0xE7;
    /// Grid-search evaluation (common random numbers across grid points).
    pub const GRID: u64 = 0x6D;
}

#[cfg(test)]
mod tests {
    use super::derive_seed;

    #[test]
    fn derived_seeds_differ_across_streams_and_indices() {
        let a = derive_seed(7, 1, 0);
        let b = derive_seed(7, 1, 1);
        let c = derive_seed(7, 2, 0);
        let d = derive_seed(8, 1, 0);
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
        // Deterministic.
        assert_eq!(a, derive_seed(7, 1, 0));
    }
}

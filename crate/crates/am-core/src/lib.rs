//! Learning continuous-time dynamics from independent samples of temporal
//! marginals.
//!
//! The central object is a scalar potential `s(t, x)` (an "action") whose
//! spatial gradient is a velocity field. Given only samples from a family of
//! marginals `q_t`, the matching objectives in [`objectives`] train the
//! potential so that transporting particles along `∇s` (deterministically,
//! stochastically, or with importance weights) reproduces the marginals.
//!
//! Module map:
//!
//! - [`field`] — potentials with exact nested derivatives (value, spatial
//!   gradient, time derivative, Laplacian) and exact parameter gradients.
//! - [`paths`] — synthetic and file-backed marginal families `q_t`, with
//!   analytic density/score/velocity where available.
//! - [`objectives`] — Monte-Carlo estimators of the matching losses and the
//!   adaptive time-proposal machinery.
//! - [`dynamics`] — ODE/SDE/weighted integrators, likelihood evaluation via
//!   the divergence accumulator, and the annealed Langevin baseline.
//! - [`metrics`] — MMD, exact small-n Wasserstein-2, and relative field error.
//! - [`train`] — Adam loop with checkpointing and convergence diagnostics.

pub mod dynamics;
pub mod field;
pub mod metrics;
pub mod objectives;
pub mod paths;
pub mod train;

/// Splits a master seed into independent per-index streams.
///
/// Used wherever a contract promises reproducibility given `(seed, n)`
/// independently of thread count: each particle/iteration derives its own
/// stream as `split_seed(seed, index)`.
pub fn split_seed(seed: u64, index: u64) -> u64 {
    // SplitMix64 finalizer over the combined word.
    let mut z = seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

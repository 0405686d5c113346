//! Time-indexed marginal distributions `q_t` on `t ∈ [0, 1]`.
//!
//! A path is accessed through samples; synthetic paths additionally expose
//! analytic hooks (density, score, velocity, true action gradient) wherever
//! a closed form exists, so estimators and integrators can be checked
//! against ground truth without training.
//!
//! Velocity here always means the gradient-field velocity of the continuity
//! equation `∂q/∂t = −∇·(q v)`. When a path is to be represented by a
//! diffusion with known scale σ instead, the matching drift is
//! `v + (σ²/2)∇log q` (the Fokker–Planck form differs from the continuity
//! form by exactly the score term).

mod gaussian;
mod interpolant;
mod qho;
mod snapshot;
mod weight_shift;

pub mod diagnostics;

pub use gaussian::{delta_mixture_path, gaussian_path, DeltaMixturePath, GaussianPath};
pub use interpolant::{interpolant_path, InterpolantPath, Sampler};
pub use qho::{qho_superposition_path, QhoSuperpositionPath};
pub use snapshot::{load_snapshots, snapshot_path, Smoothing, SnapshotDataset, SnapshotPath};
pub use weight_shift::{weight_shift_path, WeightShiftPath};

use rand::RngCore;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PathError {
    #[error("scale σ(t) must be positive on [0,1]; σ({t}) = {sigma}")]
    NonPositiveScale { t: f64, sigma: f64 },
    #[error("point set must be nonempty")]
    EmptyPoints,
    #[error("mixture weight endpoints must lie strictly inside (0,1), got α0={alpha0}, α1={alpha1}")]
    InvalidAlpha { alpha0: f64, alpha1: f64 },
    #[error("dimension mismatch: path has {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("mask must be a {{0,1}} vector of the path dimension")]
    InvalidMask,
    #[error("time {t} outside the covered range [{lo}, {hi}]")]
    TimeOutOfRange { t: f64, lo: f64, hi: f64 },
    #[error("snapshot file: missing header")]
    MissingHeader,
    #[error("snapshot file: header must be `t,x0,...,x{{d-1}}`, got `{0}`")]
    BadHeader(String),
    #[error("snapshot file: row {row} has {got} cells, expected {expected}")]
    RaggedRow { row: usize, expected: usize, got: usize },
    #[error("snapshot file: non-numeric cell `{cell}` at row {row}")]
    NonNumericCell { row: usize, cell: String },
    #[error("snapshot file: non-finite value at row {row}")]
    NonFiniteValue { row: usize },
    #[error("snapshot dataset needs at least 2 timestamps")]
    AtLeastTwoTimestamps,
    #[error("io: {0}")]
    Io(String),
}

/// A family of marginals `q_t`, `t ∈ [0, 1]`.
pub trait MarginalPath: Sync {
    fn dim(&self) -> usize;

    /// Draws one point from `q_t` into `out` (length `dim`).
    fn sample_into(&self, t: f64, rng: &mut dyn RngCore, out: &mut [f64])
        -> Result<(), PathError>;

    /// Draws `n` points, flattened row-major `n × dim`.
    fn sample(&self, t: f64, n: usize, rng: &mut dyn RngCore) -> Result<Vec<f64>, PathError> {
        let d = self.dim();
        let mut out = vec![0.0; n * d];
        for row in out.chunks_mut(d) {
            self.sample_into(t, rng, row)?;
        }
        Ok(out)
    }

    /// Analytic density, when available.
    fn density(&self, _t: f64, _x: &[f64]) -> Option<f64> {
        None
    }

    /// Analytic score `∇ log q_t`, when available.
    fn score(&self, _t: f64, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Analytic continuity-equation velocity, when available.
    fn velocity(&self, _t: f64, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Gradient of the true action (equals `velocity` exactly when the
    /// velocity is a gradient field; absent otherwise).
    fn true_action_grad(&self, _t: f64, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Drift of the diffusion representation with diffusion σ² given:
    /// `velocity + (σ²/2) ∇log q`. Available when both hooks are.
    fn entropic_drift(&self, t: f64, x: &[f64], sigma_sq: f64) -> Option<Vec<f64>> {
        let v = self.velocity(t, x)?;
        let s = self.score(t, x)?;
        Some(v.iter().zip(&s).map(|(vi, si)| vi + 0.5 * sigma_sq * si).collect())
    }
}

pub(crate) fn check_unit_time(t: f64) -> Result<(), PathError> {
    if !(0.0..=1.0).contains(&t) {
        return Err(PathError::TimeOutOfRange { t, lo: 0.0, hi: 1.0 });
    }
    Ok(())
}

pub(crate) fn standard_normal(rng: &mut dyn RngCore) -> f64 {
    use rand::Rng;
    rng.sample(rand_distr::StandardNormal)
}

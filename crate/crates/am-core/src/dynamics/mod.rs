//! Time integrators that turn a potential into trajectories, weighted
//! trajectories, stochastic trajectories, and log-likelihoods — plus the
//! annealed Langevin baseline.
//!
//! Sampling follows `dx/dt = ∇s(t, x)` (deterministically, or with an
//! added `σ_t dW` term for the entropic variant). Unbalanced transport
//! additionally evolves per-particle log-weights by `d log w/dt = s`.
//! Likelihoods integrate the state backward with the divergence
//! accumulator `d log q/dt = −Δs` along the trajectory, using the exact
//! Laplacian.
//!
//! Integration is fixed-step (Euler / RK4 / Euler–Maruyama): determinism
//! keeps convergence-order tests meaningful, and particles evolve
//! independently, so runs parallelize with a documented RNG-stream split —
//! particle `i` always draws from `split_seed(seed, i)` — making results
//! bitwise reproducible given `(seed, n)` for any thread count.

use rand::RngCore;
use rand_chacha::ChaCha12Rng;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{DifferentiableField, FieldError, JetRequest};
use crate::paths::MarginalPath;
use crate::split_seed;

/// Langevin inner-step count used when a caller does not override it.
pub const DEFAULT_ALD_INNER_STEPS: usize = 5;

const CHUNK: usize = 64;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("non-finite state at step {step}")]
    NonFiniteState { step: usize },
    #[error("configured direction {direction:?} contradicts t0={t0}, t1={t1}")]
    DirectionMismatch { direction: Direction, t0: f64, t1: f64 },
    #[error("stochastic integration is forward-only (time reversal is not defined here)")]
    BackwardSde,
    #[error("ensemble carries no log-weights")]
    MissingWeights,
    #[error("method {0:?} not valid for this integrator")]
    MethodMismatch(Method),
    #[error("dimension mismatch: field has {field}, ensemble has {ensemble}")]
    DimMismatch { field: usize, ensemble: usize },
    #[error("score source unavailable at t={0}")]
    NoScore(f64),
    #[error("steps must be >= 1")]
    ZeroSteps,
    #[error("field: {0}")]
    Field(#[from] FieldError),
    #[error("path: {0}")]
    Path(#[from] crate::paths::PathError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Euler,
    Rk4,
    EulerMaruyama,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub method: Method,
    pub steps: usize,
    pub direction: Direction,
}

impl IntegratorConfig {
    pub fn ode(method: Method, steps: usize) -> Self {
        IntegratorConfig { method, steps, direction: Direction::Forward }
    }

    /// Default deterministic integrator: RK4, 100 steps.
    pub fn default_ode() -> Self {
        Self::ode(Method::Rk4, 100)
    }

    /// Default stochastic integrator: Euler–Maruyama, 500 steps.
    pub fn default_sde() -> Self {
        IntegratorConfig { method: Method::EulerMaruyama, steps: 500, direction: Direction::Forward }
    }

    fn validate_span(&self, t0: f64, t1: f64) -> Result<(), DynamicsError> {
        if self.steps == 0 {
            return Err(DynamicsError::ZeroSteps);
        }
        let ok = match self.direction {
            Direction::Forward => t1 >= t0,
            Direction::Backward => t1 <= t0,
        };
        if !ok {
            return Err(DynamicsError::DirectionMismatch { direction: self.direction, t0, t1 });
        }
        Ok(())
    }
}

/// A time-stamped set of particle positions, with optional per-particle
/// log-weights (unbalanced mode).
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    pub time: f64,
    pub dim: usize,
    /// Row-major `n × dim`.
    pub positions: Vec<f64>,
    pub log_weights: Option<Vec<f64>>,
}

impl ParticleEnsemble {
    pub fn new(time: f64, dim: usize, positions: Vec<f64>) -> Self {
        assert!(positions.len() % dim == 0);
        ParticleEnsemble { time, dim, positions, log_weights: None }
    }

    pub fn with_unit_weights(mut self) -> Self {
        self.log_weights = Some(vec![0.0; self.len()]);
        self
    }

    pub fn len(&self) -> usize {
        self.positions.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Draws an ensemble from a path marginal.
    pub fn from_path(
        path: &dyn MarginalPath,
        t: f64,
        n: usize,
        rng: &mut dyn RngCore,
    ) -> Result<Self, DynamicsError> {
        Ok(ParticleEnsemble::new(t, path.dim(), path.sample(t, n, rng)?))
    }

    /// Total weight `Σ exp(log w_i)`.
    pub fn total_weight(&self) -> Option<f64> {
        self.log_weights.as_ref().map(|lw| lw.iter().map(|w| w.exp()).sum())
    }
}

fn check_dims<F: DifferentiableField>(
    field: &F,
    ensemble: &ParticleEnsemble,
) -> Result<(), DynamicsError> {
    if field.dim() != ensemble.dim {
        return Err(DynamicsError::DimMismatch { field: field.dim(), ensemble: ensemble.dim });
    }
    Ok(())
}

/// Advances positions under `dx/dt = ∇s`. Backward spans (`t1 < t0`) are
/// supported with `Direction::Backward`; log-weights, if any, ride along
/// unchanged.
pub fn integrate_ode<F: DifferentiableField>(
    field: &F,
    ensemble: &ParticleEnsemble,
    t0: f64,
    t1: f64,
    config: &IntegratorConfig,
) -> Result<ParticleEnsemble, DynamicsError> {
    check_dims(field, ensemble)?;
    if config.method == Method::EulerMaruyama {
        return Err(DynamicsError::MethodMismatch(config.method));
    }
    config.validate_span(t0, t1)?;
    let d = ensemble.dim;
    let dt = (t1 - t0) / config.steps as f64;
    let mut positions = ensemble.positions.clone();
    let results: Vec<Result<(), DynamicsError>> = positions
        .par_chunks_mut(CHUNK * d)
        .map(|chunk| {
            let mut ws = field.workspace();
            let req = JetRequest::first_order();
            let mut k1 = vec![0.0; d];
            let mut k2 = vec![0.0; d];
            let mut k3 = vec![0.0; d];
            let mut k4 = vec![0.0; d];
            let mut mid = vec![0.0; d];
            for x in chunk.chunks_mut(d) {
                for step in 0..config.steps {
                    let t = t0 + dt * step as f64;
                    match config.method {
                        Method::Euler => {
                            let eval = field.eval_with(&mut ws, t, x, &req)?;
                            for i in 0..d {
                                x[i] += dt * eval.grad[i];
                            }
                        }
                        Method::Rk4 => {
                            let eval = field.eval_with(&mut ws, t, x, &req)?;
                            k1.copy_from_slice(eval.spatial_grad());
                            for i in 0..d {
                                mid[i] = x[i] + 0.5 * dt * k1[i];
                            }
                            let eval = field.eval_with(&mut ws, t + 0.5 * dt, &mid, &req)?;
                            k2.copy_from_slice(eval.spatial_grad());
                            for i in 0..d {
                                mid[i] = x[i] + 0.5 * dt * k2[i];
                            }
                            let eval = field.eval_with(&mut ws, t + 0.5 * dt, &mid, &req)?;
                            k3.copy_from_slice(eval.spatial_grad());
                            for i in 0..d {
                                mid[i] = x[i] + dt * k3[i];
                            }
                            let eval = field.eval_with(&mut ws, t + dt, &mid, &req)?;
                            k4.copy_from_slice(eval.spatial_grad());
                            for i in 0..d {
                                x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                            }
                        }
                        Method::EulerMaruyama => unreachable!(),
                    }
                    if x.iter().any(|v| !v.is_finite()) {
                        return Err(DynamicsError::NonFiniteState { step });
                    }
                }
            }
            Ok(())
        })
        .collect();
    for r in results {
        r?;
    }
    Ok(ParticleEnsemble {
        time: t1,
        dim: d,
        positions,
        log_weights: ensemble.log_weights.clone(),
    })
}

/// Euler–Maruyama for `dx = ∇s dt + σ_t dW`; forward only. Particle `i`
/// draws from the stream `split_seed(seed, i)`.
pub fn integrate_sde<F: DifferentiableField>(
    field: &F,
    ensemble: &ParticleEnsemble,
    t0: f64,
    t1: f64,
    sigma: &crate::objectives::SigmaSchedule,
    config: &IntegratorConfig,
    seed: u64,
) -> Result<ParticleEnsemble, DynamicsError> {
    check_dims(field, ensemble)?;
    if config.method != Method::EulerMaruyama {
        return Err(DynamicsError::MethodMismatch(config.method));
    }
    if config.direction == Direction::Backward || t1 < t0 {
        return Err(DynamicsError::BackwardSde);
    }
    if config.steps == 0 {
        return Err(DynamicsError::ZeroSteps);
    }
    let d = ensemble.dim;
    let dt = (t1 - t0) / config.steps as f64;
    let sqrt_dt = dt.sqrt();
    let mut positions = ensemble.positions.clone();
    let results: Vec<Result<(), DynamicsError>> = positions
        .par_chunks_mut(CHUNK * d)
        .enumerate()
        .map(|(chunk_idx, chunk)| {
            let mut ws = field.workspace();
            let req = JetRequest::first_order();
            for (j, x) in chunk.chunks_mut(d).enumerate() {
                let particle = chunk_idx * CHUNK + j;
                let mut rng = ChaCha12Rng::seed_from_u64(split_seed(seed, particle as u64));
                for step in 0..config.steps {
                    let t = t0 + dt * step as f64;
                    let sg = sigma.at(t);
                    let eval = field.eval_with(&mut ws, t, x, &req)?;
                    for i in 0..d {
                        let noise: f64 = rand::Rng::sample(&mut rng, rand_distr::StandardNormal);
                        x[i] += dt * eval.grad[i] + sg * sqrt_dt * noise;
                    }
                    if x.iter().any(|v| !v.is_finite()) {
                        return Err(DynamicsError::NonFiniteState { step });
                    }
                }
            }
            Ok(())
        })
        .collect();
    for r in results {
        r?;
    }
    Ok(ParticleEnsemble {
        time: t1,
        dim: d,
        positions,
        log_weights: ensemble.log_weights.clone(),
    })
}

/// Weighted transport: positions via `dx/dt = ∇s` and log-weights via
/// `d log w/dt = s`, integrated jointly with the same method and steps.
pub fn integrate_weighted<F: DifferentiableField>(
    field: &F,
    ensemble: &ParticleEnsemble,
    t0: f64,
    t1: f64,
    config: &IntegratorConfig,
) -> Result<ParticleEnsemble, DynamicsError> {
    check_dims(field, ensemble)?;
    if config.method == Method::EulerMaruyama {
        return Err(DynamicsError::MethodMismatch(config.method));
    }
    config.validate_span(t0, t1)?;
    let log_weights = ensemble.log_weights.as_ref().ok_or(DynamicsError::MissingWeights)?;
    let d = ensemble.dim;
    let dt = (t1 - t0) / config.steps as f64;
    let mut positions = ensemble.positions.clone();
    let mut weights = log_weights.clone();
    // Augmented state (x, log w); the growth stage reuses the jet's value.
    let pairs: Vec<(&mut [f64], &mut f64)> = positions
        .chunks_mut(d)
        .zip(weights.iter_mut())
        .collect();
    let results: Vec<Result<(), DynamicsError>> = pairs
        .into_par_iter()
        .chunks(CHUNK)
        .map(|mut chunk| {
            let mut ws = field.workspace();
            let req = JetRequest::first_order();
            let mut k = vec![vec![0.0; d + 1]; 4];
            let mut mid = vec![0.0; d];
            for (x, logw) in chunk.iter_mut() {
                for step in 0..config.steps {
                    let t = t0 + dt * step as f64;
                    match config.method {
                        Method::Euler => {
                            let eval = field.eval_with(&mut ws, t, x, &req)?;
                            for i in 0..d {
                                x[i] += dt * eval.grad[i];
                            }
                            **logw += dt * eval.value;
                        }
                        Method::Rk4 => {
                            let stage_ts = [t, t + 0.5 * dt, t + 0.5 * dt, t + dt];
                            let stage_scale = [0.0, 0.5, 0.5, 1.0];
                            for s_idx in 0..4 {
                                if s_idx == 0 {
                                    mid.copy_from_slice(x);
                                } else {
                                    for i in 0..d {
                                        mid[i] = x[i] + stage_scale[s_idx] * dt * k[s_idx - 1][i];
                                    }
                                }
                                let eval = field.eval_with(&mut ws, stage_ts[s_idx], &mid, &req)?;
                                k[s_idx][..d].copy_from_slice(eval.spatial_grad());
                                k[s_idx][d] = eval.value;
                            }
                            for i in 0..d {
                                x[i] += dt / 6.0
                                    * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
                            }
                            **logw +=
                                dt / 6.0 * (k[0][d] + 2.0 * k[1][d] + 2.0 * k[2][d] + k[3][d]);
                        }
                        Method::EulerMaruyama => unreachable!(),
                    }
                    if x.iter().any(|v| !v.is_finite()) || !logw.is_finite() {
                        return Err(DynamicsError::NonFiniteState { step });
                    }
                }
            }
            Ok(())
        })
        .collect();
    for r in results {
        r?;
    }
    Ok(ParticleEnsemble { time: t1, dim: d, positions, log_weights: Some(weights) })
}

/// Log-likelihood at `t = 1` by integrating the state backward with the
/// divergence accumulator:
/// `log q₁(x) = log q₀(x(0)) − ∫₀¹ Δs(t, x(t)) dt` along `dx/dt = ∇s`.
pub fn log_likelihood<F: DifferentiableField>(
    field: &F,
    x: &[f64],
    base_log_density: impl Fn(&[f64]) -> f64,
    config: &IntegratorConfig,
) -> Result<f64, DynamicsError> {
    if field.dim() != x.len() {
        return Err(DynamicsError::DimMismatch { field: field.dim(), ensemble: x.len() });
    }
    if config.method == Method::EulerMaruyama {
        return Err(DynamicsError::MethodMismatch(config.method));
    }
    if config.steps == 0 {
        return Err(DynamicsError::ZeroSteps);
    }
    let d = x.len();
    let dt = -1.0 / config.steps as f64; // backward
    let mut state = x.to_vec();
    let mut acc = 0.0; // running −∫ Δs dt along the backward sweep
    let mut ws = field.workspace();
    let req = JetRequest::with_laplacian();
    let mut k = vec![vec![0.0; d + 1]; 4];
    let mut mid = vec![0.0; d];
    for step in 0..config.steps {
        let t = 1.0 + dt * step as f64;
        match config.method {
            Method::Euler => {
                let eval = field.eval_with(&mut ws, t, &state, &req)?;
                for i in 0..d {
                    state[i] += dt * eval.grad[i];
                }
                acc += dt * eval.laplacian.expect("laplacian requested");
            }
            Method::Rk4 => {
                let stage_ts = [t, t + 0.5 * dt, t + 0.5 * dt, t + dt];
                let stage_scale = [0.0, 0.5, 0.5, 1.0];
                for s_idx in 0..4 {
                    if s_idx == 0 {
                        mid.copy_from_slice(&state);
                    } else {
                        for i in 0..d {
                            mid[i] = state[i] + stage_scale[s_idx] * dt * k[s_idx - 1][i];
                        }
                    }
                    let eval = field.eval_with(&mut ws, stage_ts[s_idx], &mid, &req)?;
                    k[s_idx][..d].copy_from_slice(eval.spatial_grad());
                    k[s_idx][d] = eval.laplacian.expect("laplacian requested");
                }
                for i in 0..d {
                    state[i] += dt / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
                }
                acc += dt / 6.0 * (k[0][d] + 2.0 * k[1][d] + 2.0 * k[2][d] + k[3][d]);
            }
            Method::EulerMaruyama => unreachable!(),
        }
        if state.iter().any(|v| !v.is_finite()) || !acc.is_finite() {
            return Err(DynamicsError::NonFiniteState { step });
        }
    }
    // acc = ∫_{1}^{0} Δs dt = −∫₀¹ Δs dt.
    Ok(base_log_density(&state) + acc)
}

/// A score source `∇ log q_t(x)` for the Langevin baseline.
pub trait ScoreField: Sync {
    fn dim(&self) -> usize;
    fn score_into(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<(), DynamicsError>;
}

/// Analytic scores of a path.
pub struct PathScore<'a>(pub &'a dyn MarginalPath);

impl ScoreField for PathScore<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn score_into(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<(), DynamicsError> {
        match self.0.score(t, x) {
            Some(s) => {
                out.copy_from_slice(&s);
                Ok(())
            }
            None => Err(DynamicsError::NoScore(t)),
        }
    }
}

/// Score model given by the spatial gradient of a trained field at fixed t.
pub struct FieldScore<'a, F: DifferentiableField>(pub &'a F);

impl<F: DifferentiableField> ScoreField for FieldScore<'_, F> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn score_into(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<(), DynamicsError> {
        self.0.spatial_grad_into(t, x, out)?;
        Ok(())
    }
}

/// Annealed Langevin dynamics: for each time in `path_times`, runs
/// `m_steps` Langevin updates `x ← x + (step/2)·score + √step·ξ` against
/// that time's score, then records the ensemble. `m_steps = 0` records the
/// untouched initial ensemble at every time.
pub fn ald_sample(
    score: &dyn ScoreField,
    path_times: &[f64],
    m_steps: usize,
    step: f64,
    initial: &ParticleEnsemble,
    seed: u64,
) -> Result<Vec<ParticleEnsemble>, DynamicsError> {
    assert!(step > 0.0, "step size must be positive");
    if score.dim() != initial.dim {
        return Err(DynamicsError::DimMismatch { field: score.dim(), ensemble: initial.dim });
    }
    let d = initial.dim;
    let sqrt_step = step.sqrt();
    let mut positions = initial.positions.clone();
    let mut frames = Vec::with_capacity(path_times.len());
    for (time_idx, &t) in path_times.iter().enumerate() {
        let results: Vec<Result<(), DynamicsError>> = positions
            .par_chunks_mut(CHUNK * d)
            .enumerate()
            .map(|(chunk_idx, chunk)| {
                let mut grad = vec![0.0; d];
                for (j, x) in chunk.chunks_mut(d).enumerate() {
                    let particle = chunk_idx * CHUNK + j;
                    // Stream per (particle, annealing stage).
                    let stream = split_seed(seed, (particle as u64) << 20 | time_idx as u64);
                    let mut rng = ChaCha12Rng::seed_from_u64(stream);
                    for step_idx in 0..m_steps {
                        score.score_into(t, x, &mut grad)?;
                        for i in 0..d {
                            let noise: f64 =
                                rand::Rng::sample(&mut rng, rand_distr::StandardNormal);
                            x[i] += 0.5 * step * grad[i] + sqrt_step * noise;
                        }
                        if x.iter().any(|v| !v.is_finite()) {
                            return Err(DynamicsError::NonFiniteState { step: step_idx });
                        }
                    }
                }
                Ok(())
            })
            .collect();
        for r in results {
            r?;
        }
        frames.push(ParticleEnsemble::new(t, d, positions.clone()));
    }
    Ok(frames)
}

/// Writes frames as the trajectory CSV contract:
/// header `t,particle,x0,...,x{d-1}[,log_w]`, one row per particle per
/// saved time. The `log_w` column is present iff the frames carry weights.
pub fn write_trajectory_csv(
    mut writer: impl std::io::Write,
    frames: &[ParticleEnsemble],
) -> std::io::Result<()> {
    if frames.is_empty() {
        return Ok(());
    }
    let d = frames[0].dim;
    let weighted = frames[0].log_weights.is_some();
    let mut header = String::from("t,particle");
    for i in 0..d {
        header.push_str(&format!(",x{i}"));
    }
    if weighted {
        header.push_str(",log_w");
    }
    writeln!(writer, "{header}")?;
    for frame in frames {
        for (p, x) in frame.positions.chunks(d).enumerate() {
            let mut row = format!("{},{}", frame.time, p);
            for v in x {
                row.push_str(&format!(",{v}"));
            }
            if weighted {
                let lw = frame.log_weights.as_ref().expect("weighted frames")[p];
                row.push_str(&format!(",{lw}"));
            }
            writeln!(writer, "{row}")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests;

//! Training loop: batched objective estimation, bias-corrected Adam
//! updates, eval-cadence diagnostics, and resumable state.
//!
//! The loop is deterministic given `(config, seed)`: iteration `k` draws
//! its batch from `split_seed(seed, k)`, so resuming from a saved state
//! reproduces the uninterrupted run bitwise. On a non-finite loss the loop
//! aborts and hands back the last good parameters rather than skipping the
//! batch (silent skips mask objective bugs).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{DifferentiableField, MlpField};
use crate::metrics;
use crate::objectives::{
    estimate, BatchSpec, LossTerms, Objective, ObjectiveError, ObjectiveSpec, TimeProposal,
};
use crate::paths::MarginalPath;
use crate::split_seed;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite loss at iteration {iteration}; last good parameters retained")]
    NonFiniteLoss { iteration: usize, last_good: Box<MlpField> },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("gradient/parameter shape mismatch: {params} vs {grad}")]
    ShapeMismatch { params: usize, grad: usize },
    #[error("objective: {0}")]
    Objective(#[from] ObjectiveError),
    #[error("metric: {0}")]
    Metric(#[from] metrics::MetricError),
}

/// First/second-moment accumulators for Adam.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        AdamState { m: vec![0.0; n_params], v: vec![0.0; n_params], step: 0 }
    }
}

/// Standard bias-corrected Adam update:
/// `θ ← θ − lr · m̂ / (√v̂ + ε)`.
pub fn adam_step(
    params: &mut [f64],
    grad: &[f64],
    state: &mut AdamState,
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
) -> Result<(), TrainError> {
    if params.len() != grad.len() || state.m.len() != params.len() {
        return Err(TrainError::ShapeMismatch { params: params.len(), grad: grad.len() });
    }
    state.step += 1;
    let bc1 = 1.0 - beta1.powi(state.step.min(i32::MAX as u64) as i32);
    let bc2 = 1.0 - beta2.powi(state.step.min(i32::MAX as u64) as i32);
    for i in 0..params.len() {
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grad[i];
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grad[i] * grad[i];
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub iterations: usize,
    pub n_boundary: usize,
    pub n_interior: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub eval_every: usize,
    pub seed: u64,
    /// Adapt the interior time proposal from running integrand variance.
    pub adaptive_proposal: bool,
    pub proposal_bins: usize,
    pub proposal_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 1000,
            n_boundary: 256,
            n_interior: 256,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            eval_every: 500,
            seed: 0,
            adaptive_proposal: false,
            proposal_bins: crate::objectives::DEFAULT_BINS,
            proposal_decay: crate::objectives::DEFAULT_DECAY,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), TrainError> {
        if self.iterations == 0 {
            return Err(TrainError::Config("iterations must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(TrainError::Config("learning rate must be positive".into()));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(TrainError::Config(format!("{name} must lie in [0,1)")));
            }
        }
        if self.n_boundary == 0 || self.n_interior == 0 {
            return Err(TrainError::Config("batch sizes must be >= 1".into()));
        }
        Ok(())
    }
}

/// One diagnostics record at eval cadence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalRecord {
    pub iteration: usize,
    pub loss: f64,
    pub terms: LossTerms,
    /// Relative field error against analytic truth, when the path has one.
    pub field_error: Option<f64>,
    /// Not part of the deterministic record stream; callers that persist
    /// reports keep wall times in a separate sidecar.
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainReport {
    pub records: Vec<EvalRecord>,
}

/// Resumable snapshot: continuing from this state reproduces the
/// uninterrupted run bitwise.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainState {
    pub next_iteration: usize,
    pub params: Vec<f64>,
    pub adam: AdamState,
    pub proposal: Option<TimeProposal>,
}

pub struct TrainOutcome {
    pub field: MlpField,
    pub report: TrainReport,
    /// State after the final iteration; feed back in to continue.
    pub state: TrainState,
}

/// Trains the field; `on_eval` fires at eval cadence (checkpointing hook).
pub fn train(
    field: MlpField,
    path: &dyn MarginalPath,
    objective: &ObjectiveSpec,
    config: &TrainConfig,
    on_eval: impl FnMut(&EvalRecord, &MlpField),
) -> Result<(MlpField, TrainReport), TrainError> {
    train_with_state(field, path, objective, config, None, on_eval)
        .map(|out| (out.field, out.report))
}

/// As [`train`], optionally resuming from a saved [`TrainState`], and
/// returning the resumable state after the final iteration.
pub fn train_with_state(
    mut field: MlpField,
    path: &dyn MarginalPath,
    objective: &ObjectiveSpec,
    config: &TrainConfig,
    resume: Option<TrainState>,
    mut on_eval: impl FnMut(&EvalRecord, &MlpField),
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    let objective: Objective = objective.instantiate()?;
    let start_iter;
    let mut adam;
    let mut proposal;
    match resume {
        Some(state) => {
            field
                .set_params(&state.params)
                .map_err(|e| TrainError::Config(format!("resume state: {e}")))?;
            start_iter = state.next_iteration;
            adam = state.adam;
            proposal = state.proposal;
        }
        None => {
            start_iter = 0;
            adam = AdamState::new(field.param_len());
            proposal = config
                .adaptive_proposal
                .then(|| TimeProposal::uniform(config.proposal_bins, config.proposal_decay));
        }
    }

    let has_truth = {
        let probe = vec![0.0; path.dim()];
        path.true_action_grad(0.5, &probe).is_some() || path.velocity(0.5, &probe).is_some()
    };
    let mut report = TrainReport::default();
    let started = std::time::Instant::now();
    let mut last_good = field.params().to_vec();

    for iter in start_iter..config.iterations {
        let spec = BatchSpec::new(
            config.n_boundary,
            config.n_interior,
            split_seed(config.seed, iter as u64),
        );
        let result = estimate(&field, path, &spec, &objective, proposal.as_ref());
        let (est, updated) = match result {
            Ok(ok) => ok,
            Err(ObjectiveError::NonFiniteJet { .. }) => {
                let mut restored = field.clone();
                restored.set_params(&last_good).expect("same shape");
                return Err(TrainError::NonFiniteLoss {
                    iteration: iter,
                    last_good: Box::new(restored),
                });
            }
            Err(e) => return Err(e.into()),
        };
        if !est.value.is_finite() || est.grad.iter().any(|g| !g.is_finite()) {
            let mut restored = field.clone();
            restored.set_params(&last_good).expect("same shape");
            return Err(TrainError::NonFiniteLoss {
                iteration: iter,
                last_good: Box::new(restored),
            });
        }
        last_good.copy_from_slice(field.params());
        if let Some(p) = updated {
            proposal = Some(p);
        }

        if iter % config.eval_every == 0 || iter + 1 == config.iterations {
            let field_error = if has_truth {
                Some(metrics::field_error(
                    &field,
                    path,
                    9,
                    256,
                    split_seed(config.seed ^ 0x4556_414c, iter as u64),
                )?)
            } else {
                None
            };
            let record = EvalRecord {
                iteration: iter,
                loss: est.value,
                terms: est.terms,
                field_error,
                wall_time_s: started.elapsed().as_secs_f64(),
            };
            on_eval(&record, &field);
            report.records.push(record);
        }

        adam_step(
            field.params_mut(),
            &est.grad,
            &mut adam,
            config.learning_rate,
            config.beta1,
            config.beta2,
            config.epsilon,
        )?;
    }

    let state = TrainState {
        next_iteration: config.iterations,
        params: field.params().to_vec(),
        adam,
        proposal,
    };
    Ok(TrainOutcome { field, report, state })
}

#[cfg(test)]
mod tests;

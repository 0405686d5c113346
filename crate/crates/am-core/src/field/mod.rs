//! Scalar potentials `s(t, x)` with exact nested derivatives.
//!
//! Every field exposes a *jet* at a point: the value `s`, the spatial
//! gradient `∇s`, the time derivative `∂s/∂t`, and the Laplacian `Δs`. All
//! four are exact (no stochastic estimation), and for the trainable MLP
//! field every functional of jet entries over a batch is differentiable
//! with respect to the parameters — including second-order quantities like
//! `½‖∇s‖²` and third-order ones like the parameter gradient of `Δs`.
//!
//! Closed-form fields (constant, linear, quadratic, Gaussian-path actions)
//! implement the same interface so every downstream consumer can be tested
//! without training.

mod analytic;
mod checkpoint;
mod mlp;

pub use analytic::{ConstantField, GaussianTrueAction, LinearField, QuadraticRadialField, Shifted};
pub use checkpoint::{load_checkpoint, save_checkpoint, FieldCheckpoint};
pub use mlp::{MlpField, MlpWorkspace};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FieldError {
    /// The Laplacian of a piecewise-linear network vanishes almost
    /// everywhere, which silently zeroes the diffusion term of the entropic
    /// objective and the divergence in likelihood evaluation.
    #[error("activation `{0}` is not twice continuously differentiable; the Laplacian would vanish almost everywhere (choose `tanh` or `softplus`)")]
    NonSmoothActivation(String),
    #[error("unknown activation `{0}` (choose `tanh` or `softplus`)")]
    UnknownActivation(String),
    #[error("hidden widths must be nonempty")]
    EmptyWidths,
    #[error("hidden width must be positive")]
    ZeroWidth,
    #[error("input dimension must be >= 1")]
    ZeroInputDim,
    #[error("dimension mismatch: field expects {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("non-finite input at (t, x)")]
    NonFiniteInput,
    #[error("non-finite result in `{term}`")]
    NonFinite { term: String },
    #[error("parameter count mismatch: expected {expected}, got {got}")]
    ParamCount { expected: usize, got: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

/// Smooth activation whitelist. Both members are `C^∞`, which the entropic
/// objective (Laplacian term) and likelihood evaluation (divergence) require.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Softplus,
}

impl Activation {
    /// Parses an activation name, rejecting non-smooth ones explicitly.
    pub fn from_name(name: &str) -> Result<Self, FieldError> {
        match name {
            "tanh" => Ok(Activation::Tanh),
            "softplus" => Ok(Activation::Softplus),
            "relu" | "leaky_relu" | "abs" | "hardtanh" => {
                Err(FieldError::NonSmoothActivation(name.to_string()))
            }
            other => Err(FieldError::UnknownActivation(other.to_string())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Softplus => "softplus",
        }
    }
}

/// Value and exact derivatives of a field at one point `(t, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldJet {
    pub value: f64,
    pub spatial_grad: Vec<f64>,
    pub time_deriv: f64,
    pub laplacian: f64,
}

impl FieldJet {
    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.time_deriv.is_finite()
            && self.laplacian.is_finite()
            && self.spatial_grad.iter().all(|g| g.is_finite())
    }
}

/// What to evaluate at a point beyond value and first derivatives.
///
/// `second_dirs` are spatial directions `v` for which the second directional
/// derivative `vᵀ(∇²s)v` is requested (the sliced score-matching objective
/// needs these for its projections).
#[derive(Debug, Clone, Default)]
pub struct JetRequest {
    pub laplacian: bool,
    pub second_dirs: Vec<Vec<f64>>,
}

impl JetRequest {
    pub fn first_order() -> Self {
        JetRequest { laplacian: false, second_dirs: Vec::new() }
    }

    pub fn with_laplacian() -> Self {
        JetRequest { laplacian: true, second_dirs: Vec::new() }
    }
}

/// Evaluation record produced under a [`JetRequest`].
#[derive(Debug, Clone)]
pub struct PointEval {
    pub value: f64,
    /// Gradient with respect to `(x, t)`: spatial entries first, time last.
    pub grad: Vec<f64>,
    /// Present iff requested.
    pub laplacian: Option<f64>,
    /// `vᵀ(∇²s)v` for each requested direction, in request order.
    pub dir_second: Vec<f64>,
}

impl PointEval {
    pub fn spatial_grad(&self) -> &[f64] {
        &self.grad[..self.grad.len() - 1]
    }

    pub fn time_deriv(&self) -> f64 {
        self.grad[self.grad.len() - 1]
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.grad.iter().all(|g| g.is_finite())
            && self.laplacian.map_or(true, f64::is_finite)
            && self.dir_second.iter().all(|q| q.is_finite())
    }
}

/// Cotangents of a scalar functional with respect to one point's outputs.
///
/// For a functional `F` of jets over a batch, the parameter gradient is
/// assembled from per-point `∂F/∂value`, `∂F/∂∇s`, `∂F/∂(∂s/∂t)`,
/// `∂F/∂Δs`, and `∂F/∂(vᵀ∇²s v)`.
#[derive(Debug, Clone)]
pub struct PointCotangents {
    pub d_value: f64,
    /// Spatial entries first, time last; length `dim + 1`.
    pub d_grad: Vec<f64>,
    pub d_laplacian: f64,
    pub d_dir_second: Vec<f64>,
}

impl PointCotangents {
    pub fn zeros(dim: usize, n_dirs: usize) -> Self {
        PointCotangents {
            d_value: 0.0,
            d_grad: vec![0.0; dim + 1],
            d_laplacian: 0.0,
            d_dir_second: vec![0.0; n_dirs],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.d_value.is_finite()
            && self.d_laplacian.is_finite()
            && self.d_grad.iter().all(|g| g.is_finite())
            && self.d_dir_second.iter().all(|g| g.is_finite())
    }
}

/// A twice-differentiable scalar potential over `(t, x)`.
///
/// Evaluation is read-only and safe to invoke concurrently; implementations
/// must return bitwise-identical jets for identical inputs.
pub trait ActionField: Sync {
    fn dim(&self) -> usize;

    /// Full jet: value, spatial gradient, time derivative, Laplacian.
    fn jet(&self, t: f64, x: &[f64]) -> Result<FieldJet, FieldError>;

    /// Spatial gradient only (hot path for ODE integration).
    fn spatial_grad_into(&self, t: f64, x: &[f64], out: &mut [f64]) -> Result<(), FieldError> {
        let jet = self.jet(t, x)?;
        out.copy_from_slice(&jet.spatial_grad);
        Ok(())
    }

    /// Value only.
    fn value(&self, t: f64, x: &[f64]) -> Result<f64, FieldError> {
        Ok(self.jet(t, x)?.value)
    }
}

fn check_point(dim: usize, t: f64, x: &[f64]) -> Result<(), FieldError> {
    if x.len() != dim {
        return Err(FieldError::DimMismatch { expected: dim, got: x.len() });
    }
    if !t.is_finite() || x.iter().any(|v| !v.is_finite()) {
        return Err(FieldError::NonFiniteInput);
    }
    Ok(())
}

/// A field whose jet entries are differentiable with respect to a flat
/// parameter vector. Closed-form fields implement this with zero parameters
/// so the objective estimators run on them unchanged.
pub trait DifferentiableField: ActionField {
    /// Per-thread scratch for repeated evaluation without allocation.
    type Workspace: Send;

    fn workspace(&self) -> Self::Workspace;

    fn param_len(&self) -> usize;

    /// Evaluates the requested quantities, retaining enough state in the
    /// workspace for a subsequent [`DifferentiableField::accumulate_param_grad`].
    fn eval_with(
        &self,
        ws: &mut Self::Workspace,
        t: f64,
        x: &[f64],
        request: &JetRequest,
    ) -> Result<PointEval, FieldError>;

    /// Accumulates `Σ_outputs cotangent · ∂output/∂θ` into `grad` for the
    /// point most recently evaluated in `ws`.
    fn accumulate_param_grad(
        &self,
        ws: &mut Self::Workspace,
        cot: &PointCotangents,
        grad: &mut [f64],
    );
}

/// Value and exact parameter gradient of a batch functional.
///
/// `functional` receives the per-point evaluations and returns the scalar
/// value together with its cotangents with respect to every point's outputs.
/// An empty batch yields `(0, 0)`.
pub fn loss_and_param_grad<F: DifferentiableField>(
    field: &F,
    points: &[(f64, Vec<f64>)],
    request: &JetRequest,
    functional: impl FnOnce(&[PointEval]) -> (f64, Vec<PointCotangents>),
) -> Result<(f64, Vec<f64>), FieldError> {
    let mut grad = vec![0.0; field.param_len()];
    if points.is_empty() {
        return Ok((0.0, grad));
    }
    let mut ws = field.workspace();
    let mut evals = Vec::with_capacity(points.len());
    for (t, x) in points {
        let eval = field.eval_with(&mut ws, *t, x, request)?;
        if !eval.is_finite() {
            return Err(FieldError::NonFinite { term: "jet".into() });
        }
        evals.push(eval);
    }
    let (value, cots) = functional(&evals);
    if !value.is_finite() {
        return Err(FieldError::NonFinite { term: "functional value".into() });
    }
    assert_eq!(cots.len(), points.len(), "one cotangent set per batch point");
    for ((t, x), cot) in points.iter().zip(&cots) {
        if !cot.is_finite() {
            return Err(FieldError::NonFinite { term: "functional cotangent".into() });
        }
        // Re-evaluate to restore the workspace state for this point.
        field.eval_with(&mut ws, *t, x, request)?;
        field.accumulate_param_grad(&mut ws, cot, &mut grad);
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(FieldError::NonFinite { term: "parameter gradient".into() });
    }
    Ok((value, grad))
}

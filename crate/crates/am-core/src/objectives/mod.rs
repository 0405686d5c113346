//! Monte-Carlo estimators of the matching objectives.
//!
//! Every variant shares one skeleton: boundary terms `E_{q_0}[s_0] −
//! E_{q_1}[s_1]` plus a time integral of an interior integrand under `q_t`,
//!
//! - plain:      `½‖∇s‖² + ∂s/∂t`, optionally ω-weighted with the extra
//!   `s·dω/dt` term that keeps the weighted objective equivalent,
//! - entropic:   `+ (σ_t²/2)·Δs`,
//! - unbalanced: `+ (λ/2)·s²` (growth),
//! - convex-cost: `c*(∇s)` replaces `½‖∇s‖²`,
//! - sliced score matching (baseline): `vᵀ(∇²s)v + ½(v·∇s)²` over random
//!   Rademacher projections `v`, the score model being `∇_x s` at fixed t.
//!
//! Interior times are drawn by stratified inversion of the proposal CDF
//! (one draw per stratum) and weighted by `1/p(t)`, so any strictly
//! positive proposal yields an unbiased estimate. Estimators are pure
//! given `(field parameters, batch seed)`; proposal updates are returned
//! functionally, never applied in place.

mod proposal;

pub use proposal::{TimeProposal, DEFAULT_BINS, DEFAULT_DECAY};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{DifferentiableField, FieldError, JetRequest, PointCotangents, PointEval};
use crate::paths::{MarginalPath, PathError};

/// Fixed work-unit size for parallel batch evaluation; gradients are
/// reduced in chunk order, so results are bitwise identical for any
/// thread count.
const CHUNK: usize = 64;

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error("dimension mismatch: field has {field}, path has {path}")]
    DimMismatch { field: usize, path: usize },
    #[error("diffusion scale must be nonnegative, got σ({t}) = {sigma}")]
    NegativeSigma { t: f64, sigma: f64 },
    #[error("non-finite jet in time bin {time_bin}")]
    NonFiniteJet { time_bin: usize },
    #[error("sliced score matching needs at least one projection")]
    ZeroProjections,
    #[error("path exposes no analytic action gradient")]
    NoAnalyticAction,
    #[error("field: {0}")]
    Field(#[from] FieldError),
    #[error("path: {0}")]
    Path(#[from] PathError),
}

/// Batch sizes and the seed that makes the estimate reproducible.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BatchSpec {
    pub n_boundary: usize,
    pub n_interior: usize,
    pub seed: u64,
}

impl BatchSpec {
    pub fn new(n_boundary: usize, n_interior: usize, seed: u64) -> Self {
        assert!(n_boundary >= 1 && n_interior >= 1, "batch sizes must be >= 1");
        BatchSpec { n_boundary, n_interior, seed }
    }
}

type TimeFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// Time reweighting ω(t) ≥ 0 with caller-supplied derivative.
pub struct WeightSchedule {
    w: TimeFn,
    dw: TimeFn,
}

impl WeightSchedule {
    pub fn new(
        w: impl Fn(f64) -> f64 + Send + Sync + 'static,
        dw: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        WeightSchedule { w: Box::new(w), dw: Box::new(dw) }
    }

    /// ω ≡ 1.
    pub fn identity() -> Self {
        WeightSchedule::new(|_| 1.0, |_| 0.0)
    }

    /// `ω(t) = (1−t)·t^{3/2}` — cancels endpoint singularities of
    /// interpolant paths whose scale vanishes at an endpoint.
    pub fn vanishing_endpoints() -> Self {
        WeightSchedule::new(
            |t| (1.0 - t) * t.powf(1.5),
            |t| 1.5 * t.sqrt() - 2.5 * t.powf(1.5),
        )
    }

    pub fn weight(&self, t: f64) -> f64 {
        (self.w)(t)
    }

    pub fn dweight(&self, t: f64) -> f64 {
        (self.dw)(t)
    }
}

/// Diffusion scale σ(t) ≥ 0.
pub struct SigmaSchedule {
    f: TimeFn,
}

impl SigmaSchedule {
    pub fn constant(sigma: f64) -> Self {
        SigmaSchedule { f: Box::new(move |_| sigma) }
    }

    pub fn from_fn(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        SigmaSchedule { f: Box::new(f) }
    }

    pub fn at(&self, t: f64) -> f64 {
        (self.f)(t)
    }
}

/// Convex conjugate `c*` of a strictly convex transport cost, with its
/// gradient (the dual velocity map).
pub trait ConjugateCost: Send + Sync {
    fn value(&self, y: &[f64]) -> f64;
    fn grad(&self, y: &[f64], out: &mut [f64]);
}

/// `c*(y) = ½‖y‖²` — recovers the plain objective exactly.
pub struct QuadraticConjugate;

impl ConjugateCost for QuadraticConjugate {
    fn value(&self, y: &[f64]) -> f64 {
        0.5 * y.iter().map(|v| v * v).sum::<f64>()
    }

    fn grad(&self, y: &[f64], out: &mut [f64]) {
        out.copy_from_slice(y);
    }
}

/// `c*(y) = ¼‖y‖⁴` (conjugate-of-power-4/3 cost family).
pub struct PowerFourConjugate;

impl ConjugateCost for PowerFourConjugate {
    fn value(&self, y: &[f64]) -> f64 {
        let n2: f64 = y.iter().map(|v| v * v).sum();
        0.25 * n2 * n2
    }

    fn grad(&self, y: &[f64], out: &mut [f64]) {
        let n2: f64 = y.iter().map(|v| v * v).sum();
        for (o, yi) in out.iter_mut().zip(y) {
            *o = n2 * yi;
        }
    }
}

/// Which matching objective to estimate.
pub enum Objective {
    Plain { schedule: WeightSchedule },
    Entropic { sigma: SigmaSchedule },
    Unbalanced { lambda: f64 },
    ConvexCost { conjugate: Box<dyn ConjugateCost> },
    SlicedScore { n_projections: usize },
}

/// Serializable objective description for configs and training presets.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObjectiveSpec {
    Am {
        #[serde(default)]
        schedule: ScheduleSpec,
    },
    /// Entropic variant; the constant diffusion scale is mandatory.
    Eam { sigma: f64 },
    Uam {
        #[serde(default = "default_lambda")]
        lambda: f64,
    },
    Cam { conjugate: ConjugateSpec },
    Ssm { n_projections: usize },
}

fn default_lambda() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleSpec {
    #[default]
    Identity,
    VanishingEndpoints,
}

impl ScheduleSpec {
    pub fn instantiate(self) -> WeightSchedule {
        match self {
            ScheduleSpec::Identity => WeightSchedule::identity(),
            ScheduleSpec::VanishingEndpoints => WeightSchedule::vanishing_endpoints(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConjugateSpec {
    Quadratic,
    PowerFour,
}

impl ConjugateSpec {
    pub fn instantiate(self) -> Box<dyn ConjugateCost> {
        match self {
            ConjugateSpec::Quadratic => Box::new(QuadraticConjugate),
            ConjugateSpec::PowerFour => Box::new(PowerFourConjugate),
        }
    }
}

impl ObjectiveSpec {
    pub fn instantiate(&self) -> Result<Objective, ObjectiveError> {
        Ok(match self {
            ObjectiveSpec::Am { schedule } => {
                Objective::Plain { schedule: schedule.instantiate() }
            }
            ObjectiveSpec::Eam { sigma } => {
                if *sigma < 0.0 {
                    return Err(ObjectiveError::NegativeSigma { t: 0.0, sigma: *sigma });
                }
                Objective::Entropic { sigma: SigmaSchedule::constant(*sigma) }
            }
            ObjectiveSpec::Uam { lambda } => Objective::Unbalanced { lambda: *lambda },
            ObjectiveSpec::Cam { conjugate } => {
                Objective::ConvexCost { conjugate: conjugate.instantiate() }
            }
            ObjectiveSpec::Ssm { n_projections } => {
                if *n_projections == 0 {
                    return Err(ObjectiveError::ZeroProjections);
                }
                Objective::SlicedScore { n_projections: *n_projections }
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ObjectiveSpec::Am { .. } => "am",
            ObjectiveSpec::Eam { .. } => "eam",
            ObjectiveSpec::Uam { .. } => "uam",
            ObjectiveSpec::Cam { .. } => "cam",
            ObjectiveSpec::Ssm { .. } => "ssm",
        }
    }
}

/// Named sub-terms of a loss estimate. The estimate's value always equals
/// `boundary_0 − boundary_1 + kinetic + time_deriv + laplacian + growth +
/// weight_deriv` (the sliced baseline stores its Hessian-trace part under
/// `laplacian` and its squared-projection part under `kinetic`).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub boundary_0: f64,
    pub boundary_1: f64,
    pub kinetic: f64,
    pub time_deriv: f64,
    pub laplacian: f64,
    pub growth: f64,
    pub weight_deriv: f64,
}

impl LossTerms {
    pub fn signed_sum(&self) -> f64 {
        self.boundary_0 - self.boundary_1
            + self.kinetic
            + self.time_deriv
            + self.laplacian
            + self.growth
            + self.weight_deriv
    }
}

#[derive(Debug, Clone)]
pub struct LossEstimate {
    pub value: f64,
    /// Monte-Carlo standard error of `value` under an iid approximation
    /// (conservative for the stratified interior sampler).
    pub value_std_err: f64,
    pub grad: Vec<f64>,
    pub terms: LossTerms,
}

struct InteriorPoint {
    t: f64,
    x: Vec<f64>,
    /// Importance weight 1/p(t).
    weight: f64,
    bin: usize,
    /// Flattened Rademacher projections (sliced baseline only).
    projections: Vec<f64>,
}

struct ChunkOut {
    grad: Vec<f64>,
    terms: LossTerms,
    /// Per-point weighted integrand values (for the SE estimate).
    contribs_sum: f64,
    contribs_sq: f64,
    observations: Vec<(usize, f64)>,
}

fn jet_request(objective: &Objective, pt: &InteriorPoint, dim: usize) -> JetRequest {
    match objective {
        Objective::Entropic { .. } => JetRequest::with_laplacian(),
        Objective::SlicedScore { .. } => JetRequest {
            laplacian: false,
            second_dirs: pt.projections.chunks(dim).map(|v| v.to_vec()).collect(),
        },
        _ => JetRequest::first_order(),
    }
}

fn process_interior<F: DifferentiableField>(
    field: &F,
    objective: &Objective,
    points: &[InteriorPoint],
    n_total: usize,
) -> Result<ChunkOut, ObjectiveError> {
    let d = field.dim();
    let mut ws = field.workspace();
    let mut out = ChunkOut {
        grad: vec![0.0; field.param_len()],
        terms: LossTerms::default(),
        contribs_sum: 0.0,
        contribs_sq: 0.0,
        observations: Vec::with_capacity(points.len()),
    };
    let mut conj_grad = vec![0.0; d];
    for pt in points {
        let req = jet_request(objective, pt, d);
        let eval: PointEval = field.eval_with(&mut ws, pt.t, &pt.x, &req)?;
        if !eval.is_finite() {
            return Err(ObjectiveError::NonFiniteJet { time_bin: pt.bin });
        }
        let gx = eval.spatial_grad();
        let gt = eval.time_deriv();
        let s = eval.value;
        let wgt = pt.weight / n_total as f64;
        let mut cot = PointCotangents::zeros(d, req.second_dirs.len());
        let zeta;
        match objective {
            Objective::Plain { schedule } => {
                let om = schedule.weight(pt.t);
                let dom = schedule.dweight(pt.t);
                let kin = 0.5 * gx.iter().map(|g| g * g).sum::<f64>();
                zeta = om * (kin + gt) + s * dom;
                out.terms.kinetic += wgt * om * kin;
                out.terms.time_deriv += wgt * om * gt;
                out.terms.weight_deriv += wgt * s * dom;
                cot.d_value = wgt * dom;
                for i in 0..d {
                    cot.d_grad[i] = wgt * om * gx[i];
                }
                cot.d_grad[d] = wgt * om;
            }
            Objective::Entropic { sigma } => {
                let sg = sigma.at(pt.t);
                if sg < 0.0 {
                    return Err(ObjectiveError::NegativeSigma { t: pt.t, sigma: sg });
                }
                let half_s2 = 0.5 * sg * sg;
                let kin = 0.5 * gx.iter().map(|g| g * g).sum::<f64>();
                let lap = eval.laplacian.expect("laplacian requested");
                zeta = kin + gt + half_s2 * lap;
                out.terms.kinetic += wgt * kin;
                out.terms.time_deriv += wgt * gt;
                out.terms.laplacian += wgt * half_s2 * lap;
                for i in 0..d {
                    cot.d_grad[i] = wgt * gx[i];
                }
                cot.d_grad[d] = wgt;
                cot.d_laplacian = wgt * half_s2;
            }
            Objective::Unbalanced { lambda } => {
                let kin = 0.5 * gx.iter().map(|g| g * g).sum::<f64>();
                let growth = 0.5 * lambda * s * s;
                zeta = kin + gt + growth;
                out.terms.kinetic += wgt * kin;
                out.terms.time_deriv += wgt * gt;
                out.terms.growth += wgt * growth;
                cot.d_value = wgt * lambda * s;
                for i in 0..d {
                    cot.d_grad[i] = wgt * gx[i];
                }
                cot.d_grad[d] = wgt;
            }
            Objective::ConvexCost { conjugate } => {
                let cv = conjugate.value(gx);
                conjugate.grad(gx, &mut conj_grad);
                zeta = cv + gt;
                out.terms.kinetic += wgt * cv;
                out.terms.time_deriv += wgt * gt;
                for i in 0..d {
                    cot.d_grad[i] = wgt * conj_grad[i];
                }
                cot.d_grad[d] = wgt;
            }
            Objective::SlicedScore { n_projections } => {
                let np = *n_projections as f64;
                let mut trace_part = 0.0;
                let mut score_part = 0.0;
                for (j, v) in pt.projections.chunks(d).enumerate() {
                    let vg: f64 = v.iter().zip(gx).map(|(vi, gi)| vi * gi).sum();
                    trace_part += eval.dir_second[j];
                    score_part += 0.5 * vg * vg;
                    cot.d_dir_second[j] = wgt / np;
                    for i in 0..d {
                        cot.d_grad[i] += wgt / np * vg * v[i];
                    }
                }
                zeta = (trace_part + score_part) / np;
                out.terms.laplacian += wgt * trace_part / np;
                out.terms.kinetic += wgt * score_part / np;
            }
        }
        let contrib = pt.weight * zeta;
        out.contribs_sum += contrib;
        out.contribs_sq += contrib * contrib;
        out.observations.push((pt.bin, zeta));
        field.accumulate_param_grad(&mut ws, &cot, &mut out.grad);
    }
    Ok(out)
}

/// Shared estimator core. Returns the loss estimate and, when a proposal
/// was supplied, the functionally-updated proposal.
pub fn estimate<F: DifferentiableField>(
    field: &F,
    path: &dyn MarginalPath,
    batch: &BatchSpec,
    objective: &Objective,
    proposal: Option<&TimeProposal>,
) -> Result<(LossEstimate, Option<TimeProposal>), ObjectiveError> {
    let d = field.dim();
    if d != path.dim() {
        return Err(ObjectiveError::DimMismatch { field: d, path: path.dim() });
    }
    if let Objective::SlicedScore { n_projections: 0 } = objective {
        return Err(ObjectiveError::ZeroProjections);
    }

    let mut rng = ChaCha12Rng::seed_from_u64(batch.seed);
    let n_b = batch.n_boundary;
    let n_i = batch.n_interior;

    // Draw order is fixed across variants so identical seeds give
    // identical batches: q0 boundary, q1 boundary, then per interior
    // point its stratum, its sample, and (sliced only) its projections.
    let b0 = path.sample(0.0, n_b, &mut rng)?;
    let b1 = path.sample(1.0, n_b, &mut rng)?;
    let mut interior = Vec::with_capacity(n_i);
    for i in 0..n_i {
        let u: f64 = rng.random();
        let quantile = (i as f64 + u) / n_i as f64;
        let (t, dens, bin) = match proposal {
            Some(p) => {
                let (t, dens) = p.inv_cdf(quantile);
                (t, dens, p.bin_of(t))
            }
            None => (quantile, 1.0, ((quantile * 100.0) as usize).min(99)),
        };
        let mut x = vec![0.0; d];
        path.sample_into(t, &mut rng, &mut x)?;
        let projections = match objective {
            Objective::SlicedScore { n_projections } => (0..n_projections * d)
                .map(|_| if rng.random::<f64>() < 0.5 { -1.0 } else { 1.0 })
                .collect(),
            _ => Vec::new(),
        };
        interior.push(InteriorPoint { t, x, weight: 1.0 / dens, bin, projections });
    }

    let (w0, w1) = match objective {
        Objective::Plain { schedule } => (schedule.weight(0.0), schedule.weight(1.0)),
        _ => (1.0, 1.0),
    };

    // Boundary terms: values and plain value-backprop.
    let boundary = |xs: &[f64], t: f64, alpha: f64, grad: &mut [f64]| -> Result<(f64, f64), ObjectiveError> {
        let chunks: Vec<&[f64]> = xs.chunks(CHUNK * d).collect();
        let outs: Vec<Result<(f64, f64, Vec<f64>), ObjectiveError>> = chunks
            .par_iter()
            .map(|chunk| {
                let mut ws = field.workspace();
                let mut g = vec![0.0; field.param_len()];
                let mut sum = 0.0;
                let mut sq = 0.0;
                let req = JetRequest::first_order();
                let mut cot = PointCotangents::zeros(d, 0);
                cot.d_value = alpha;
                for x in chunk.chunks(d) {
                    let eval = field.eval_with(&mut ws, t, x, &req)?;
                    if !eval.value.is_finite() {
                        return Err(ObjectiveError::NonFiniteJet {
                            time_bin: if t == 0.0 { 0 } else { 99 },
                        });
                    }
                    sum += eval.value;
                    sq += eval.value * eval.value;
                    if alpha != 0.0 {
                        field.accumulate_param_grad(&mut ws, &cot, &mut g);
                    }
                }
                Ok((sum, sq, g))
            })
            .collect();
        let mut sum = 0.0;
        let mut sq = 0.0;
        for out in outs {
            let (s, s2, g) = out?;
            sum += s;
            sq += s2;
            for (acc, gi) in grad.iter_mut().zip(&g) {
                *acc += gi;
            }
        }
        Ok((sum, sq))
    };

    let mut grad = vec![0.0; field.param_len()];
    let (sum0, sq0) = boundary(&b0, 0.0, w0 / n_b as f64, &mut grad)?;
    let (sum1, sq1) = boundary(&b1, 1.0, -w1 / n_b as f64, &mut grad)?;
    let mean0 = sum0 / n_b as f64;
    let mean1 = sum1 / n_b as f64;
    let var0 = (sq0 / n_b as f64 - mean0 * mean0).max(0.0);
    let var1 = (sq1 / n_b as f64 - mean1 * mean1).max(0.0);

    // Interior, in deterministic chunk order.
    let chunks: Vec<&[InteriorPoint]> = interior.chunks(CHUNK).collect();
    let outs: Vec<Result<ChunkOut, ObjectiveError>> = chunks
        .par_iter()
        .map(|chunk| process_interior(field, objective, chunk, n_i))
        .collect();
    let mut terms = LossTerms::default();
    let mut contribs_sum = 0.0;
    let mut contribs_sq = 0.0;
    let mut observations = Vec::with_capacity(n_i);
    for out in outs {
        let out = out?;
        for (acc, gi) in grad.iter_mut().zip(&out.grad) {
            *acc += gi;
        }
        terms.kinetic += out.terms.kinetic;
        terms.time_deriv += out.terms.time_deriv;
        terms.laplacian += out.terms.laplacian;
        terms.growth += out.terms.growth;
        terms.weight_deriv += out.terms.weight_deriv;
        contribs_sum += out.contribs_sum;
        contribs_sq += out.contribs_sq;
        observations.extend(out.observations);
    }
    terms.boundary_0 = w0 * mean0;
    terms.boundary_1 = w1 * mean1;

    let int_mean = contribs_sum / n_i as f64;
    let int_var = (contribs_sq / n_i as f64 - int_mean * int_mean).max(0.0);
    let value = terms.signed_sum();
    let value_std_err = (w0 * w0 * var0 / n_b as f64
        + w1 * w1 * var1 / n_b as f64
        + int_var / n_i as f64)
        .sqrt();
    if !value.is_finite() {
        return Err(ObjectiveError::NonFiniteJet { time_bin: 0 });
    }

    let updated = proposal.map(|p| p.updated(&observations));
    Ok((LossEstimate { value, value_std_err, grad, terms }, updated))
}

/// ω-weighted matching loss with importance-sampled interior times.
/// Returns the estimate together with the functionally-updated proposal.
pub fn am_loss<F: DifferentiableField>(
    field: &F,
    path: &dyn MarginalPath,
    batch: &BatchSpec,
    schedule: WeightSchedule,
    proposal: &TimeProposal,
) -> Result<(LossEstimate, TimeProposal), ObjectiveError> {
    let (est, updated) =
        estimate(field, path, batch, &Objective::Plain { schedule }, Some(proposal))?;
    Ok((est, updated.expect("proposal supplied")))
}

/// Entropic variant: plain loss plus the interior term `(σ_t²/2)·Δs`.
pub fn eam_loss<F: DifferentiableField>(
    field: &F,
    path: &dyn MarginalPath,
    batch: &BatchSpec,
    sigma: SigmaSchedule,
) -> Result<LossEstimate, ObjectiveError> {
    estimate(field, path, batch, &Objective::Entropic { sigma }, None).map(|(e, _)| e)
}

/// Unbalanced variant: plain loss plus the growth term `½ s²`.
pub fn uam_loss<F: DifferentiableField>(
    field: &F,
    path: &dyn MarginalPath,
    batch: &BatchSpec,
) -> Result<LossEstimate, ObjectiveError> {
    uam_loss_weighted(field, path, batch, 1.0)
}

/// Unbalanced variant with an explicit growth multiplier λ (defaults to 1
/// in [`uam_loss`]).
pub fn uam_loss_weighted<F: DifferentiableField>(
    field: &F,
    path: &dyn MarginalPath,
    batch: &BatchSpec,
    lambda: f64,
) -> Result<LossEstimate, ObjectiveError> {
    estimate(field, path, batch, &Objective::Unbalanced { lambda }, None).map(|(e, _)| e)
}

/// Convex-cost variant: `c*(∇s)` replaces the quadratic kinetic term.
pub fn cam_loss<F: DifferentiableField>(
    field: &F,
    path: &dyn MarginalPath,
    batch: &BatchSpec,
    conjugate: Box<dyn ConjugateCost>,
) -> Result<LossEstimate, ObjectiveError> {
    estimate(field, path, batch, &Objective::ConvexCost { conjugate }, None).map(|(e, _)| e)
}

/// Sliced score-matching baseline over Rademacher projections.
pub fn ssm_loss<F: DifferentiableField>(
    field: &F,
    path: &dyn MarginalPath,
    batch: &BatchSpec,
    n_projections: usize,
) -> Result<LossEstimate, ObjectiveError> {
    estimate(field, path, batch, &Objective::SlicedScore { n_projections }, None).map(|(e, _)| e)
}

/// Functional proposal update from `(bin, integrand)` observations.
pub fn update_time_proposal(
    proposal: &TimeProposal,
    observations: &[(usize, f64)],
) -> TimeProposal {
    proposal.updated(observations)
}

/// Configuration for grid-quadrature Monte-Carlo functionals of a path.
#[derive(Debug, Clone, Copy)]
pub struct GapConfig {
    /// Midpoint time grid size.
    pub n_times: usize,
    pub n_samples_per_time: usize,
    pub seed: u64,
}

impl Default for GapConfig {
    fn default() -> Self {
        GapConfig { n_times: 200, n_samples_per_time: 500, seed: 0 }
    }
}

fn grid_expectation(
    path: &dyn MarginalPath,
    cfg: &GapConfig,
    mut f: impl FnMut(f64, &[f64]) -> Result<f64, ObjectiveError>,
) -> Result<(f64, f64), ObjectiveError> {
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let d = path.dim();
    let mut x = vec![0.0; d];
    let g = cfg.n_times as f64;
    let n = cfg.n_samples_per_time as f64;
    let mut total_mean = 0.0;
    let mut total_var = 0.0;
    for k in 0..cfg.n_times {
        let t = (k as f64 + 0.5) / g;
        let mut sum = 0.0;
        let mut sq = 0.0;
        for _ in 0..cfg.n_samples_per_time {
            path.sample_into(t, &mut rng, &mut x)?;
            let v = f(t, &x)?;
            sum += v;
            sq += v * v;
        }
        let mean = sum / n;
        total_mean += mean / g;
        total_var += ((sq / n - mean * mean).max(0.0) / n) / (g * g);
    }
    Ok((total_mean, total_var.sqrt()))
}

/// `½ ∫ E_{q_t} ‖∇s − ∇s*‖² dt` against the path's analytic action
/// gradient, with its Monte-Carlo standard error.
pub fn action_gap_with_err(
    field: &dyn crate::field::ActionField,
    path: &dyn MarginalPath,
    cfg: &GapConfig,
) -> Result<(f64, f64), ObjectiveError> {
    let d = path.dim();
    if path.true_action_grad(0.5, &vec![0.0; d]).is_none() {
        return Err(ObjectiveError::NoAnalyticAction);
    }
    let mut grad = vec![0.0; d];
    grid_expectation(path, cfg, |t, x| {
        let truth = path.true_action_grad(t, x).ok_or(ObjectiveError::NoAnalyticAction)?;
        field.spatial_grad_into(t, x, &mut grad)?;
        Ok(0.5 * grad.iter().zip(&truth).map(|(g, v)| (g - v) * (g - v)).sum::<f64>())
    })
}

pub fn action_gap(
    field: &dyn crate::field::ActionField,
    path: &dyn MarginalPath,
    cfg: &GapConfig,
) -> Result<f64, ObjectiveError> {
    action_gap_with_err(field, path, cfg).map(|(v, _)| v)
}

/// Kinetic energy of the path `½ ∫ E_{q_t} ‖∇s*‖² dt` (the constant in the
/// gap-loss decomposition), with standard error.
pub fn kinetic_energy_with_err(
    path: &dyn MarginalPath,
    cfg: &GapConfig,
) -> Result<(f64, f64), ObjectiveError> {
    let d = path.dim();
    if path.true_action_grad(0.5, &vec![0.0; d]).is_none() {
        return Err(ObjectiveError::NoAnalyticAction);
    }
    grid_expectation(path, cfg, |t, x| {
        let truth = path.true_action_grad(t, x).ok_or(ObjectiveError::NoAnalyticAction)?;
        Ok(0.5 * truth.iter().map(|v| v * v).sum::<f64>())
    })
}

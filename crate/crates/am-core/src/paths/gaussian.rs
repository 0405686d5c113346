//! Gaussian and Gaussian-mixture paths with closed-form ground truth.

use std::f64::consts::PI;

use rand::{Rng, RngCore};

use super::{check_unit_time, standard_normal, MarginalPath, PathError};

type MeanFn = Box<dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync>;
type ScaleFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

const SCALE_CHECK_GRID: usize = 1001;

fn validate_scale(sigma: &ScaleFn) -> Result<(), PathError> {
    for k in 0..SCALE_CHECK_GRID {
        let t = k as f64 / (SCALE_CHECK_GRID - 1) as f64;
        let s = sigma(t);
        if !(s > 0.0) || !s.is_finite() {
            return Err(PathError::NonPositiveScale { t, sigma: s });
        }
    }
    Ok(())
}

/// `q_t = N(f_t(x0), σ_t² I)` with caller-supplied mean/scale derivatives.
///
/// Velocity: `(x − f_t(x0)) · d/dt log σ_t + d f_t(x0)/dt` — a gradient
/// field, so it doubles as the true action gradient.
pub struct GaussianPath {
    x0: Vec<f64>,
    mean: MeanFn,
    dmean: MeanFn,
    sigma: ScaleFn,
    dsigma: ScaleFn,
}

/// Builds a [`GaussianPath`]; rejects scale functions that touch zero
/// anywhere on a fine grid over `[0,1]` (singular velocity).
pub fn gaussian_path(
    x0: Vec<f64>,
    mean: impl Fn(f64, &[f64]) -> Vec<f64> + Send + Sync + 'static,
    dmean: impl Fn(f64, &[f64]) -> Vec<f64> + Send + Sync + 'static,
    sigma: impl Fn(f64) -> f64 + Send + Sync + 'static,
    dsigma: impl Fn(f64) -> f64 + Send + Sync + 'static,
) -> Result<GaussianPath, PathError> {
    let sigma: ScaleFn = Box::new(sigma);
    validate_scale(&sigma)?;
    Ok(GaussianPath {
        x0,
        mean: Box::new(mean),
        dmean: Box::new(dmean),
        sigma,
        dsigma: Box::new(dsigma),
    })
}

impl GaussianPath {
    /// Translation at constant unit scale: `q_t = N(t·u, σ² I)`.
    pub fn translation(u: Vec<f64>, sigma: f64) -> Result<Self, PathError> {
        let d = u.len();
        let u2 = u.clone();
        gaussian_path(
            vec![0.0; d],
            move |t, x0| x0.iter().zip(&u).map(|(x, ui)| x + t * ui).collect(),
            move |_, _| u2.clone(),
            move |_| sigma,
            |_| 0.0,
        )
    }

    /// 1D drifting diffusion marginals: `q_t = N(u·t, (1+t))`.
    pub fn drifting_diffusion_1d(u: f64) -> Self {
        gaussian_path(
            vec![0.0],
            move |t, _| vec![u * t],
            move |_, _| vec![u],
            |t| (1.0 + t).sqrt(),
            |t| 0.5 / (1.0 + t).sqrt(),
        )
        .expect("scale positive")
    }

    /// Marginals of the linear two-Gaussian interpolant
    /// `(1−t)·N(0,I) + t·N(μ,I)` in the sample space:
    /// `q_t = N(tμ, ((1−t)² + t²) I)`.
    pub fn linear_interpolant_marginals(mu: Vec<f64>) -> Self {
        let d = mu.len();
        let mu2 = mu.clone();
        gaussian_path(
            vec![0.0; d],
            move |t, _| mu.iter().map(|m| t * m).collect(),
            move |_, _| mu2.clone(),
            |t| ((1.0 - t) * (1.0 - t) + t * t).sqrt(),
            |t| (2.0 * t - 1.0) / ((1.0 - t) * (1.0 - t) + t * t).sqrt(),
        )
        .expect("scale positive")
    }

    /// Static marginals `q_t ≡ N(mu, σ² I)`.
    pub fn static_gaussian(mu: Vec<f64>, sigma: f64) -> Result<Self, PathError> {
        let d = mu.len();
        let mu2 = mu.clone();
        gaussian_path(
            vec![0.0; d],
            move |_, _| mu.clone(),
            move |_, _| vec![0.0; mu2.len()],
            move |_| sigma,
            |_| 0.0,
        )
    }

    fn mean_at(&self, t: f64) -> Vec<f64> {
        (self.mean)(t, &self.x0)
    }
}

impl MarginalPath for GaussianPath {
    fn dim(&self) -> usize {
        self.x0.len()
    }

    fn sample_into(
        &self,
        t: f64,
        rng: &mut dyn RngCore,
        out: &mut [f64],
    ) -> Result<(), PathError> {
        check_unit_time(t)?;
        let m = self.mean_at(t);
        let s = (self.sigma)(t);
        for (o, mi) in out.iter_mut().zip(&m) {
            *o = mi + s * standard_normal(rng);
        }
        Ok(())
    }

    fn density(&self, t: f64, x: &[f64]) -> Option<f64> {
        let m = self.mean_at(t);
        let s2 = (self.sigma)(t).powi(2);
        let d = self.dim() as f64;
        let r2: f64 = x.iter().zip(&m).map(|(xi, mi)| (xi - mi).powi(2)).sum();
        Some((2.0 * PI * s2).powf(-0.5 * d) * (-0.5 * r2 / s2).exp())
    }

    fn score(&self, t: f64, x: &[f64]) -> Option<Vec<f64>> {
        let m = self.mean_at(t);
        let s2 = (self.sigma)(t).powi(2);
        Some(x.iter().zip(&m).map(|(xi, mi)| -(xi - mi) / s2).collect())
    }

    fn velocity(&self, t: f64, x: &[f64]) -> Option<Vec<f64>> {
        let m = self.mean_at(t);
        let dm = (self.dmean)(t, &self.x0);
        let dlog_sigma = (self.dsigma)(t) / (self.sigma)(t);
        Some(
            x.iter()
                .zip(m.iter().zip(&dm))
                .map(|(xi, (mi, dmi))| (xi - mi) * dlog_sigma + dmi)
                .collect(),
        )
    }

    fn true_action_grad(&self, t: f64, x: &[f64]) -> Option<Vec<f64>> {
        self.velocity(t, x)
    }
}

/// Equal-weight Gaussian mixture spreading a finite point set:
/// `q_t = (1/N) Σ_i N(f_t(x^i), σ_t² I)`.
///
/// The continuity velocity is the responsibility-weighted blend of the
/// per-component fields:
/// `v = Σ_i w_i(x) [ (x − f_t(x^i)) d/dt log σ_t + d f_t(x^i)/dt ]`.
/// It is not a gradient field for `N > 1`, so no action-gradient hook.
pub struct DeltaMixturePath {
    points: Vec<Vec<f64>>,
    mean: MeanFn,
    dmean: MeanFn,
    sigma: ScaleFn,
    dsigma: ScaleFn,
    dim: usize,
}

pub fn delta_mixture_path(
    points: Vec<Vec<f64>>,
    mean: impl Fn(f64, &[f64]) -> Vec<f64> + Send + Sync + 'static,
    dmean: impl Fn(f64, &[f64]) -> Vec<f64> + Send + Sync + 'static,
    sigma: impl Fn(f64) -> f64 + Send + Sync + 'static,
    dsigma: impl Fn(f64) -> f64 + Send + Sync + 'static,
) -> Result<DeltaMixturePath, PathError> {
    if points.is_empty() {
        return Err(PathError::EmptyPoints);
    }
    let sigma: ScaleFn = Box::new(sigma);
    validate_scale(&sigma)?;
    let dim = points[0].len();
    Ok(DeltaMixturePath {
        points,
        mean: Box::new(mean),
        dmean: Box::new(dmean),
        sigma,
        dsigma: Box::new(dsigma),
        dim,
    })
}

impl DeltaMixturePath {
    /// Responsibilities `w_i(x) ∝ N(x | f_t(x^i), σ²)`, log-sum-exp stable.
    fn responsibilities(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let s2 = (self.sigma)(t).powi(2);
        let logs: Vec<f64> = self
            .points
            .iter()
            .map(|p| {
                let m = (self.mean)(t, p);
                let r2: f64 = x.iter().zip(&m).map(|(xi, mi)| (xi - mi).powi(2)).sum();
                -0.5 * r2 / s2
            })
            .collect();
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut w: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = w.iter().sum();
        for wi in &mut w {
            *wi /= z;
        }
        w
    }
}

impl MarginalPath for DeltaMixturePath {
    fn dim(&self) -> usize {
        self.dim
    }

    fn sample_into(
        &self,
        t: f64,
        rng: &mut dyn RngCore,
        out: &mut [f64],
    ) -> Result<(), PathError> {
        check_unit_time(t)?;
        let idx = rng.random_range(0..self.points.len());
        let m = (self.mean)(t, &self.points[idx]);
        let s = (self.sigma)(t);
        for (o, mi) in out.iter_mut().zip(&m) {
            *o = mi + s * standard_normal(rng);
        }
        Ok(())
    }

    fn density(&self, t: f64, x: &[f64]) -> Option<f64> {
        let s2 = (self.sigma)(t).powi(2);
        let d = self.dim as f64;
        let norm = (2.0 * PI * s2).powf(-0.5 * d);
        let total: f64 = self
            .points
            .iter()
            .map(|p| {
                let m = (self.mean)(t, p);
                let r2: f64 = x.iter().zip(&m).map(|(xi, mi)| (xi - mi).powi(2)).sum();
                norm * (-0.5 * r2 / s2).exp()
            })
            .sum();
        Some(total / self.points.len() as f64)
    }

    fn score(&self, t: f64, x: &[f64]) -> Option<Vec<f64>> {
        let w = self.responsibilities(t, x);
        let s2 = (self.sigma)(t).powi(2);
        let mut score = vec![0.0; self.dim];
        for (wi, p) in w.iter().zip(&self.points) {
            let m = (self.mean)(t, p);
            for k in 0..self.dim {
                score[k] += wi * (-(x[k] - m[k]) / s2);
            }
        }
        Some(score)
    }

    fn velocity(&self, t: f64, x: &[f64]) -> Option<Vec<f64>> {
        let w = self.responsibilities(t, x);
        let dlog_sigma = (self.dsigma)(t) / (self.sigma)(t);
        let mut v = vec![0.0; self.dim];
        for (wi, p) in w.iter().zip(&self.points) {
            let m = (self.mean)(t, p);
            let dm = (self.dmean)(t, p);
            for k in 0..self.dim {
                v[k] += wi * ((x[k] - m[k]) * dlog_sigma + dm[k]);
            }
        }
        Some(v)
    }
}

//! Sample-space interpolants between a prior and a data distribution:
//! `x_t = (1−t)·x₀ + t·x₁`, optionally masked so that a subset of
//! coordinates stays pinned to the data draw (conditional generation).
//!
//! The induced density path is defined implicitly through the samples;
//! there are no analytic hooks.

use rand::{Rng, RngCore};

use super::{check_unit_time, standard_normal, MarginalPath, PathError};

/// A sampler for one endpoint distribution.
pub struct Sampler {
    dim: usize,
    draw: Box<dyn Fn(&mut dyn RngCore, &mut [f64]) + Send + Sync>,
}

impl Sampler {
    pub fn new(
        dim: usize,
        draw: impl Fn(&mut dyn RngCore, &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Sampler { dim, draw: Box::new(draw) }
    }

    pub fn standard_normal(dim: usize) -> Self {
        Sampler::new(dim, |rng, out| {
            for o in out.iter_mut() {
                *o = standard_normal(rng);
            }
        })
    }

    pub fn gaussian(mean: Vec<f64>, sigma: f64) -> Self {
        let dim = mean.len();
        Sampler::new(dim, move |rng, out| {
            for (o, m) in out.iter_mut().zip(&mean) {
                *o = m + sigma * standard_normal(rng);
            }
        })
    }

    /// Resamples rows of a fixed point set (flattened `n × dim`).
    pub fn point_set(points: Vec<f64>, dim: usize) -> Result<Self, PathError> {
        if points.is_empty() || points.len() % dim != 0 {
            return Err(PathError::EmptyPoints);
        }
        let n = points.len() / dim;
        Ok(Sampler::new(dim, move |rng, out| {
            let i = rng.random_range(0..n);
            out.copy_from_slice(&points[i * dim..(i + 1) * dim]);
        }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

pub struct InterpolantPath {
    prior: Sampler,
    data: Sampler,
    mask: Option<Vec<f64>>,
    scratch: usize,
}

pub fn interpolant_path(
    prior: Sampler,
    data: Sampler,
    mask: Option<Vec<f64>>,
) -> Result<InterpolantPath, PathError> {
    if prior.dim() != data.dim() {
        return Err(PathError::DimMismatch { expected: prior.dim(), got: data.dim() });
    }
    if let Some(m) = &mask {
        if m.len() != prior.dim() || m.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(PathError::InvalidMask);
        }
    }
    let scratch = prior.dim();
    Ok(InterpolantPath { prior, data, mask, scratch })
}

impl MarginalPath for InterpolantPath {
    fn dim(&self) -> usize {
        self.scratch
    }

    fn sample_into(
        &self,
        t: f64,
        rng: &mut dyn RngCore,
        out: &mut [f64],
    ) -> Result<(), PathError> {
        check_unit_time(t)?;
        let d = self.dim();
        let mut x0 = vec![0.0; d];
        let mut x1 = vec![0.0; d];
        (self.prior.draw)(rng, &mut x0);
        (self.data.draw)(rng, &mut x1);
        for k in 0..d {
            let blend = (1.0 - t) * x0[k] + t * x1[k];
            out[k] = match &self.mask {
                Some(m) => m[k] * x1[k] + (1.0 - m[k]) * blend,
                None => blend,
            };
        }
        Ok(())
    }
}

//! Two-mode mixture whose weights change while the modes stand still:
//! `q_t = α_t N(left, 1) + (1−α_t) N(right, 1)` with `α_t` linear.
//!
//! Mass "teleports" between the modes, so there is no finite continuity
//! velocity — this path exists to exercise the unbalanced objective, which
//! models the change through a growth rate instead of transport.

use std::f64::consts::PI;

use rand::{Rng, RngCore};

use super::{check_unit_time, standard_normal, MarginalPath, PathError};

pub struct WeightShiftPath {
    left_mean: f64,
    right_mean: f64,
    alpha0: f64,
    alpha1: f64,
}

pub fn weight_shift_path(
    left_mean: f64,
    right_mean: f64,
    alpha0: f64,
    alpha1: f64,
) -> Result<WeightShiftPath, PathError> {
    if !(0.0 < alpha0 && alpha0 < 1.0 && 0.0 < alpha1 && alpha1 < 1.0) {
        return Err(PathError::InvalidAlpha { alpha0, alpha1 });
    }
    Ok(WeightShiftPath { left_mean, right_mean, alpha0, alpha1 })
}

impl Default for WeightShiftPath {
    /// The growth-demo configuration: modes at ±5, `α: 0.2 → 0.8`.
    fn default() -> Self {
        weight_shift_path(-5.0, 5.0, 0.2, 0.8).unwrap()
    }
}

fn normal_pdf(x: f64, mean: f64) -> f64 {
    (2.0 * PI).powf(-0.5) * (-0.5 * (x - mean) * (x - mean)).exp()
}

impl WeightShiftPath {
    /// Left-mode weight `α_t = α0 + (α1 − α0) t`.
    pub fn left_weight(&self, t: f64) -> f64 {
        self.alpha0 + (self.alpha1 - self.alpha0) * t
    }

    pub fn modes(&self) -> (f64, f64) {
        (self.left_mean, self.right_mean)
    }

    /// Time derivative of the density (the mass-creation rate before
    /// normalizing by `q`), used by growth-rate diagnostics.
    pub fn ddensity_dt(&self, _t: f64, x: f64) -> f64 {
        (self.alpha1 - self.alpha0) * (normal_pdf(x, self.left_mean) - normal_pdf(x, self.right_mean))
    }
}

impl MarginalPath for WeightShiftPath {
    fn dim(&self) -> usize {
        1
    }

    fn sample_into(
        &self,
        t: f64,
        rng: &mut dyn RngCore,
        out: &mut [f64],
    ) -> Result<(), PathError> {
        check_unit_time(t)?;
        let mode = if rng.random::<f64>() < self.left_weight(t) {
            self.left_mean
        } else {
            self.right_mean
        };
        out[0] = mode + standard_normal(rng);
        Ok(())
    }

    fn density(&self, t: f64, x: &[f64]) -> Option<f64> {
        let a = self.left_weight(t);
        Some(a * normal_pdf(x[0], self.left_mean) + (1.0 - a) * normal_pdf(x[0], self.right_mean))
    }

    fn score(&self, t: f64, x: &[f64]) -> Option<Vec<f64>> {
        let a = self.left_weight(t);
        let ql = a * normal_pdf(x[0], self.left_mean);
        let qr = (1.0 - a) * normal_pdf(x[0], self.right_mean);
        let dq = -ql * (x[0] - self.left_mean) - qr * (x[0] - self.right_mean);
        Some(vec![dq / (ql + qr)])
    }
}

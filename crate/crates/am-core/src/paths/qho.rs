//! Superposition of the two lowest unit-frequency harmonic-oscillator
//! eigenstates, evolved over one full beat period.
//!
//! With `ψ(x, τ) = (ψ₀(x) e^{−iE₀τ} + ψ₁(x) e^{−iE₁τ})/√2` and
//! `E₁ − E₀ = 1`, the coordinate density is
//!
//! `q(x, τ) = ½(ψ₀² + ψ₁²) + ψ₀ψ₁ cos τ`,
//!
//! which is 2π-periodic in τ; the path maps `t ∈ [0,1]` onto `τ = 2πt`.
//! The probability current `J = Im(ψ* ∂ₓψ) = −(2π)^{−1/2} e^{−x²} sin τ`
//! gives the exact transport velocity `v = (dτ/dt)·J/q`, and in one
//! dimension every velocity is a gradient field, so `v` is also the true
//! action gradient. The density has a node at `x = ∓2^{−1/2}` whenever
//! `cos τ = ±1` (t = 0, ½, 1), where score and velocity blow up — the
//! standard hazard of wavefunction paths.
//!
//! Sampling is by rejection under a `N(0, 4)` envelope; the acceptance
//! bound is analytic (see `envelope_bound`).

use std::f64::consts::PI;

use rand::{Rng, RngCore};

use super::{check_unit_time, standard_normal, MarginalPath, PathError};

pub struct QhoSuperpositionPath {
    envelope_m: f64,
}

pub fn qho_superposition_path() -> QhoSuperpositionPath {
    QhoSuperpositionPath { envelope_m: envelope_bound() }
}

const INV_SQRT_PI: f64 = 0.564_189_583_547_756_3; // π^{−1/2}

/// `sup_{t,x} q(t,x) / N(x | 0, 4)`.
///
/// `q(t,x) ≤ ½(|ψ₀| + |ψ₁|)² = ½ π^{−1/2} e^{−x²}(1 + √2|x|)²`, so the
/// ratio is `√2 (1 + √2|x|)² e^{−7x²/8}`, maximized at the positive root of
/// `7√2 x² + 7x − 8√2 = 0`.
fn envelope_bound() -> f64 {
    let x_star = (-7.0 + 497.0_f64.sqrt()) / (14.0 * 2.0_f64.sqrt());
    let w = (1.0 + 2.0_f64.sqrt() * x_star).powi(2) * (-7.0 * x_star * x_star / 8.0).exp();
    2.0_f64.sqrt() * w
}

fn envelope_pdf(x: f64) -> f64 {
    // N(0, 4): standard deviation 2.
    (-x * x / 8.0).exp() / (2.0 * (2.0 * PI).sqrt())
}

impl QhoSuperpositionPath {
    fn tau(t: f64) -> f64 {
        2.0 * PI * t
    }

    /// The polynomial factor of the density: `q = π^{−1/2} e^{−x²} P(x, τ)`
    /// with `P = ½ + x² + √2 x cos τ`.
    fn poly(x: f64, cos_tau: f64) -> f64 {
        0.5 + x * x + 2.0_f64.sqrt() * x * cos_tau
    }
}

impl MarginalPath for QhoSuperpositionPath {
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
        let cos_tau = Self::tau(t).cos();
        loop {
            let x = 2.0 * standard_normal(rng);
            let u: f64 = rng.random();
            let q = INV_SQRT_PI * (-x * x).exp() * Self::poly(x, cos_tau);
            if u * self.envelope_m * envelope_pdf(x) <= q {
                out[0] = x;
                return Ok(());
            }
        }
    }

    fn density(&self, t: f64, x: &[f64]) -> Option<f64> {
        let cos_tau = Self::tau(t).cos();
        Some(INV_SQRT_PI * (-x[0] * x[0]).exp() * Self::poly(x[0], cos_tau))
    }

    fn score(&self, t: f64, x: &[f64]) -> Option<Vec<f64>> {
        let cos_tau = Self::tau(t).cos();
        let x = x[0];
        let p = Self::poly(x, cos_tau);
        let dp = 2.0 * x + 2.0_f64.sqrt() * cos_tau;
        Some(vec![-2.0 * x + dp / p])
    }

    fn velocity(&self, t: f64, x: &[f64]) -> Option<Vec<f64>> {
        let tau = Self::tau(t);
        let sin_tau = tau.sin();
        if sin_tau == 0.0 {
            return Some(vec![0.0]);
        }
        // v = 2π J / q with the e^{−x²} factor cancelled for tail stability.
        let p = Self::poly(x[0], tau.cos());
        let j_over_q = -sin_tau / ((2.0 * PI).sqrt() * INV_SQRT_PI * p);
        Some(vec![2.0 * PI * j_over_q])
    }

    fn true_action_grad(&self, t: f64, x: &[f64]) -> Option<Vec<f64>> {
        self.velocity(t, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::diagnostics::integrate_density_1d;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn density_normalizes_by_quadrature() {
        let path = qho_superposition_path();
        for &t in &[0.0, 0.3, 0.7] {
            let mass = integrate_density_1d(&path, t, -10.0, 10.0, 20_001);
            assert!((mass - 1.0).abs() < 1e-6, "t={t} mass={mass}");
        }
    }

    #[test]
    fn velocity_vanishes_at_time_zero() {
        let path = qho_superposition_path();
        for &x in &[-2.0, -0.5, 0.0, 1.3] {
            assert_eq!(path.velocity(0.0, &[x]).unwrap()[0], 0.0);
        }
    }

    #[test]
    fn center_density_is_time_independent() {
        // ψ₁ is odd, so q_t(0) = ½ψ₀(0)² = ½π^{−1/2} ≈ 0.28209 at every t.
        let path = qho_superposition_path();
        let expected = 0.5 * INV_SQRT_PI;
        for &t in &[0.0, 0.21, 0.5, 0.77, 1.0] {
            let q = path.density(t, &[0.0]).unwrap();
            assert!((q - expected).abs() < 1e-12);
        }
        assert!((expected - 0.28209).abs() < 1e-5);
    }

    #[test]
    fn envelope_dominates_density_everywhere() {
        let path = qho_superposition_path();
        for kt in 0..=20 {
            let t = kt as f64 / 20.0;
            for kx in 0..=400 {
                let x = -8.0 + kx as f64 * 0.04;
                let q = path.density(t, &[x]).unwrap();
                assert!(
                    q <= path.envelope_m * envelope_pdf(x) * (1.0 + 1e-12),
                    "envelope violated at t={t} x={x}"
                );
            }
        }
    }

    #[test]
    fn rejection_sampler_matches_quadrature_cdf() {
        let path = qho_superposition_path();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let n = 100_000;
        for &t in &[0.15, 0.6] {
            let samples = path.sample(t, n, &mut rng).unwrap();
            let d = crate::paths::diagnostics::ks_statistic_1d(&path, t, &samples, -10.0, 10.0);
            // KS critical value at level 1e-3.
            let crit = 1.9495 / (n as f64).sqrt();
            assert!(d < crit, "t={t}: KS statistic {d} exceeds {crit}");
        }
    }

    #[test]
    fn score_is_gradient_of_log_density() {
        let path = qho_superposition_path();
        let h = 1e-6;
        for &(t, x) in &[(0.2, 0.7), (0.45, -1.2), (0.9, 2.0)] {
            let fd = (path.density(t, &[x + h]).unwrap().ln()
                - path.density(t, &[x - h]).unwrap().ln())
                / (2.0 * h);
            let s = path.score(t, &[x]).unwrap()[0];
            assert!((fd - s).abs() < 1e-5 * s.abs().max(1.0), "t={t} x={x}");
        }
    }
}

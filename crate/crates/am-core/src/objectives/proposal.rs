//! Adaptive importance-sampling proposal over interior times.
//!
//! `p(t)` is piecewise constant over `B` equal-width bins on `[0,1]`, with
//! per-bin mass proportional to the running standard deviation of the
//! interior integrand in that bin. Any strictly positive proposal leaves
//! the estimator unbiased (it enters only through `1/p(t)` importance
//! weights), so the masses purely trade variance.
//!
//! Statistics are exponential moving averages of the first two moments
//! with decay λ, debiased by update count so a fresh proposal is exactly
//! uniform and early updates are not shrunk toward zero. Masses are
//! floored at `ε_p = 1e-3/B` to keep importance weights bounded.

use serde::{Deserialize, Serialize};

pub const DEFAULT_BINS: usize = 100;
pub const DEFAULT_DECAY: f64 = 0.99;
pub const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimeProposal {
    bins: usize,
    decay: f64,
    masses: Vec<f64>,
    m1: Vec<f64>,
    m2: Vec<f64>,
    count: Vec<u64>,
}

impl TimeProposal {
    /// Fresh proposal: uniform masses, empty statistics.
    pub fn uniform(bins: usize, decay: f64) -> Self {
        assert!(bins >= 1 && (0.0..1.0).contains(&decay));
        TimeProposal {
            bins,
            decay,
            masses: vec![1.0 / bins as f64; bins],
            m1: vec![0.0; bins],
            m2: vec![0.0; bins],
            count: vec![0; bins],
        }
    }

    /// Proposal with prescribed per-bin standard deviations (statistics
    /// seeded as if converged). Mostly for tests and warm starts.
    pub fn with_stds(stds: &[f64], decay: f64) -> Self {
        let mut p = TimeProposal::uniform(stds.len(), decay);
        for (b, &s) in stds.iter().enumerate() {
            p.m1[b] = 0.0;
            p.m2[b] = s * s;
            p.count[b] = u64::MAX; // debias factor ≈ 1
        }
        p.refresh_masses();
        p
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn bin_of(&self, t: f64) -> usize {
        ((t * self.bins as f64) as usize).min(self.bins - 1)
    }

    /// Proposal density at `t` (piecewise constant, integrates to 1).
    pub fn density(&self, t: f64) -> f64 {
        self.masses[self.bin_of(t)] * self.bins as f64
    }

    /// Inverse CDF: maps `p ∈ [0,1)` to a time; returns `(t, density)`.
    pub fn inv_cdf(&self, p: f64) -> (f64, f64) {
        let width = 1.0 / self.bins as f64;
        let mut cum = 0.0;
        for (b, &m) in self.masses.iter().enumerate() {
            if p < cum + m || b == self.bins - 1 {
                let frac = ((p - cum) / m).clamp(0.0, 1.0 - f64::EPSILON);
                let t = (b as f64 + frac) * width;
                return (t, m * self.bins as f64);
            }
            cum += m;
        }
        unreachable!()
    }

    /// Functional update: feeds `(bin, integrand value)` observations into
    /// the moment EMAs and recomputes masses. `self` is left untouched.
    pub fn updated(&self, observations: &[(usize, f64)]) -> TimeProposal {
        let mut next = self.clone();
        for &(bin, z) in observations {
            assert!(bin < next.bins);
            next.count[bin] = next.count[bin].saturating_add(1);
            next.m1[bin] = next.decay * next.m1[bin] + (1.0 - next.decay) * z;
            next.m2[bin] = next.decay * next.m2[bin] + (1.0 - next.decay) * z * z;
        }
        next.refresh_masses();
        next
    }

    /// Debiased per-bin standard deviation (0 for untouched bins).
    pub fn bin_std(&self, bin: usize) -> f64 {
        if self.count[bin] == 0 {
            return 0.0;
        }
        let debias = if self.count[bin] == u64::MAX {
            1.0
        } else {
            1.0 - self.decay.powi(self.count[bin].min(i32::MAX as u64) as i32)
        };
        let mu = self.m1[bin] / debias;
        let ex2 = self.m2[bin] / debias;
        (ex2 - mu * mu).max(0.0).sqrt()
    }

    fn refresh_masses(&mut self) {
        let eps_p = 1e-3 / self.bins as f64;
        let mut w: Vec<f64> = (0..self.bins).map(|b| self.bin_std(b).max(STD_FLOOR)).collect();
        let total: f64 = w.iter().sum();
        for wi in &mut w {
            *wi /= total;
        }
        // Exact water-filling for the mass floor.
        for _ in 0..self.bins {
            let floored: Vec<bool> = w.iter().map(|&wi| wi < eps_p).collect();
            let n_floored = floored.iter().filter(|&&f| f).count();
            if n_floored == 0 {
                break;
            }
            let rest: f64 = w.iter().zip(&floored).filter(|(_, &f)| !f).map(|(wi, _)| wi).sum();
            let scale = (1.0 - n_floored as f64 * eps_p) / rest;
            let mut changed = false;
            for (wi, &f) in w.iter_mut().zip(&floored) {
                if f {
                    *wi = eps_p;
                } else {
                    *wi *= scale;
                    if *wi < eps_p {
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        self.masses = w;
    }
}

//! Numeric consistency checks for paths exposing analytic hooks.
//!
//! These are the oracles behind the path invariants: a density/velocity
//! pair must satisfy the continuity equation `∂q/∂t + ∇·(qv) = 0` under
//! finite differences, a score must match `∇ log q`, and a sampler must
//! match the quadrature CDF.

use super::MarginalPath;

/// Max of `|∂q/∂t + ∇·(qv)|` over a tensor grid, together with the max
/// density on the grid. Central differences with steps `dt`, `dx`.
pub fn continuity_residual(
    path: &dyn MarginalPath,
    t: f64,
    lo: &[f64],
    hi: &[f64],
    points_per_dim: usize,
    dt: f64,
    dx: f64,
) -> (f64, f64) {
    let d = path.dim();
    assert!(d == lo.len() && d == hi.len());
    let mut idx = vec![0usize; d];
    let mut max_resid = 0.0_f64;
    let mut max_q = 0.0_f64;
    let flux = |t: f64, x: &[f64], k: usize| -> f64 {
        path.density(t, x).unwrap() * path.velocity(t, x).unwrap()[k]
    };
    loop {
        let x: Vec<f64> = idx
            .iter()
            .enumerate()
            .map(|(k, &i)| lo[k] + (hi[k] - lo[k]) * i as f64 / (points_per_dim - 1) as f64)
            .collect();
        let q = path.density(t, &x).unwrap();
        max_q = max_q.max(q);
        let dq_dt = (path.density(t + dt, &x).unwrap() - path.density(t - dt, &x).unwrap())
            / (2.0 * dt);
        let mut div = 0.0;
        for k in 0..d {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += dx;
            xm[k] -= dx;
            div += (flux(t, &xp, k) - flux(t, &xm, k)) / (2.0 * dx);
        }
        max_resid = max_resid.max((dq_dt + div).abs());

        // Advance the tensor index.
        let mut k = 0;
        loop {
            idx[k] += 1;
            if idx[k] < points_per_dim {
                break;
            }
            idx[k] = 0;
            k += 1;
            if k == d {
                return (max_resid, max_q);
            }
        }
    }
}

/// Max relative error of the analytic score against `∇ log q` by central
/// differences, over grid points where the density exceeds `density_floor`.
pub fn score_consistency(
    path: &dyn MarginalPath,
    t: f64,
    lo: &[f64],
    hi: &[f64],
    points_per_dim: usize,
    dx: f64,
    density_floor: f64,
) -> f64 {
    let d = path.dim();
    let mut idx = vec![0usize; d];
    let mut worst = 0.0_f64;
    loop {
        let x: Vec<f64> = idx
            .iter()
            .enumerate()
            .map(|(k, &i)| lo[k] + (hi[k] - lo[k]) * i as f64 / (points_per_dim - 1) as f64)
            .collect();
        if path.density(t, &x).unwrap() >= density_floor {
            let score = path.score(t, &x).unwrap();
            for k in 0..d {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += dx;
                xm[k] -= dx;
                let fd = (path.density(t, &xp).unwrap().ln()
                    - path.density(t, &xm).unwrap().ln())
                    / (2.0 * dx);
                worst = worst.max((fd - score[k]).abs() / score[k].abs().max(1.0));
            }
        }
        let mut k = 0;
        loop {
            idx[k] += 1;
            if idx[k] < points_per_dim {
                break;
            }
            idx[k] = 0;
            k += 1;
            if k == d {
                return worst;
            }
        }
    }
}

/// Trapezoid mass of a 1D density over `[lo, hi]`.
pub fn integrate_density_1d(
    path: &dyn MarginalPath,
    t: f64,
    lo: f64,
    hi: f64,
    points: usize,
) -> f64 {
    let h = (hi - lo) / (points - 1) as f64;
    let mut mass = 0.0;
    for i in 0..points {
        let x = lo + i as f64 * h;
        let q = path.density(t, &[x]).unwrap();
        let w = if i == 0 || i == points - 1 { 0.5 } else { 1.0 };
        mass += w * q;
    }
    mass * h
}

/// One-sample Kolmogorov–Smirnov statistic of `samples` against the
/// quadrature CDF of the path's 1D density.
pub fn ks_statistic_1d(
    path: &dyn MarginalPath,
    t: f64,
    samples: &[f64],
    lo: f64,
    hi: f64,
) -> f64 {
    // Cumulative trapezoid CDF on a fine grid.
    let points = 16_001;
    let h = (hi - lo) / (points - 1) as f64;
    let mut cdf = vec![0.0; points];
    let mut prev_q = path.density(t, &[lo]).unwrap();
    for i in 1..points {
        let x = lo + i as f64 * h;
        let q = path.density(t, &[x]).unwrap();
        cdf[i] = cdf[i - 1] + 0.5 * (prev_q + q) * h;
        prev_q = q;
    }
    let total = cdf[points - 1];
    let eval_cdf = |x: f64| -> f64 {
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        let pos = (x - lo) / h;
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        ((1.0 - frac) * cdf[i] + frac * cdf[i + 1]) / total
    };
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d_stat = 0.0_f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = eval_cdf(x);
        let emp_hi = (i + 1) as f64 / n;
        let emp_lo = i as f64 / n;
        d_stat = d_stat.max((f - emp_hi).abs()).max((f - emp_lo).abs());
    }
    d_stat
}

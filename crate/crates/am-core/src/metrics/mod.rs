//! Distributional distances and error functionals.
//!
//! Point clouds are flattened row-major `n × dim` slices. The Wasserstein-2
//! solver is exact (assignment by shortest augmenting paths), capped at
//! n = 4096 where approximate solvers would blur test tolerances. MMD is
//! the biased V-statistic — nonnegative by construction — with an RBF
//! kernel and a recorded bandwidth (median heuristic by default).

mod assignment;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::field::ActionField;
use crate::paths::MarginalPath;

pub use assignment::min_cost_assignment;

pub const MAX_ASSIGNMENT_SIZE: usize = 4096;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("point sets must be nonempty")]
    Empty,
    #[error("dimension mismatch between point sets")]
    DimMismatch,
    #[error("wasserstein2 requires equal sizes, got {0} and {1}")]
    UnequalSizes(usize, usize),
    #[error("exact assignment capped at n = {MAX_ASSIGNMENT_SIZE}, got {0}")]
    TooLarge(usize),
    #[error("bandwidth must be positive")]
    BadBandwidth,
    #[error("path exposes no analytic velocity or action gradient")]
    NoAnalyticTruth,
    #[error("field: {0}")]
    Field(#[from] crate::field::FieldError),
    #[error("path: {0}")]
    Path(#[from] crate::paths::PathError),
}

/// RBF kernel specification: `k(x,y) = exp(−‖x−y‖² / (2h²))`.
#[derive(Debug, Clone, Copy)]
pub enum Bandwidth {
    Explicit(f64),
    /// Median pairwise distance of the pooled sample.
    MedianHeuristic,
}

#[derive(Debug, Clone, Copy)]
pub struct KernelSpec {
    pub bandwidth: Bandwidth,
}

impl KernelSpec {
    pub fn rbf(bandwidth: f64) -> Self {
        KernelSpec { bandwidth: Bandwidth::Explicit(bandwidth) }
    }

    pub fn median_heuristic() -> Self {
        KernelSpec { bandwidth: Bandwidth::MedianHeuristic }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn resolve_bandwidth(spec: &KernelSpec, x: &[f64], y: &[f64], dim: usize) -> Result<f64, MetricError> {
    match spec.bandwidth {
        Bandwidth::Explicit(h) => {
            if h > 0.0 {
                Ok(h)
            } else {
                Err(MetricError::BadBandwidth)
            }
        }
        Bandwidth::MedianHeuristic => {
            let pooled: Vec<&[f64]> = x.chunks(dim).chain(y.chunks(dim)).collect();
            let n = pooled.len();
            let mut dists = Vec::with_capacity(n * (n - 1) / 2);
            for i in 0..n {
                for j in (i + 1)..n {
                    dists.push(sq_dist(pooled[i], pooled[j]).sqrt());
                }
            }
            dists.sort_by(f64::total_cmp);
            let med = if dists.is_empty() { 1.0 } else { dists[dists.len() / 2] };
            Ok(if med > 0.0 { med } else { 1.0 })
        }
    }
}

/// Biased MMD estimate and the bandwidth it used:
/// `√( mean k(X,X) + mean k(Y,Y) − 2 mean k(X,Y) )`, clipped at 0 before
/// the root.
pub fn mmd_with_bandwidth(
    x: &[f64],
    y: &[f64],
    dim: usize,
    kernel: &KernelSpec,
) -> Result<(f64, f64), MetricError> {
    if x.is_empty() || y.is_empty() {
        return Err(MetricError::Empty);
    }
    if x.len() % dim != 0 || y.len() % dim != 0 {
        return Err(MetricError::DimMismatch);
    }
    let h = resolve_bandwidth(kernel, x, y, dim)?;
    let gamma = 1.0 / (2.0 * h * h);
    let mean_kernel = |a: &[f64], b: &[f64]| -> f64 {
        let rows_a: Vec<&[f64]> = a.chunks(dim).collect();
        let rows_b: Vec<&[f64]> = b.chunks(dim).collect();
        let total: f64 = rows_a
            .par_iter()
            .map(|ra| rows_b.iter().map(|rb| (-gamma * sq_dist(ra, rb)).exp()).sum::<f64>())
            .sum();
        total / (rows_a.len() * rows_b.len()) as f64
    };
    let mmd_sq = mean_kernel(x, x) + mean_kernel(y, y) - 2.0 * mean_kernel(x, y);
    Ok((mmd_sq.max(0.0).sqrt(), h))
}

pub fn mmd(x: &[f64], y: &[f64], dim: usize, kernel: &KernelSpec) -> Result<f64, MetricError> {
    mmd_with_bandwidth(x, y, dim, kernel).map(|(v, _)| v)
}

/// Exact 2-Wasserstein distance between equal-size clouds:
/// `√( min_π (1/n) Σ ‖x_i − y_{π(i)}‖² )`.
pub fn wasserstein2(x: &[f64], y: &[f64], dim: usize) -> Result<f64, MetricError> {
    if x.is_empty() || y.is_empty() {
        return Err(MetricError::Empty);
    }
    if x.len() % dim != 0 || y.len() % dim != 0 {
        return Err(MetricError::DimMismatch);
    }
    let n = x.len() / dim;
    let m = y.len() / dim;
    if n != m {
        return Err(MetricError::UnequalSizes(n, m));
    }
    if n > MAX_ASSIGNMENT_SIZE {
        return Err(MetricError::TooLarge(n));
    }
    let xr: Vec<&[f64]> = x.chunks(dim).collect();
    let yr: Vec<&[f64]> = y.chunks(dim).collect();
    let mut cost = vec![0.0; n * n];
    cost.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for j in 0..n {
            row[j] = sq_dist(xr[i], yr[j]);
        }
    });
    let (_, total) = min_cost_assignment(&cost, n);
    Ok((total / n as f64).sqrt())
}

/// Relative field error against the path's analytic gradient-field truth:
/// `√( Σ_t E‖∇s − v*‖² / Σ_t E‖v*‖² )` over a uniform time grid, Monte
/// Carlo in `x`. Uses `true_action_grad` when present, else `velocity`.
pub fn field_error(
    field: &dyn ActionField,
    path: &dyn MarginalPath,
    n_times: usize,
    n_samples: usize,
    seed: u64,
) -> Result<f64, MetricError> {
    let d = path.dim();
    let truth = |t: f64, x: &[f64]| -> Option<Vec<f64>> {
        path.true_action_grad(t, x).or_else(|| path.velocity(t, x))
    };
    if truth(0.0, &vec![0.0; d]).is_none() {
        return Err(MetricError::NoAnalyticTruth);
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut num = 0.0;
    let mut den = 0.0;
    let mut grad = vec![0.0; d];
    for k in 0..n_times {
        let t = if n_times == 1 { 0.5 } else { k as f64 / (n_times - 1) as f64 };
        let xs = path.sample(t, n_samples, &mut rng)?;
        for x in xs.chunks(d) {
            let v_star = truth(t, x).ok_or(MetricError::NoAnalyticTruth)?;
            field.spatial_grad_into(t, x, &mut grad)?;
            for i in 0..d {
                let diff = grad[i] - v_star[i];
                num += diff * diff;
                den += v_star[i] * v_star[i];
            }
        }
    }
    Ok((num / den).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{ConstantField, GaussianTrueAction, Shifted};
    use crate::paths::GaussianPath;
    use proptest::prelude::*;
    use rand::{Rng, RngCore};

    #[test]
    fn mmd_identical_sets_is_zero() {
        let x = vec![0.0, 1.0, 2.0, 3.0];
        let v = mmd(&x, &x.clone(), 2, &KernelSpec::rbf(1.0)).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn mmd_hand_value() {
        // X = {0}, Y = {1}, h = 1: MMD² = 2 − 2e^{−1/2}.
        let v = mmd(&[0.0], &[1.0], 1, &KernelSpec::rbf(1.0)).unwrap();
        let expected = (2.0 - 2.0 * (-0.5_f64).exp()).sqrt();
        assert!((v - expected).abs() < 1e-12);
        assert!((v * v - 0.78694).abs() < 1e-5);
    }

    #[test]
    fn w2_hand_values() {
        assert_eq!(wasserstein2(&[0.0], &[1.0], 1).unwrap(), 1.0);
        // Same multiset in different order.
        assert_eq!(wasserstein2(&[0.0, 1.0], &[1.0, 0.0], 1).unwrap(), 0.0);
        // {0,2} vs {1,3}: optimal coupling is order-preserving, cost 1 each.
        assert_eq!(wasserstein2(&[0.0, 2.0], &[1.0, 3.0], 1).unwrap(), 1.0);
    }

    #[test]
    fn w2_errors() {
        assert!(matches!(
            wasserstein2(&[0.0, 1.0], &[1.0], 1),
            Err(MetricError::UnequalSizes(2, 1))
        ));
        assert!(matches!(wasserstein2(&[], &[], 1), Err(MetricError::Empty)));
    }

    #[test]
    fn w2_1d_equals_sorted_coupling() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        for _ in 0..5 {
            let n = 200;
            let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 4.0).collect();
            let w = wasserstein2(&x, &y, 1).unwrap();
            let mut xs = x.clone();
            let mut ys = y.clone();
            xs.sort_by(f64::total_cmp);
            ys.sort_by(f64::total_cmp);
            let sorted_cost: f64 =
                xs.iter().zip(&ys).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n as f64;
            assert!((w - sorted_cost.sqrt()).abs() < 1e-9);
        }
    }

    use rand_chacha::ChaCha12Rng;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn mmd_symmetry_and_nonnegativity(seed in 0u64..1000) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let n = 1 + (rng.next_u32() % 12) as usize;
            let m = 1 + (rng.next_u32() % 12) as usize;
            let x: Vec<f64> = (0..n * 2).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let y: Vec<f64> = (0..m * 2).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let k = KernelSpec::rbf(0.8);
            let a = mmd(&x, &y, 2, &k).unwrap();
            let b = mmd(&y, &x, 2, &k).unwrap();
            prop_assert!(a >= 0.0);
            prop_assert!((a - b).abs() < 1e-14);
        }

        #[test]
        fn w2_metric_axioms_on_small_clouds(seed in 0u64..200) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let n = 2 + (rng.next_u32() % 5) as usize; // ≤ 6
            let cloud = |rng: &mut ChaCha12Rng| -> Vec<f64> {
                (0..n * 2).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect()
            };
            let x = cloud(&mut rng);
            let y = cloud(&mut rng);
            let z = cloud(&mut rng);
            let dxy = wasserstein2(&x, &y, 2).unwrap();
            let dyx = wasserstein2(&y, &x, 2).unwrap();
            let dxz = wasserstein2(&x, &z, 2).unwrap();
            let dzy = wasserstein2(&z, &y, 2).unwrap();
            prop_assert!((dxy - dyx).abs() < 1e-12, "symmetry");
            prop_assert!(wasserstein2(&x, &x.clone(), 2).unwrap() < 1e-12, "identity");
            prop_assert!(dxy <= dxz + dzy + 1e-9, "triangle");
        }
    }

    #[test]
    fn field_error_zero_for_truth_and_shift_invariant() {
        let path = GaussianPath::translation(vec![1.0, 0.0], 1.0).unwrap();
        let truth = GaussianTrueAction::translation(vec![1.0, 0.0]);
        let e = field_error(&truth, &path, 9, 200, 4).unwrap();
        assert!(e < 1e-10, "e={e}");
        let shifted = Shifted { inner: GaussianTrueAction::translation(vec![1.0, 0.0]), offset: 9.0 };
        let e2 = field_error(&shifted, &path, 9, 200, 4).unwrap();
        assert_eq!(e, e2);
    }

    #[test]
    fn field_error_of_zero_field_is_one_on_translation() {
        // numerator = denominator = ‖u‖² pointwise.
        let path = GaussianPath::translation(vec![1.0, 0.0], 1.0).unwrap();
        let zero = ConstantField::new(2, 3.0);
        let e = field_error(&zero, &path, 5, 500, 11).unwrap();
        assert!((e - 1.0).abs() < 1e-12, "e={e}");
    }

    #[test]
    fn field_error_requires_truth() {
        let path = crate::paths::WeightShiftPath::default();
        let zero = ConstantField::new(1, 0.0);
        assert!(matches!(
            field_error(&zero, &path, 3, 10, 0),
            Err(MetricError::NoAnalyticTruth)
        ));
    }
}

use super::*;
use crate::field::{Activation, ConstantField, LinearField, MlpField, QuadraticRadialField};
use crate::objectives::SigmaSchedule;
use crate::paths::GaussianPath;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn grid_ensemble(n: usize, dim: usize, spread: f64) -> ParticleEnsemble {
    let mut rng = ChaCha12Rng::seed_from_u64(4);
    let positions: Vec<f64> = (0..n * dim)
        .map(|_| spread * (2.0 * rand::Rng::random::<f64>(&mut rng) - 1.0))
        .collect();
    ParticleEnsemble::new(0.0, dim, positions)
}

#[test]
fn constant_field_leaves_ensemble_fixed() {
    let field = ConstantField::new(2, 5.0);
    let start = grid_ensemble(20, 2, 2.0);
    for method in [Method::Euler, Method::Rk4] {
        let out = integrate_ode(&field, &start, 0.0, 1.0, &IntegratorConfig::ode(method, 17))
            .unwrap();
        assert_eq!(out.positions, start.positions);
        assert_eq!(out.time, 1.0);
    }
}

#[test]
fn constant_velocity_is_exact_for_euler() {
    let field = LinearField::new(vec![1.0, 0.0]);
    let start = grid_ensemble(10, 2, 1.0);
    for steps in [1, 7, 100] {
        let out = integrate_ode(&field, &start, 0.0, 1.0, &IntegratorConfig::ode(Method::Euler, steps))
            .unwrap();
        for (x, x0) in out.positions.chunks(2).zip(start.positions.chunks(2)) {
            assert!((x[0] - (x0[0] + 1.0)).abs() < 1e-12);
            assert_eq!(x[1], x0[1]);
        }
    }
}

#[test]
fn exponential_flow_matches_closed_form() {
    // ∇s = x ⇒ x(1) = e·x(0).
    let field = QuadraticRadialField::constant(2, 1.0);
    let start = ParticleEnsemble::new(0.0, 2, vec![1.0, 0.0]);
    let out = integrate_ode(&field, &start, 0.0, 1.0, &IntegratorConfig::ode(Method::Rk4, 100))
        .unwrap();
    let e = std::f64::consts::E;
    assert!((out.positions[0] - e).abs() < 1e-6);
    assert!(out.positions[1].abs() < 1e-12);
}

#[test]
fn step_halving_convergence_orders() {
    // Global error ratios on the exponential-flow oracle.
    let field = QuadraticRadialField::constant(1, 1.0);
    let start = ParticleEnsemble::new(0.0, 1, vec![1.0]);
    let err = |method: Method, steps: usize| -> f64 {
        let out = integrate_ode(&field, &start, 0.0, 1.0, &IntegratorConfig::ode(method, steps))
            .unwrap();
        (out.positions[0] - std::f64::consts::E).abs()
    };
    let euler_ratio = err(Method::Euler, 200) / err(Method::Euler, 400);
    assert!((euler_ratio - 2.0).abs() < 0.2, "euler ratio {euler_ratio}");
    let rk4_ratio = err(Method::Rk4, 25) / err(Method::Rk4, 50);
    assert!((rk4_ratio - 16.0).abs() < 1.6, "rk4 ratio {rk4_ratio}");
}

#[test]
fn forward_backward_round_trip() {
    let field = MlpField::new(2, &[16, 16], Activation::Tanh, 12).unwrap();
    let start = grid_ensemble(50, 2, 1.5);
    let fwd = integrate_ode(&field, &start, 0.0, 1.0, &IntegratorConfig::ode(Method::Rk4, 100))
        .unwrap();
    let back = integrate_ode(
        &field,
        &fwd,
        1.0,
        0.0,
        &IntegratorConfig { method: Method::Rk4, steps: 100, direction: Direction::Backward },
    )
    .unwrap();
    let max_err = back
        .positions
        .iter()
        .zip(&start.positions)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(max_err < 1e-6, "round-trip error {max_err}");
}

#[test]
fn direction_must_match_span() {
    let field = ConstantField::new(1, 0.0);
    let start = ParticleEnsemble::new(0.0, 1, vec![0.0]);
    let err = integrate_ode(&field, &start, 1.0, 0.0, &IntegratorConfig::ode(Method::Rk4, 10))
        .unwrap_err();
    assert!(matches!(err, DynamicsError::DirectionMismatch { .. }));
}

#[test]
fn sde_with_zero_noise_is_euler_bitwise() {
    let field = MlpField::new(2, &[8], Activation::Softplus, 3).unwrap();
    let start = grid_ensemble(30, 2, 1.0);
    let ode = integrate_ode(&field, &start, 0.0, 1.0, &IntegratorConfig::ode(Method::Euler, 50))
        .unwrap();
    let sde = integrate_sde(
        &field,
        &start,
        0.0,
        1.0,
        &SigmaSchedule::constant(0.0),
        &IntegratorConfig { method: Method::EulerMaruyama, steps: 50, direction: Direction::Forward },
        9,
    )
    .unwrap();
    assert_eq!(ode.positions, sde.positions);
}

#[test]
fn brownian_motion_variance() {
    // ∇s ≡ 0, σ ≡ 1, x(0) = 0: Var x(1) = 1.
    let n = 100_000;
    let field = ConstantField::new(1, 0.0);
    let start = ParticleEnsemble::new(0.0, 1, vec![0.0; n]);
    let out = integrate_sde(
        &field,
        &start,
        0.0,
        1.0,
        &SigmaSchedule::constant(1.0),
        &IntegratorConfig::default_sde(),
        31,
    )
    .unwrap();
    let mean: f64 = out.positions.iter().sum::<f64>() / n as f64;
    let var: f64 =
        out.positions.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    let tol = 3.0 * (2.0 / n as f64).sqrt();
    assert!((var - 1.0).abs() < tol, "var={var}");
}

#[test]
fn ou_process_reaches_stationary_variance() {
    // Drift −x, σ = √2: stationary variance 1; integrate over repeated
    // unit intervals (the contract spans [0,1] per call).
    let field = QuadraticRadialField::constant(1, -1.0);
    let n = 20_000;
    let mut ens = ParticleEnsemble::new(0.0, 1, vec![0.0; n]);
    for pass in 0..8 {
        ens.time = 0.0;
        ens = integrate_sde(
            &field,
            &ens,
            0.0,
            1.0,
            &SigmaSchedule::constant(2.0_f64.sqrt()),
            &IntegratorConfig::default_sde(),
            100 + pass,
        )
        .unwrap();
    }
    let mean: f64 = ens.positions.iter().sum::<f64>() / n as f64;
    let var: f64 = ens.positions.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    // Euler–Maruyama bias at dt = 1/500 is ~dt; MC noise ~3√(2/n).
    assert!((var - 1.0).abs() < 0.04, "var={var}");
}

#[test]
fn sde_rejects_backward() {
    let field = ConstantField::new(1, 0.0);
    let start = ParticleEnsemble::new(0.0, 1, vec![0.0]);
    let err = integrate_sde(
        &field,
        &start,
        1.0,
        0.0,
        &SigmaSchedule::constant(1.0),
        &IntegratorConfig::default_sde(),
        0,
    )
    .unwrap_err();
    assert!(matches!(err, DynamicsError::BackwardSde));
}

#[test]
fn sde_is_reproducible_given_seed() {
    let field = ConstantField::new(2, 0.0);
    let start = grid_ensemble(40, 2, 1.0);
    let cfg = IntegratorConfig::default_sde();
    let sig = SigmaSchedule::constant(0.5);
    let a = integrate_sde(&field, &start, 0.0, 1.0, &sig, &cfg, 7).unwrap();
    let b = integrate_sde(&field, &start, 0.0, 1.0, &sig, &cfg, 7).unwrap();
    assert_eq!(a.positions, b.positions);
}

#[test]
fn weighted_constant_growth_is_exact() {
    // s ≡ c: positions fixed, log w(1) = log w(0) + c (dt = 1/128 keeps
    // the sum exact in binary).
    let field = ConstantField::new(1, 1.0);
    let start = ParticleEnsemble::new(0.0, 1, vec![0.5, -0.5]).with_unit_weights();
    for method in [Method::Euler, Method::Rk4] {
        let out = integrate_weighted(&field, &start, 0.0, 1.0, &IntegratorConfig::ode(method, 128))
            .unwrap();
        assert_eq!(out.positions, start.positions);
        for lw in out.log_weights.unwrap() {
            assert_eq!(lw, 1.0);
        }
    }
}

#[test]
fn weighted_zero_field_is_identity() {
    let field = ConstantField::new(2, 0.0);
    let start = grid_ensemble(10, 2, 1.0).with_unit_weights();
    let out = integrate_weighted(&field, &start, 0.0, 1.0, &IntegratorConfig::default_ode())
        .unwrap();
    assert_eq!(out.positions, start.positions);
    assert_eq!(out.log_weights.unwrap(), vec![0.0; 10]);
}

#[test]
fn weighted_linear_growth_along_trajectory() {
    // 1D s(t,x) = x: ∇s = 1 ⇒ x(t) = t from x(0) = 0, and
    // log w(1) = ∫₀¹ x(t) dt = ½.
    let field = LinearField::new(vec![1.0]);
    let start = ParticleEnsemble::new(0.0, 1, vec![0.0]).with_unit_weights();
    let out = integrate_weighted(&field, &start, 0.0, 1.0, &IntegratorConfig::ode(Method::Rk4, 100))
        .unwrap();
    assert!((out.positions[0] - 1.0).abs() < 1e-12);
    assert!((out.log_weights.unwrap()[0] - 0.5).abs() < 1e-8);
}

#[test]
fn weighted_requires_weights() {
    let field = ConstantField::new(1, 0.0);
    let start = ParticleEnsemble::new(0.0, 1, vec![0.0]);
    assert!(matches!(
        integrate_weighted(&field, &start, 0.0, 1.0, &IntegratorConfig::default_ode()),
        Err(DynamicsError::MissingWeights)
    ));
}

fn std_normal_log_density(x: &[f64]) -> f64 {
    let d = x.len() as f64;
    -0.5 * d * (2.0 * std::f64::consts::PI).ln() - 0.5 * x.iter().map(|v| v * v).sum::<f64>()
}

#[test]
fn likelihood_identity_flow() {
    let field = ConstantField::new(2, 3.0);
    let x = [0.7, -0.3];
    let ll = log_likelihood(&field, &x, std_normal_log_density, &IntegratorConfig::default_ode())
        .unwrap();
    assert!((ll - std_normal_log_density(&x)).abs() < 1e-12);
}

#[test]
fn likelihood_matches_gaussian_pushforward() {
    // s = ½x² in 1D: forward flow x ↦ x·e, pushforward N(0, e²).
    let field = QuadraticRadialField::constant(1, 1.0);
    let cfg = IntegratorConfig::ode(Method::Rk4, 200);
    let ll0 = log_likelihood(&field, &[0.0], std_normal_log_density, &cfg).unwrap();
    let expected0 = -0.5 * (2.0 * std::f64::consts::PI).ln() - 1.0;
    assert!((ll0 - expected0).abs() < 1e-5, "ll0={ll0} expected={expected0}");
    // General x against the analytic N(0, e²) density.
    let e2 = (2.0_f64).exp();
    for &x in &[-2.0, -0.4, 1.1, 3.0] {
        let ll = log_likelihood(&field, &[x], std_normal_log_density, &cfg).unwrap();
        let expected =
            -0.5 * (2.0 * std::f64::consts::PI * e2).ln() - 0.5 * x * x / e2;
        assert!((ll - expected).abs() < 1e-5, "x={x}: {ll} vs {expected}");
    }
}

#[test]
fn likelihood_sampling_duality() {
    // Mean log-likelihood of pushed samples ≈ −H(N(0, e²)).
    let field = QuadraticRadialField::constant(1, 1.0);
    let path = GaussianPath::static_gaussian(vec![0.0], 1.0).unwrap();
    let mut rng = ChaCha12Rng::seed_from_u64(40);
    let n = 500;
    let start = ParticleEnsemble::from_path(&path, 0.0, n, &mut rng).unwrap();
    let pushed = integrate_ode(&field, &start, 0.0, 1.0, &IntegratorConfig::default_ode())
        .unwrap();
    let cfg = IntegratorConfig::ode(Method::Rk4, 200);
    let mean_ll: f64 = pushed
        .positions
        .iter()
        .map(|&x| log_likelihood(&field, &[x], std_normal_log_density, &cfg).unwrap())
        .sum::<f64>()
        / n as f64;
    // −H = −(½ ln(2π e² ) + ½)
    let neg_entropy = -0.5 * (2.0 * std::f64::consts::PI * (2.0_f64).exp()).ln() - 0.5;
    assert!((mean_ll - neg_entropy).abs() < 0.1, "{mean_ll} vs {neg_entropy}");
}

#[test]
fn marginal_consistency_through_true_action() {
    // Push q0 draws with the true action of an exponential-scale path and
    // compare, pointwise-coupled, against the analytic transport map.
    use crate::field::GaussianTrueAction;
    use crate::metrics::wasserstein2;
    let x0_center = 0.4;
    let path = crate::paths::gaussian_path(
        vec![x0_center],
        |_, x0| x0.to_vec(),
        |_, _| vec![0.0],
        |t| t.exp(),
        |t| t.exp(),
    )
    .unwrap();
    // σ = e^t ⇒ L' = 1, f'' = f' = 0.
    let truth = GaussianTrueAction::new(
        1,
        move |_| vec![x0_center],
        |_| vec![0.0],
        |_| vec![0.0],
        |_| 1.0,
        |_| 0.0,
    );
    let mut rng = ChaCha12Rng::seed_from_u64(50);
    let n = 2000;
    let start = ParticleEnsemble::from_path(&path, 0.0, n, &mut rng).unwrap();
    for &t in &[0.5, 1.0] {
        let pushed = integrate_ode(&truth, &start, 0.0, t, &IntegratorConfig::default_ode())
            .unwrap();
        // Flow of (x − c)' = (x − c): x(t) = c + (x0 − c)e^t.
        let transported: Vec<f64> = start
            .positions
            .iter()
            .map(|&x0| x0_center + (x0 - x0_center) * t.exp())
            .collect();
        let w2 = wasserstein2(&pushed.positions, &transported, 1).unwrap();
        assert!(w2 < 0.05, "t={t}: W2={w2}");
    }
}

#[test]
fn ald_zero_steps_returns_initial() {
    let path = GaussianPath::static_gaussian(vec![0.0], 1.0).unwrap();
    let start = ParticleEnsemble::new(0.0, 1, vec![1.0, 2.0, 3.0]);
    let frames = ald_sample(&PathScore(&path), &[0.2, 0.7], 0, 0.1, &start, 5).unwrap();
    assert_eq!(frames.len(), 2);
    for f in &frames {
        assert_eq!(f.positions, start.positions);
    }
}

#[test]
fn ald_default_inner_steps_is_five() {
    assert_eq!(DEFAULT_ALD_INNER_STEPS, 5);
}

#[test]
fn ald_langevin_stationary_variance() {
    // True score of N(0,1) with step ε: the Euler–Maruyama chain has
    // stationary variance 1/(1−ε/4).
    let path = GaussianPath::static_gaussian(vec![0.0], 1.0).unwrap();
    let n = 5000;
    let start = ParticleEnsemble::new(0.0, 1, vec![0.0; n]);
    let times = vec![0.5; 400]; // 400·5 = 2000 steps, far past mixing
    let eps = 0.1;
    let frames = ald_sample(&PathScore(&path), &times, 5, eps, &start, 8).unwrap();
    let last = frames.last().unwrap();
    let mean: f64 = last.positions.iter().sum::<f64>() / n as f64;
    let var: f64 =
        last.positions.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    let expected = 1.0 / (1.0 - eps / 4.0);
    let tol = 3.0 * (2.0 / n as f64).sqrt() * expected;
    assert!((var - expected).abs() < tol, "var={var} expected={expected}");
}

#[test]
fn ald_requires_score() {
    // The interpolant path has no analytic score.
    use crate::paths::{interpolant_path, Sampler};
    let path =
        interpolant_path(Sampler::standard_normal(1), Sampler::standard_normal(1), None).unwrap();
    let start = ParticleEnsemble::new(0.0, 1, vec![0.0]);
    let err = ald_sample(&PathScore(&path), &[0.5], 1, 0.1, &start, 0).unwrap_err();
    assert!(matches!(err, DynamicsError::NoScore(_)));
}

#[test]
fn trajectory_csv_format() {
    let mut frames = vec![
        ParticleEnsemble::new(0.0, 2, vec![0.0, 1.0, 2.0, 3.0]),
        ParticleEnsemble::new(0.5, 2, vec![0.1, 1.1, 2.1, 3.1]),
    ];
    let mut buf = Vec::new();
    write_trajectory_csv(&mut buf, &frames).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,particle,x0,x1");
    assert_eq!(lines.next().unwrap(), "0,0,0,1");
    assert_eq!(text.lines().count(), 5);

    // Weighted variant adds the log_w column.
    frames[0] = frames[0].clone().with_unit_weights();
    frames[1] = frames[1].clone().with_unit_weights();
    let mut buf = Vec::new();
    write_trajectory_csv(&mut buf, &frames).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("t,particle,x0,x1,log_w\n"));
    assert!(text.lines().nth(1).unwrap().ends_with(",0"));
}

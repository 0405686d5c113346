use am_core::field::{Activation, MlpField};
use am_core::metrics::{mmd, mmd_with_bandwidth, KernelSpec};
use am_core::objectives::{ObjectiveSpec, ScheduleSpec};
use am_core::paths::{qho_superposition_path, MarginalPath};
use am_core::dynamics::{integrate_ode, IntegratorConfig, Method, ParticleEnsemble};
use am_core::train::{train, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn eval_push(field: &MlpField, label: &str) {
    let path = qho_superposition_path();
    let n = 2000;
    let times: Vec<f64> = (1..=10).map(|k| k as f64 / 10.0).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(31);
    let mut ens = ParticleEnsemble::from_path(&path, 0.0, n, &mut rng).unwrap();
    let mut am_sum = 0.0; let mut null_all = 0.0;
    let mut prev_t = 0.0;
    let mut per = vec![];
    for &t in &times {
        ens = integrate_ode(field, &ens, prev_t, t, &IntegratorConfig::ode(Method::Rk4, 20)).unwrap();
        prev_t = t;
        let truth = path.sample(t, n, &mut rng).unwrap();
        let truth2 = path.sample(t, n, &mut rng).unwrap();
        let (_, h) = mmd_with_bandwidth(&truth, &truth2, 1, &KernelSpec::median_heuristic()).unwrap();
        let kern = KernelSpec::rbf(h);
        let m = mmd(&ens.positions, &truth, 1, &kern).unwrap();
        am_sum += m; per.push(m);
        let mut null = 0.0;
        for _ in 0..8 {
            let a = path.sample(t, n, &mut rng).unwrap();
            let b = path.sample(t, n, &mut rng).unwrap();
            null += mmd(&a, &b, 1, &kern).unwrap();
        }
        null_all += null / 8.0;
    }
    println!("{label}: avg={:.5} null={:.5} ratio={:.2} last3=({:.3},{:.3},{:.3})",
        am_sum/10.0, null_all/10.0, am_sum/null_all, per[7], per[8], per[9]);
}

fn run(label: &str, batch: usize, lr: f64, iters: usize, seed: u64) {
    let path = qho_superposition_path();
    let field = MlpField::new(1, &[64, 64], Activation::Tanh, 7).unwrap();
    let cfg = TrainConfig { iterations: iters, n_boundary: batch, n_interior: batch,
        learning_rate: lr, eval_every: iters/3, seed, adaptive_proposal: true, ..TrainConfig::default() };
    let t0 = std::time::Instant::now();
    let (trained, report) = train(field, &path, &ObjectiveSpec::Am { schedule: ScheduleSpec::Identity }, &cfg, |_,_| {}).unwrap();
    let fe = report.records.last().unwrap().field_error.unwrap();
    println!("{label}: trained {:.0}s, final fe={fe:.3}", t0.elapsed().as_secs_f64());
    eval_push(&trained, label);
}

fn main() {
    run("C1 batch1024 lr1e-3 8k", 1024, 1e-3, 8000, 4);
    run("C2 batch512 lr5e-4 16k", 512, 5e-4, 16000, 4);
}

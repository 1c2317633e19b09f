//! Statistical and structural properties of the Langevin dynamics.

use mfld_core::data::{gen_circles, CirclesParams};
use mfld_core::mfnn::neuron_eval;
use mfld_core::optim::mfld_step_keyed;
use mfld_core::rng::{self, std_normal};
use mfld_core::{init_system, mfld_step, LossKind, Objective, ParticleSystem, TrainConfig};
use rand::seq::SliceRandom;
use rand::Rng;

fn circles_cfg(seed: u64) -> TrainConfig {
    TrainConfig {
        eta: 0.1,
        temperature: 0.01,
        l2: 0.1,
        epochs: 0,
        loss: LossKind::Logistic,
        seed,
        init_std: 1.0,
    }
}

fn coordinate_variance(sys: &ParticleSystem<f64>) -> f64 {
    let n = sys.len() as f64;
    (0..sys.width())
        .map(|c| {
            let mean = sys.particles().map(|p| p[c]).sum::<f64>() / n;
            sys.particles().map(|p| (p[c] - mean).powi(2)).sum::<f64>() / (n - 1.0)
        })
        .sum::<f64>()
        / sys.width() as f64
}

#[test]
fn permutation_invariance_of_outputs() {
    let sys = init_system::<f64>(64, 3, 10.0, &circles_cfg(1)).unwrap();
    let mut order: Vec<usize> = (0..64).collect();
    order.shuffle(&mut rng::stream(1, "perm", &[]));
    let shuffled = mfld_core::ensemble::select_particles(&sys, &order).unwrap();
    let mut r = rng::stream(2, "inputs", &[]);
    for _ in 0..200 {
        let z: Vec<f64> = (0..3).map(|_| r.random_range(-3.0..3.0)).collect();
        let diff = sys.eval(&z).unwrap() - shuffled.eval(&z).unwrap();
        assert!(diff.abs() <= 1e-10);
    }
}

#[test]
fn neuron_outputs_bounded_on_random_draws() {
    let mut r = rng::stream(3, "bounded", &[]);
    for _ in 0..10_000 {
        let d = r.random_range(1..6);
        let p: Vec<f64> = (0..d + 2)
            .map(|_| 20.0 * std_normal::<f64, _>(&mut r))
            .collect();
        let z: Vec<f64> = (0..d)
            .map(|_| 20.0 * std_normal::<f64, _>(&mut r))
            .collect();
        let scale = r.random_range(0.01..100.0);
        assert!(neuron_eval(&p, &z, scale).unwrap().abs() <= scale);
    }
}

#[test]
fn relabelled_particles_follow_identical_paths() {
    let data = gen_circles::<f64>(&CirclesParams {
        n: 60,
        ..Default::default()
    })
    .unwrap();
    let cfg = circles_cfg(4);
    let start = init_system::<f64>(16, 2, 10.0, &cfg).unwrap();
    let mut perm: Vec<usize> = (0..16).collect();
    perm.shuffle(&mut rng::stream(4, "perm", &[]));

    let identity: Vec<u64> = (0..16).collect();
    let permuted_keys: Vec<u64> = perm.iter().map(|&i| i as u64).collect();
    let mut plain = start.clone();
    let mut permuted = mfld_core::ensemble::select_particles(&start, &perm).unwrap();
    for k in 0..20 {
        plain = mfld_step_keyed(&plain, &data, &cfg, k, &identity).unwrap();
        permuted = mfld_step_keyed(&permuted, &data, &cfg, k, &permuted_keys).unwrap();
    }
    for (slot, &orig) in perm.iter().enumerate() {
        for (a, b) in permuted.particle(slot).iter().zip(plain.particle(orig)) {
            assert!((a - b).abs() <= 1e-10, "particle {orig}: {a} vs {b}");
        }
    }
}

#[test]
fn independent_seeds_give_uncorrelated_noise() {
    let cfg = TrainConfig {
        l2: 0.0,
        ..circles_cfg(10)
    };
    let zero = ParticleSystem::<f64>::new(2, 1.0, vec![0.0; 4 * 2500]).unwrap();
    let a = mfld_step(&zero, Objective::RegularizerOnly, &cfg, 0).unwrap();
    let b = mfld_step(
        &zero,
        Objective::RegularizerOnly,
        &TrainConfig { seed: 11, ..cfg },
        0,
    )
    .unwrap();
    let n = a.params().len() as f64;
    let var = cfg.noise_std().powi(2);
    let corr = a
        .params()
        .iter()
        .zip(b.params())
        .map(|(x, y)| x * y)
        .sum::<f64>()
        / n
        / var;
    assert!(corr.abs() < 4.0 / n.sqrt(), "corr {corr}");
}

#[test]
fn noise_increments_accumulate_linearly() {
    // F0 = 0 and l2 = 0: after K steps each coordinate moved by a sum of
    // K independent N(0, 2 lambda eta) draws.
    let cfg = TrainConfig {
        eta: 0.05,
        temperature: 0.02,
        l2: 0.0,
        ..circles_cfg(12)
    };
    let steps = 40;
    let mut sys = ParticleSystem::<f64>::new(2, 1.0, vec![0.0; 4 * 2000]).unwrap();
    for k in 0..steps {
        sys = mfld_step(&sys, Objective::RegularizerOnly, &cfg, k).unwrap();
    }
    let n = sys.params().len() as f64;
    let var = sys.params().iter().map(|v| v * v).sum::<f64>() / n;
    let want = 2.0 * cfg.temperature * cfg.eta * steps as f64;
    let se = want * (2.0 / n).sqrt();
    assert!(
        (var - want).abs() <= 3.0 * se,
        "variance {var}, expected {want} +- {se}"
    );
}

/// Scalar Euler-Maruyama for `dx = -2 l2 x dt + sqrt(2 lambda) dW`, written
/// out independently of the particle code.
fn scalar_ou_variance(lambda: f64, l2: f64, eta: f64, chains: usize, steps: usize) -> f64 {
    let mut r = rng::stream(99, "scalar-ou", &[]);
    let noise = (2.0 * lambda * eta).sqrt();
    let mut total = 0.0;
    for _ in 0..chains {
        let mut x: f64 = std_normal(&mut r);
        for _ in 0..steps {
            x = x - eta * 2.0 * l2 * x + noise * std_normal::<f64, _>(&mut r);
        }
        total += x * x;
    }
    total / chains as f64
}

#[test]
fn regularizer_only_dynamics_reach_ou_stationary_law() {
    let (lambda, l2, eta) = (0.01, 0.1, 0.01);
    let cfg = TrainConfig {
        eta,
        temperature: lambda,
        l2,
        ..circles_cfg(13)
    };
    let mut sys = init_system::<f64>(1000, 2, 1.0, &cfg).unwrap();
    for k in 0..8000 {
        sys = mfld_step(&sys, Objective::RegularizerOnly, &cfg, k).unwrap();
    }
    let var = coordinate_variance(&sys);
    let oracle = scalar_ou_variance(lambda, l2, eta, 4000, 8000);
    let target = lambda / (2.0 * l2);
    assert!((var / target - 1.0).abs() < 0.1, "particles: {var}");
    assert!((oracle / target - 1.0).abs() < 0.1, "oracle: {oracle}");
    // both estimate the same discrete law; 4000 samples each give ~2.2% error
    assert!((var / oracle - 1.0).abs() < 0.1, "{var} vs {oracle}");
}

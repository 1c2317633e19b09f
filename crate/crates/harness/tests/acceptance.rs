//! Acceptance suite: one `[PASS]`/`[FAIL]` line per criterion.
//!
//! Runs as a plain binary (`cargo test --test acceptance`). Criteria listed
//! in `KNOWN_FAILURES` are evaluated and reported like the others, with
//! their real verdict; only unexpected failures make the process exit
//! non-zero.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use mfld_core::data::DatasetMeta;
use mfld_core::lora::{lora_gradient, lora_objective};
use mfld_core::mfnn::{empirical_risk, first_variation_grad};
use mfld_core::rng::{self, std_normal};
use mfld_core::{
    lora_merge, merge, prune_random, Dataset64, LoraAdapter, LossKind, ParticleSystem64,
};
use mfld_harness::experiments::{
    fit, run_lambda_sweep, run_lora_merge, run_merge_heatmap, run_stationary_check, task_datasets,
};
use mfld_harness::{Experiment, ExperimentConfig, MetricKind, MetricRecord};
use ndarray::Array2;
use rand::Rng;

/// Criteria that fail at the pinned settings; see the README.
const KNOWN_FAILURES: &[&str] = &["C5"];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff = analytic
        .iter()
        .zip(numeric)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale = numeric.iter().map(|b| b * b).sum::<f64>().sqrt();
    diff / scale.max(1e-12)
}

fn central_diff(params: &[f64], idx: usize, f: &dyn Fn(&[f64]) -> f64) -> f64 {
    const STEP: f64 = 1e-6;
    let mut up = params.to_vec();
    let mut down = params.to_vec();
    up[idx] += STEP;
    down[idx] -= STEP;
    (f(&up) - f(&down)) / (2.0 * STEP)
}

fn c1_gradients() -> Verdict {
    let mut worst_mfnn: f64 = 0.0;
    for kind in [LossKind::Logistic, LossKind::SquaredError] {
        for case in 0..20u64 {
            let mut r = rng::stream(case, "acceptance-grad", &[kind as u64]);
            let d = r.random_range(1..=4);
            let n_particles = r.random_range(1..=8);
            let n = r.random_range(1..=10);
            let scale = r.random_range(0.5..10.0);
            let l2 = r.random_range(0.0..0.5);
            let params: Vec<f64> = (0..n_particles * (d + 2))
                .map(|_| std_normal(&mut r))
                .collect();
            let inputs: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| std_normal(&mut r)).collect())
                .collect();
            let labels: Vec<f64> = (0..n)
                .map(|_| match kind {
                    LossKind::Logistic => {
                        if r.random::<bool>() {
                            1.0
                        } else {
                            -1.0
                        }
                    }
                    LossKind::SquaredError => 3.0 * std_normal::<f64, _>(&mut r),
                })
                .collect();
            let data = Dataset64::new(inputs, labels, DatasetMeta::default()).unwrap();
            let sys = ParticleSystem64::new(d, scale, params.clone()).unwrap();
            // N * F(rho_x), whose partial derivative in particle i is the
            // first variation evaluated at x_i
            let objective = |p: &[f64]| {
                let s = ParticleSystem64::new(d, scale, p.to_vec()).unwrap();
                let reg = p.iter().map(|v| v * v).sum::<f64>() * l2 / n_particles as f64;
                n_particles as f64 * (empirical_risk(&s, &data, kind).unwrap() + reg)
            };
            for i in 0..n_particles {
                let analytic = first_variation_grad(&sys, &data, kind, l2, i).unwrap();
                let numeric: Vec<f64> = (0..d + 2)
                    .map(|c| central_diff(&params, i * (d + 2) + c, &objective))
                    .collect();
                worst_mfnn = worst_mfnn.max(rel_err(&analytic, &numeric));
            }
        }
    }

    let mut worst_lora: f64 = 0.0;
    for case in 0..20u64 {
        let mut r = rng::stream(case, "acceptance-lora-grad", &[]);
        let (k, d, rank, n) = (
            r.random_range(1..=4),
            r.random_range(1..=5),
            r.random_range(1..=4),
            r.random_range(1..=12),
        );
        let l2 = r.random_range(0.0..0.1);
        let mut gauss = |rows, cols| {
            Array2::from_shape_simple_fn((rows, cols), || std_normal::<f64, _>(&mut r))
        };
        let w0 = gauss(k, d);
        let a = gauss(rank, d);
        let b = gauss(k, rank);
        let z = gauss(n, d);
        let y = gauss(n, k);
        let data = Dataset64::with_vector_labels(
            z.rows().into_iter().map(|row| row.to_vec()).collect(),
            y.rows().into_iter().map(|row| row.to_vec()).collect(),
            DatasetMeta::default(),
        )
        .unwrap();
        let adapter = LoraAdapter::new(a.clone(), b.clone()).unwrap();
        let (ga, gb) = lora_gradient(&w0, &adapter, &data, l2).unwrap();
        let packed: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
        let objective = |p: &[f64]| {
            let a = Array2::from_shape_vec((rank, d), p[..rank * d].to_vec()).unwrap();
            let b = Array2::from_shape_vec((k, rank), p[rank * d..].to_vec()).unwrap();
            lora_objective(&w0, &LoraAdapter::new(a, b).unwrap(), &data, l2).unwrap()
        };
        let numeric: Vec<f64> = (0..packed.len())
            .map(|i| central_diff(&packed, i, &objective))
            .collect();
        let analytic: Vec<f64> = ga.iter().chain(gb.iter()).copied().collect();
        worst_lora = worst_lora.max(rel_err(&analytic, &numeric));
    }
    verdict(
        worst_mfnn <= 1e-5 && worst_lora <= 1e-5,
        format!(
            "worst relative error: network {worst_mfnn:.2e}, adapter {worst_lora:.2e} (limit 1e-5)"
        ),
    )
}

fn c2_merge_exactness() -> Verdict {
    let mut r = rng::stream(2, "acceptance-merge", &[]);
    let d = 3;
    let members: Vec<ParticleSystem64> = (0..4)
        .map(|_| {
            let p = (0..8 * (d + 2)).map(|_| std_normal(&mut r)).collect();
            ParticleSystem64::new(d, 10.0, p).unwrap()
        })
        .collect();
    let refs: Vec<&ParticleSystem64> = members.iter().collect();
    let merged = merge(&refs).unwrap();
    let mut worst_net: f64 = 0.0;
    for _ in 0..100 {
        let z: Vec<f64> = (0..d).map(|_| 2.0 * std_normal::<f64, _>(&mut r)).collect();
        let avg = members.iter().map(|m| m.eval(&z).unwrap()).sum::<f64>() / 4.0;
        worst_net = worst_net.max((merged.eval(&z).unwrap() - avg).abs());
    }

    let (m, rank, k, d) = (8, 32, 16, 16);
    let adapters: Vec<LoraAdapter<f64>> = (0..m)
        .map(|_| {
            let a = Array2::from_shape_simple_fn((rank, d), || std_normal::<f64, _>(&mut r));
            let b = Array2::from_shape_simple_fn((k, rank), || std_normal::<f64, _>(&mut r));
            LoraAdapter::new(a, b).unwrap()
        })
        .collect();
    let merged_delta = lora_merge(&adapters).unwrap();
    let mut worst_lora: f64 = 0.0;
    for row in 0..k {
        for col in 0..d {
            let mut total = 0.0;
            for ad in &adapters {
                let mut entry = 0.0;
                for i in 0..rank {
                    entry += ad.b[[row, i]] * ad.a[[i, col]];
                }
                total += ad.gamma * entry;
            }
            worst_lora = worst_lora.max((merged_delta[[row, col]] - total / m as f64).abs());
        }
    }
    verdict(
        worst_net <= 1e-12 && worst_lora <= 1e-12,
        format!("max deviation: network {worst_net:.1e}, adapter {worst_lora:.1e} (limit 1e-12)"),
    )
}

fn c3_stationary() -> Verdict {
    let mut cfg = ExperimentConfig::defaults(Experiment::StationaryCheck);
    cfg.lambda_list = vec![0.01];
    cfg.train.eta = 0.01;
    cfg.train.l2 = 0.1;
    cfg.stationary.particles = 1000;
    cfg.stationary.steps = 20_000;
    let records = run_stationary_check(&cfg).unwrap();
    let last = records
        .iter()
        .filter(|r| r.metric == MetricKind::Variance)
        .max_by_key(|r| r.epoch)
        .unwrap();
    let rel = last.value / 0.05 - 1.0;
    verdict(
        rel.abs() <= 0.10,
        format!(
            "variance after 20000 steps {:.5} vs 0.05 ({:+.2}%, limit 10%)",
            last.value,
            100.0 * rel
        ),
    )
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, var.sqrt())
}

fn c4_heatmap() -> Verdict {
    let cfg = ExperimentConfig::defaults(Experiment::MergeHeatmap);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let records = pool.install(|| run_merge_heatmap(&cfg)).unwrap();
    let mut cells: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for r in records
        .iter()
        .filter(|r| r.metric == MetricKind::SupNorm && r.repeat.is_some())
    {
        cells
            .entry((r.n.unwrap(), r.m.unwrap()))
            .or_default()
            .push(r.value);
    }
    let reps = cfg.subsample_repeats as f64;
    let stats: BTreeMap<(usize, usize), (f64, f64)> =
        cells.iter().map(|(k, v)| (*k, mean_sd(v))).collect();
    // `b` (the larger configuration) may exceed `a` by at most one pooled SE
    let non_increasing = |a: (usize, usize), b: (usize, usize)| {
        let ((ma, sa), (mb, sb)) = (stats[&a], stats[&b]);
        mb <= ma + (sa * sa / reps + sb * sb / reps).sqrt()
    };
    let mut violations = Vec::new();
    for &n in &cfg.n_list {
        for w in cfg.m_list.windows(2) {
            if !non_increasing((n, w[0]), (n, w[1])) {
                violations.push(format!("N={n}: M {}->{}", w[0], w[1]));
            }
        }
    }
    for &m in &cfg.m_list {
        for w in cfg.n_list.windows(2) {
            if !non_increasing((w[0], m), (w[1], m)) {
                violations.push(format!("M={m}: N {}->{}", w[0], w[1]));
            }
        }
    }
    let ratio = stats[&(50, 1)].0 / stats[&(200, 10)].0;
    verdict(
        violations.is_empty() && ratio >= 1.5,
        format!(
            "monotonicity violations: {}; corner ratio (50,1)/(200,10) = {ratio:.2} (need >= 1.5)",
            if violations.is_empty() {
                "none".to_string()
            } else {
                violations.join(", ")
            }
        ),
    )
}

fn lookup(records: &[MetricRecord], metric: MetricKind, n: usize, m: usize, lambda: f64) -> f64 {
    records
        .iter()
        .find(|r| {
            r.metric == metric && r.n == Some(n) && r.m == Some(m) && r.lambda == Some(lambda)
        })
        .unwrap()
        .value
}

fn c5_lambda_sweep() -> Verdict {
    let cfg = ExperimentConfig::defaults(Experiment::LambdaSweep);
    let records = run_lambda_sweep(&cfg).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for &n in &cfg.n_list {
        let hi = lookup(&records, MetricKind::Mse, n, 20, 1e-1);
        let lo = lookup(&records, MetricKind::Mse, n, 20, 1e-4);
        ok &= hi < lo;
        parts.push(format!("N={n}: {hi:.4} vs {lo:.4}"));
    }
    verdict(
        ok,
        format!("merged MSE lambda=1e-1 vs 1e-4: {}", parts.join("; ")),
    )
}

fn c6_lora() -> Verdict {
    let cfg = ExperimentConfig::defaults(Experiment::LoraMerge);
    let records = run_lora_merge(&cfg).unwrap();
    let get = |metric, t| {
        records
            .iter()
            .find(|r| r.metric == metric && r.repeat == Some(t))
            .unwrap()
            .value
    };
    let (mut jensen, mut wins) = (0, 0);
    for t in 0..cfg.lora.tasks {
        let merged = get(MetricKind::MergedMse, t);
        jensen += (merged <= get(MetricKind::MeanMemberMse, t) + 1e-9) as usize;
        wins += (merged < get(MetricKind::BestMemberMse, t)) as usize;
    }
    let tasks = cfg.lora.tasks;
    verdict(
        jensen == tasks && wins >= 7,
        format!("merged <= mean member in {jensen}/{tasks}; merged < best member in {wins}/{tasks} (need 10 and 7)"),
    )
}

fn c7_pruning() -> Verdict {
    let cfg = ExperimentConfig::defaults(Experiment::Train);
    let (train, test) = task_datasets(&cfg).unwrap();
    let net = fit(
        1000,
        cfg.scale,
        &train,
        &cfg.train.to_train_config(cfg.seed("prune-base", &[])),
    )
    .unwrap();
    let sizes = [10usize, 20, 40, 80];
    let draws = 400;
    let mut points = Vec::new();
    for &s in &sizes {
        let outputs: Vec<Vec<f64>> = (0..draws)
            .map(|t| {
                prune_random(&net, s, cfg.seed("prune-draw", &[s as u64, t]))
                    .unwrap()
                    .predict(&test)
                    .unwrap()
            })
            .collect();
        let per_input: Vec<f64> = (0..test.len())
            .map(|j| {
                mean_sd(&outputs.iter().map(|o| o[j]).collect::<Vec<_>>())
                    .1
                    .powi(2)
            })
            .collect();
        let var = per_input.iter().sum::<f64>() / per_input.len() as f64;
        points.push(((s as f64).ln(), var.ln()));
    }
    let (mx, my) = (
        points.iter().map(|p| p.0).sum::<f64>() / 4.0,
        points.iter().map(|p| p.1).sum::<f64>() / 4.0,
    );
    let slope = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / points.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    verdict(
        (-1.3..=-0.7).contains(&slope),
        format!("slope of ln var vs ln s = {slope:.3} (need [-1.3, -0.7])"),
    )
}

fn run_cli(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_mfld"))
        .args(args)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn csv_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("csv") | Some("svg")
            )
        })
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect()
}

fn c8_determinism() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    // reduced sizes: determinism does not depend on scale
    let configs: [(&str, &str); 6] = [
        ("gen-data", "{}"),
        ("train", r#"{"n_particles": 50, "train": {"epochs": 20}}"#),
        (
            "heatmap",
            r#"{"n_inf": 200, "n_list": [20, 40], "m_max": 4, "m_list": [1, 2, 4], "subsample_repeats": 5, "train": {"epochs": 20}}"#,
        ),
        (
            "lambda-sweep",
            r#"{"n_list": [20, 40], "m_max": 4, "m_list": [2, 4]}"#,
        ),
        (
            "stationary",
            r#"{"stationary": {"particles": 100, "steps": 300, "record_every": 100}}"#,
        ),
        (
            "lora",
            r#"{"lora": {"tasks": 3, "members": 3, "epochs": 20}}"#,
        ),
    ];
    let mut failures = Vec::new();
    for (cmd, json) in configs {
        let cfg = root.join(format!("{cmd}.json"));
        fs::write(&cfg, json).unwrap();
        let dirs = [
            root.join(format!("{cmd}-t1")),
            root.join(format!("{cmd}-t8")),
            root.join(format!("{cmd}-rerun")),
        ];
        let d = |i: usize| dirs[i].to_str().unwrap().to_string();
        let manifest = dirs[0].join("manifest.json");
        let ok = run_cli(&[
            cmd,
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            &d(0),
            "--threads",
            "1",
        ]) && run_cli(&[
            cmd,
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            &d(1),
            "--threads",
            "8",
        ]) && run_cli(&[cmd, "--config", manifest.to_str().unwrap(), "--out", &d(2)]);
        if !ok {
            failures.push(format!("{cmd}: command failed"));
            continue;
        }
        let base = csv_files(&dirs[0]);
        if base.is_empty() || csv_files(&dirs[1]) != base || csv_files(&dirs[2]) != base {
            failures.push(format!("{cmd}: outputs differ"));
        }
    }
    verdict(
        failures.is_empty(),
        if failures.is_empty() {
            "6 commands: --threads 1, --threads 8 and manifest re-run give identical files"
                .to_string()
        } else {
            failures.join("; ")
        },
    )
}

/// Id, name, runtime limit, check.
type Criterion = (&'static str, &'static str, Duration, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 8] = [
        (
            "C1",
            "gradient correctness",
            Duration::from_secs(10),
            c1_gradients,
        ),
        (
            "C2",
            "merge exactness",
            Duration::from_secs(5),
            c2_merge_exactness,
        ),
        (
            "C3",
            "noise calibration and stationarity",
            Duration::from_secs(60),
            c3_stationary,
        ),
        ("C4", "heatmap trend", Duration::from_secs(600), c4_heatmap),
        (
            "C5",
            "lambda-sweep ordering",
            Duration::from_secs(300),
            c5_lambda_sweep,
        ),
        (
            "C6",
            "low-rank merge: Jensen and improvement",
            Duration::from_secs(120),
            c6_lora,
        ),
        (
            "C7",
            "pruning variance slope",
            Duration::from_secs(60),
            c7_pruning,
        ),
        (
            "C8",
            "determinism",
            Duration::from_secs(600),
            c8_determinism,
        ),
    ];
    let mut unexpected = Vec::new();
    for (id, name, limit, check) in criteria {
        let start = Instant::now();
        let v = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= limit;
        let pass = v.pass && in_time;
        let known = KNOWN_FAILURES.contains(&id);
        let note = match (pass, known) {
            (false, true) => " (known failure)",
            (true, true) => " (listed as a known failure but passed)",
            _ => "",
        };
        println!(
            "[{}] {id} {name}: {}; {:.1} s (limit {} s){}{note}",
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            elapsed.as_secs_f64(),
            limit.as_secs(),
            if in_time { "" } else { " TIME LIMIT EXCEEDED" },
        );
        if !pass && !known {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        println!("unexpected failures: {}", unexpected.join(", "));
        std::process::exit(1);
    }
}

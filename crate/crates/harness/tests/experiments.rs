//! Properties of the experiment runners on small configurations.

use mfld_harness::experiments::{
    run_lambda_sweep, run_lora_merge, run_merge_heatmap, run_stationary_check,
};
use mfld_harness::{Experiment, ExperimentConfig, MetricKind, MetricRecord};

fn small_heatmap() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::defaults(Experiment::MergeHeatmap);
    cfg.n_inf = 80;
    cfg.n_list = vec![10, 20];
    cfg.m_max = 3;
    cfg.m_list = vec![1, 2, 3];
    cfg.subsample_repeats = 4;
    cfg.train.epochs = 10;
    cfg
}

fn values(records: &[MetricRecord], metric: MetricKind) -> impl Iterator<Item = &MetricRecord> {
    records.iter().filter(move |r| r.metric == metric)
}

#[test]
fn full_pool_repeats_are_identical() {
    let cfg = small_heatmap();
    let records = run_merge_heatmap(&cfg).unwrap();
    for n in [10, 20] {
        let reps: Vec<f64> = values(&records, MetricKind::SupNorm)
            .filter(|r| r.n == Some(n) && r.m == Some(3) && r.repeat.is_some())
            .map(|r| r.value)
            .collect();
        assert_eq!(reps.len(), 4);
        assert!(reps.iter().all(|v| *v == reps[0]));
    }
}

#[test]
fn heatmap_aggregates_match_repeats() {
    let records = run_merge_heatmap(&small_heatmap()).unwrap();
    for agg in values(&records, MetricKind::SupNorm).filter(|r| r.repeat.is_none()) {
        let reps: Vec<f64> = values(&records, MetricKind::SupNorm)
            .filter(|r| r.n == agg.n && r.m == agg.m && r.repeat.is_some())
            .map(|r| r.value)
            .collect();
        let mean = reps.iter().sum::<f64>() / reps.len() as f64;
        assert!((agg.value - mean).abs() <= 1e-15 * mean);
        let log = values(&records, MetricKind::LogSupNorm)
            .find(|r| r.n == agg.n && r.m == agg.m)
            .unwrap();
        assert_eq!(log.value, mean.ln());
        let mean_log = values(&records, MetricKind::MeanLogSupNorm)
            .find(|r| r.n == agg.n && r.m == agg.m)
            .unwrap();
        // Jensen: mean of logs never exceeds log of the mean
        assert!(mean_log.value <= log.value + 1e-12);
    }
}

#[test]
fn heatmap_cells_do_not_depend_on_the_grid() {
    // a cell's subsets come from its own (N, M, repeat) stream
    let full = run_merge_heatmap(&small_heatmap()).unwrap();
    let mut cfg = small_heatmap();
    cfg.m_list = vec![2];
    let part = run_merge_heatmap(&cfg).unwrap();
    for r in part.iter().filter(|r| r.metric == MetricKind::SupNorm) {
        let twin = full.iter().find(|f| f.key() == r.key()).unwrap();
        assert_eq!(twin.value, r.value);
    }
}

#[test]
fn stationary_variance_scales_with_temperature() {
    let mut cfg = ExperimentConfig::defaults(Experiment::StationaryCheck);
    cfg.stationary.particles = 500;
    cfg.stationary.steps = 6000;
    cfg.stationary.record_every = 3000;
    let records = run_stationary_check(&cfg).unwrap();
    let plateau = |lambda: f64| {
        values(&records, MetricKind::Variance)
            .filter(|r| r.lambda == Some(lambda))
            .max_by_key(|r| r.epoch)
            .unwrap()
            .value
    };
    // pure contraction: x_k = (1 - 2 eta l2)^k x_0 with unit initial variance
    let contraction = (1.0f64 - 2.0 * 0.01 * 0.1).powi(2 * 6000);
    assert!(
        plateau(0.0) < 1.5 * contraction,
        "{} vs {contraction}",
        plateau(0.0)
    );
    let ratio = plateau(0.02) / plateau(0.01);
    assert!((ratio / 2.0 - 1.0).abs() < 0.1, "ratio {ratio}");
    for r in values(&records, MetricKind::TargetVariance) {
        assert_eq!(r.value, r.lambda.unwrap() / 0.2);
    }
    assert!((plateau(0.01) / 0.05 - 1.0).abs() < 0.1);
}

#[test]
fn lambda_sweep_records_every_epoch() {
    let mut cfg = ExperimentConfig::defaults(Experiment::LambdaSweep);
    cfg.n_list = vec![10];
    cfg.m_max = 3;
    cfg.m_list = vec![1, 3];
    cfg.lambda_list = vec![0.1, 1e-4];
    let records = run_lambda_sweep(&cfg).unwrap();
    assert_eq!(values(&records, MetricKind::LnMse).count(), 2 * 5);
    assert_eq!(values(&records, MetricKind::Mse).count(), 2 * 2);
    assert_eq!(values(&records, MetricKind::MeanMemberMse).count(), 2);
    for lambda in [0.1, 1e-4] {
        let ln5 = values(&records, MetricKind::LnMse)
            .find(|r| r.lambda == Some(lambda) && r.epoch == Some(5))
            .unwrap();
        assert!(ln5.value.is_finite());
    }
}

#[test]
fn lora_merge_respects_jensen() {
    let mut cfg = ExperimentConfig::defaults(Experiment::LoraMerge);
    cfg.lora.tasks = 3;
    cfg.lora.members = 4;
    cfg.lora.epochs = 30;
    let records = run_lora_merge(&cfg).unwrap();
    for t in 0..3 {
        let get = |m| {
            values(&records, m)
                .find(|r| r.repeat == Some(t))
                .unwrap()
                .value
        };
        assert!(get(MetricKind::MergedMse) <= get(MetricKind::MeanMemberMse) + 1e-9);
        assert!(get(MetricKind::BestMemberMse) <= get(MetricKind::MeanMemberMse));
    }
}

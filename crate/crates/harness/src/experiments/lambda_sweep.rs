use mfld_core::ensemble::merge;
use mfld_core::mfnn::empirical_risk;
use mfld_core::{init_system, train, LossKind, ParticleSystem64};
use rayon::prelude::*;

use super::{mean, task_datasets};
use crate::config::ExperimentConfig;
use crate::error::{Context, Result};
use crate::records::{MetricKind, MetricRecord};

/// Short training runs at several temperatures.
///
/// For each `lambda` and `N`, trains `m_max` networks and records the
/// per-epoch `ln_mse` (test `ln(MSE)` averaged over the networks), the final
/// `mean_member_mse`, and the test `mse` of the merge of the first `M`
/// networks for every `M` in `m_list`. Member seeds depend on `(N, j)`
/// only, so every temperature starts from the same initializations.
pub fn run_lambda_sweep(cfg: &ExperimentConfig) -> Result<Vec<MetricRecord>> {
    cfg.validate()?;
    let exp = cfg.experiment.slug();
    let (train_set, test) = task_datasets(cfg)?;
    let mut records = Vec::new();
    for &lambda in &cfg.lambda_list {
        for &n in &cfg.n_list {
            let runs: Vec<(ParticleSystem64, Vec<f64>)> = (0..cfg.m_max)
                .into_par_iter()
                .map(|j| {
                    let mut tcfg = cfg
                        .train
                        .to_train_config(cfg.seed("member", &[n as u64, j as u64]));
                    tcfg.temperature = lambda;
                    let init = init_system(n, train_set.input_dim(), cfg.scale, &tcfg)?;
                    let (net, traj) = train(&init, &train_set, Some(&test), &tcfg)?;
                    let losses = traj
                        .iter()
                        .map(|e| e.test_loss.expect("test set given"))
                        .collect();
                    Ok((net, losses))
                })
                .collect::<Result<_>>()
                .context(|| format!("lambda = {lambda}, N = {n}"))?;

            for epoch in 1..=cfg.train.epochs {
                let logs: Vec<f64> = runs.iter().map(|(_, l)| l[epoch - 1].ln()).collect();
                records.push(
                    MetricRecord::new(exp, MetricKind::LnMse, mean(&logs))
                        .n(n)
                        .lambda(lambda)
                        .epoch(epoch),
                );
            }
            let finals: Vec<f64> = runs
                .iter()
                .map(|(net, _)| empirical_risk(net, &test, LossKind::SquaredError))
                .collect::<mfld_core::Result<_>>()?;
            records.push(
                MetricRecord::new(exp, MetricKind::MeanMemberMse, mean(&finals))
                    .n(n)
                    .lambda(lambda),
            );
            for &m in &cfg.m_list {
                let chosen: Vec<&ParticleSystem64> = runs[..m].iter().map(|(net, _)| net).collect();
                let merged = merge(&chosen)?;
                let mse = empirical_risk(&merged, &test, LossKind::SquaredError)?;
                records.push(
                    MetricRecord::new(exp, MetricKind::Mse, mse)
                        .n(n)
                        .m(m)
                        .lambda(lambda),
                );
            }
            log::info!("lambda = {lambda}, N = {n} done");
        }
    }
    Ok(records)
}

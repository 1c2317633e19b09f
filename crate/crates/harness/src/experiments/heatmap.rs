use mfld_core::ensemble::merge;
use mfld_core::mfnn::{classification_accuracy, empirical_risk};
use mfld_core::{rng, LossKind, ParticleSystem64};
use rand::seq::index;
use rayon::prelude::*;

use super::{fit, mean, task_datasets};
use crate::config::ExperimentConfig;
use crate::error::{Context, Result};
use crate::records::{MetricKind, MetricRecord};

/// Sup-norm distance between merged ensembles and a wide reference network
/// over a grid of member widths `N` and ensemble sizes `M`.
///
/// Per cell, records every repeat's `sup_norm` plus the aggregates
/// `sup_norm` (mean), `log_sup_norm` (log of the mean) and
/// `mean_log_sup_norm` (mean of the logs). The reference network's test
/// accuracy (classification) or MSE (regression) is recorded under
/// `N = n_inf`.
pub fn run_merge_heatmap(cfg: &ExperimentConfig) -> Result<Vec<MetricRecord>> {
    cfg.validate()?;
    let exp = cfg.experiment.slug();
    let (train, test) = task_datasets(cfg)?;

    let ref_cfg = cfg.train.to_train_config(cfg.seed("reference", &[]));
    let reference = fit(cfg.n_inf, cfg.scale, &train, &ref_cfg)
        .context(|| format!("reference network (N = {})", cfg.n_inf))?;
    let y_inf = reference.predict(&test)?;
    log::info!("trained reference network with {} particles", cfg.n_inf);

    let units: Vec<(usize, usize)> = cfg
        .n_list
        .iter()
        .flat_map(|&n| (0..cfg.m_max).map(move |j| (n, j)))
        .collect();
    let pool: Vec<ParticleSystem64> = units
        .par_iter()
        .map(|&(n, j)| {
            let tcfg = cfg
                .train
                .to_train_config(cfg.seed("member", &[n as u64, j as u64]));
            fit(n, cfg.scale, &train, &tcfg).context(|| format!("N = {n}, member {j}"))
        })
        .collect::<Result<_>>()?;
    log::info!("trained {} pool members", pool.len());

    let mut records = Vec::new();
    let reference_metric = match cfg.train.loss {
        LossKind::Logistic => (
            MetricKind::Accuracy,
            classification_accuracy(&reference, &test)?,
        ),
        LossKind::SquaredError => (
            MetricKind::Mse,
            empirical_risk(&reference, &test, LossKind::SquaredError)?,
        ),
    };
    records.push(MetricRecord::new(exp, reference_metric.0, reference_metric.1).n(cfg.n_inf));

    for (ni, &n) in cfg.n_list.iter().enumerate() {
        let members = &pool[ni * cfg.m_max..(ni + 1) * cfg.m_max];
        for &m in &cfg.m_list {
            let sups: Vec<f64> = (0..cfg.subsample_repeats)
                .into_par_iter()
                .map(|r| {
                    let mut stream =
                        rng::stream(cfg.master_seed, "subset", &[n as u64, m as u64, r as u64]);
                    let mut picked = index::sample(&mut stream, cfg.m_max, m).into_vec();
                    picked.sort_unstable();
                    let chosen: Vec<&ParticleSystem64> =
                        picked.iter().map(|&i| &members[i]).collect();
                    let merged = merge(&chosen)?;
                    let y = merged.predict(&test)?;
                    Ok(y.iter()
                        .zip(&y_inf)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max))
                })
                .collect::<Result<_>>()
                .context(|| format!("merging N = {n}, M = {m}"))?;
            for (r, &s) in sups.iter().enumerate() {
                records.push(
                    MetricRecord::new(exp, MetricKind::SupNorm, s)
                        .n(n)
                        .m(m)
                        .repeat(r),
                );
            }
            let avg = mean(&sups);
            let logs: Vec<f64> = sups.iter().map(|s| s.ln()).collect();
            records.push(MetricRecord::new(exp, MetricKind::SupNorm, avg).n(n).m(m));
            records.push(
                MetricRecord::new(exp, MetricKind::LogSupNorm, avg.ln())
                    .n(n)
                    .m(m),
            );
            records.push(
                MetricRecord::new(exp, MetricKind::MeanLogSupNorm, mean(&logs))
                    .n(n)
                    .m(m),
            );
        }
    }
    Ok(records)
}

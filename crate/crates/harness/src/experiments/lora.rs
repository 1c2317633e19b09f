use mfld_core::ensemble::LoraAdapter;
use mfld_core::lora::{evaluate, finetune, gen_lowrank_task};
use mfld_core::lora_merge;
use ndarray::Array2;
use rayon::prelude::*;

use super::mean;
use crate::config::{ExperimentConfig, TaskConfig};
use crate::error::{Context, HarnessError, Result};
use crate::records::{MetricKind, MetricRecord};

pub struct LoraOutcome {
    pub records: Vec<MetricRecord>,
    /// Merged update of task 0 at the first temperature.
    pub example_delta: Array2<f64>,
}

/// Synthetic low-rank fine-tuning: per temperature and task, trains
/// `members` adapters with noisy AdamW and records the mean and best member
/// test MSE and the test MSE of the merged update (`repeat` = task index).
pub fn lora_experiment(cfg: &ExperimentConfig) -> Result<LoraOutcome> {
    cfg.validate()?;
    let TaskConfig::LowRank {
        k,
        d,
        rank,
        n,
        noise_std,
    } = cfg.task
    else {
        return Err(HarnessError::config(
            "the lora experiment needs a low_rank task",
        ));
    };
    let exp = cfg.experiment.slug();
    let l = &cfg.lora;
    let mut records = Vec::new();
    let mut example_delta = None;
    for &lambda in &cfg.lambda_list {
        let per_task: Vec<(f64, f64, f64, Array2<f64>)> = (0..l.tasks)
            .into_par_iter()
            .map(|t| {
                let (task, data) = gen_lowrank_task::<f64>(
                    k,
                    d,
                    rank,
                    n,
                    noise_std,
                    cfg.seed("lora-task", &[t as u64]),
                )?;
                let (train, test) =
                    data.split(cfg.train_frac, cfg.seed("lora-split", &[t as u64]))?;
                let adapters: Vec<LoraAdapter<f64>> = (0..l.members)
                    .into_par_iter()
                    .map(|j| {
                        let tcfg = l.to_train_config(
                            lambda,
                            cfg.seed("lora-member", &[t as u64, j as u64]),
                        );
                        finetune(&task, &train, l.rank, &tcfg)
                    })
                    .collect::<mfld_core::Result<_>>()?;
                let member_mse: Vec<f64> = adapters
                    .iter()
                    .map(|a| evaluate(&task.w0, &a.delta(), &test))
                    .collect::<mfld_core::Result<_>>()?;
                let merged = lora_merge(&adapters)?;
                let merged_mse = evaluate(&task.w0, &merged, &test)?;
                let best = member_mse.iter().copied().fold(f64::INFINITY, f64::min);
                Ok((mean(&member_mse), best, merged_mse, merged))
            })
            .collect::<Result<_>>()
            .context(|| format!("lora lambda = {lambda}"))?;
        for (t, (avg, best, merged, delta)) in per_task.into_iter().enumerate() {
            let rec = |kind, v| {
                MetricRecord::new(exp, kind, v)
                    .n(l.rank)
                    .m(l.members)
                    .lambda(lambda)
                    .repeat(t)
            };
            records.push(rec(MetricKind::MeanMemberMse, avg));
            records.push(rec(MetricKind::BestMemberMse, best));
            records.push(rec(MetricKind::MergedMse, merged));
            if example_delta.is_none() {
                example_delta = Some(delta);
            }
        }
        log::info!("lora lambda = {lambda} done");
    }
    Ok(LoraOutcome {
        records,
        example_delta: example_delta.expect("validated lists are non-empty"),
    })
}

pub fn run_lora_merge(cfg: &ExperimentConfig) -> Result<Vec<MetricRecord>> {
    Ok(lora_experiment(cfg)?.records)
}

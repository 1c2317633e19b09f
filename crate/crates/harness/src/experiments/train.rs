use mfld_core::ensemble::{merge, prune_random};
use mfld_core::mfnn::{classification_accuracy, empirical_risk};
use mfld_core::{init_system, train, Dataset64, LossKind, ParticleSystem64};

use super::task_datasets;
use crate::checkpoint::read_checkpoint;
use crate::config::ExperimentConfig;
use crate::error::{Context, Result};
use crate::records::{MetricKind, MetricRecord};

pub fn run_gen_data(cfg: &ExperimentConfig) -> Result<(Dataset64, Dataset64)> {
    cfg.validate()?;
    task_datasets(cfg)
}

pub struct TrainOutcome {
    pub network: ParticleSystem64,
    /// Per-epoch `train_loss` / `test_loss`, then the final test accuracy
    /// (classification) or MSE (regression).
    pub records: Vec<MetricRecord>,
}

/// Trains a single `n_particles` network on the configured task.
pub fn run_train(cfg: &ExperimentConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let exp = cfg.experiment.slug();
    let (train_set, test) = task_datasets(cfg)?;
    let tcfg = cfg.train.to_train_config(cfg.seed("train", &[]));
    let init = init_system(cfg.n_particles, train_set.input_dim(), cfg.scale, &tcfg)?;
    let (network, trajectory) = train(&init, &train_set, Some(&test), &tcfg)?;
    let n = cfg.n_particles;
    let mut records = Vec::new();
    for e in &trajectory {
        records.push(
            MetricRecord::new(exp, MetricKind::TrainLoss, e.train_loss)
                .n(n)
                .epoch(e.epoch),
        );
        if let Some(t) = e.test_loss {
            records.push(
                MetricRecord::new(exp, MetricKind::TestLoss, t)
                    .n(n)
                    .epoch(e.epoch),
            );
        }
    }
    let last = match cfg.train.loss {
        LossKind::Logistic => (
            MetricKind::Accuracy,
            classification_accuracy(&network, &test)?,
        ),
        LossKind::SquaredError => (
            MetricKind::Mse,
            empirical_risk(&network, &test, LossKind::SquaredError)?,
        ),
    };
    records.push(MetricRecord::new(exp, last.0, last.1).n(n));
    Ok(TrainOutcome { network, records })
}

/// Concatenates the particles of every configured checkpoint.
pub fn run_merge(cfg: &ExperimentConfig) -> Result<ParticleSystem64> {
    cfg.validate()?;
    let systems: Vec<ParticleSystem64> = cfg
        .checkpoints
        .iter()
        .map(|p| read_checkpoint(p).context(|| format!("loading {}", p.display())))
        .collect::<Result<_>>()?;
    let refs: Vec<&ParticleSystem64> = systems.iter().collect();
    Ok(merge(&refs)?.with_provenance(format!("merge of {} checkpoints", systems.len())))
}

/// Keeps `keep` particles of the configured checkpoint, chosen uniformly
/// without replacement with the `prune` seed.
pub fn run_prune(cfg: &ExperimentConfig) -> Result<ParticleSystem64> {
    cfg.validate()?;
    let path = &cfg.checkpoints[0];
    let system = read_checkpoint(path).context(|| format!("loading {}", path.display()))?;
    let pruned = prune_random(&system, cfg.keep, cfg.seed("prune", &[]))?;
    Ok(pruned.with_provenance(format!("random prune to {} of {}", cfg.keep, system.len())))
}

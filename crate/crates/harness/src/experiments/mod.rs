//! Experiment runners. Every random quantity is drawn from a stream
//! derived from the master seed, a purpose tag and the unit's indices, so
//! units can run in any order or in parallel with identical results.

mod heatmap;
mod lambda_sweep;
mod lora;
mod stationary;
mod train;

pub use heatmap::run_merge_heatmap;
pub use lambda_sweep::run_lambda_sweep;
pub use lora::{lora_experiment, run_lora_merge, LoraOutcome};
pub use stationary::{coordinate_variance, run_stationary_check};
pub use train::{run_gen_data, run_merge, run_prune, run_train, TrainOutcome};

use mfld_core::data::gen_circles;
use mfld_core::data::gen_multi_index;
use mfld_core::lora::gen_lowrank_task;
use mfld_core::{init_system, mfld_step, Dataset64, ParticleSystem64, TrainConfig};

use crate::config::{ExperimentConfig, TaskConfig};
use crate::error::Result;

/// Generates the configured task with the `data` seed and splits it with
/// the `split` seed.
pub fn task_datasets(cfg: &ExperimentConfig) -> Result<(Dataset64, Dataset64)> {
    let seed = cfg.seed("data", &[]);
    let full = match cfg.task {
        TaskConfig::Circles { .. } => {
            gen_circles(&cfg.task.circles_params(seed).expect("circles"))?
        }
        TaskConfig::MultiIndex { .. } => {
            gen_multi_index(&cfg.task.multi_index_params(seed).expect("multi-index"))?
        }
        TaskConfig::LowRank {
            k,
            d,
            rank,
            n,
            noise_std,
        } => gen_lowrank_task(k, d, rank, n, noise_std, seed)?.1,
    };
    Ok(full.split(cfg.train_frac, cfg.seed("split", &[]))?)
}

/// Initializes `n` particles and runs `tcfg.epochs` noisy gradient steps.
pub fn fit(n: usize, scale: f64, data: &Dataset64, tcfg: &TrainConfig) -> Result<ParticleSystem64> {
    tcfg.loss.check_labels(data)?;
    let mut system = init_system(n, data.input_dim(), scale, tcfg)?;
    for k in 0..tcfg.epochs {
        system = mfld_step(&system, data, tcfg, k as u64)?;
    }
    Ok(system.with_provenance(format!(
        "mfld seed={} epochs={} eta={} temperature={} l2={}",
        tcfg.seed, tcfg.epochs, tcfg.eta, tcfg.temperature, tcfg.l2
    )))
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

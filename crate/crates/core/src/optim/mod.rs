//! Training dynamics: discrete mean-field Langevin steps and noisy AdamW.

mod adamw;
mod mfld;

pub use adamw::{noisy_adamw_step, AdamWState};
pub use mfld::{
    init_system, mfld_step, mfld_step_keyed, train, EpochMetrics, Objective, TrainConfig,
};

//! Mean-field two-layer networks trained by noisy gradient descent
//! (discrete mean-field Langevin dynamics), with ensemble merging of
//! independently trained networks and of low-rank adapters.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the precision for the common cases.
//!
//! ```
//! use mfld_core::data::{gen_circles, CirclesParams};
//! use mfld_core::mfnn::classification_accuracy;
//! use mfld_core::{init_system, merge, train, Dataset64, TrainConfig};
//!
//! # fn main() -> mfld_core::Result<()> {
//! let data: Dataset64 = gen_circles(&CirclesParams::default())?;
//! let (train_set, test_set) = data.split(0.8, 7)?;
//!
//! let members = (0..4)
//!     .map(|seed| {
//!         let cfg = TrainConfig { seed, epochs: 50, ..TrainConfig::default() };
//!         let init = init_system(100, 2, 10.0, &cfg)?;
//!         Ok(train(&init, &train_set, Some(&test_set), &cfg)?.0)
//!     })
//!     .collect::<mfld_core::Result<Vec<_>>>()?;
//! let merged = merge(&members.iter().collect::<Vec<_>>())?;
//! assert_eq!(merged.len(), 400);
//! println!("accuracy {}", classification_accuracy(&merged, &test_set)?);
//! # Ok(())
//! # }
//! ```

pub mod data;
pub mod ensemble;
mod error;
pub mod lora;
pub mod mfnn;
pub mod optim;
pub mod rng;
mod scalar;
pub mod textfmt;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use data::{Dataset, DatasetMeta, SplitTag, TaskKind};
pub use ensemble::{lora_merge, merge, prune_random, LoraAdapter};
pub use mfnn::{LossKind, Particle, ParticleSystem};
pub use optim::{init_system, mfld_step, train, AdamWState, Objective, TrainConfig};

pub type Particle64 = Particle<f64>;
pub type ParticleSystem64 = ParticleSystem<f64>;
pub type Dataset64 = Dataset<f64>;
pub type LoraAdapter64 = LoraAdapter<f64>;
pub type LoraTask64 = lora::LoraTask<f64>;

pub type Particle32 = Particle<f32>;
pub type ParticleSystem32 = ParticleSystem<f32>;
pub type Dataset32 = Dataset<f32>;
pub type LoraAdapter32 = LoraAdapter<f32>;
pub type LoraTask32 = lora::LoraTask<f32>;

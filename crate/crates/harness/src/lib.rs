//! Experiment orchestration for `mfld-core`: configuration, the sup-norm
//! heatmap, temperature sweep, stationary-noise and low-rank merging
//! experiments, CSV/SVG/checkpoint output and the `mfld` command line.

pub mod checkpoint;
pub mod cli;
pub mod config;
mod error;
pub mod experiments;
pub mod records;
pub mod svg;

pub use cli::cli_main;
pub use config::{Experiment, ExperimentConfig, TaskConfig};
pub use error::{HarnessError, Result};
pub use records::{emit_csv, read_csv, MetricKind, MetricRecord};
pub use svg::emit_heatmap_svg;

//! Experiment configuration.
//!
//! A config file is a JSON object whose keys overlay the defaults of the
//! chosen experiment; unknown keys are rejected. The fully resolved config
//! is what `manifest.json` records, so a manifest is itself a valid config.

use std::fs;
use std::path::{Path, PathBuf};

use mfld_core::data::{CirclesParams, MultiIndexParams};
use mfld_core::lora::LoraTrainConfig;
use mfld_core::{rng, LossKind, TrainConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    GenData,
    Train,
    MergeHeatmap,
    LambdaSweep,
    StationaryCheck,
    LoraMerge,
    Merge,
    Prune,
}

impl Experiment {
    /// Name used in output file names and the `experiment` CSV column.
    pub fn slug(self) -> &'static str {
        match self {
            Experiment::GenData => "gen_data",
            Experiment::Train => "train",
            Experiment::MergeHeatmap => "heatmap",
            Experiment::LambdaSweep => "lambda_sweep",
            Experiment::StationaryCheck => "stationary",
            Experiment::LoraMerge => "lora",
            Experiment::Merge => "merge",
            Experiment::Prune => "prune",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskConfig {
    Circles {
        n: usize,
        r_inner: f64,
        r_outer: f64,
        noise_std: f64,
    },
    MultiIndex {
        n: usize,
        d: usize,
        k: usize,
        r: f64,
        label_scale: f64,
    },
    LowRank {
        k: usize,
        d: usize,
        rank: usize,
        n: usize,
        noise_std: f64,
    },
}

impl TaskConfig {
    pub fn circles() -> Self {
        TaskConfig::Circles {
            n: 200,
            r_inner: 1.0,
            r_outer: 2.0,
            noise_std: 0.1,
        }
    }

    pub fn multi_index() -> Self {
        TaskConfig::MultiIndex {
            n: 200,
            d: 20,
            k: 20,
            r: 5.0,
            label_scale: 10.0,
        }
    }

    pub fn low_rank() -> Self {
        TaskConfig::LowRank {
            k: 8,
            d: 32,
            rank: 2,
            n: 400,
            noise_std: 1.0,
        }
    }

    fn default_for_kind(kind: &str) -> Option<Self> {
        match kind {
            "circles" => Some(Self::circles()),
            "multi_index" => Some(Self::multi_index()),
            "low_rank" => Some(Self::low_rank()),
            _ => None,
        }
    }

    pub fn circles_params(&self, seed: u64) -> Option<CirclesParams> {
        match *self {
            TaskConfig::Circles {
                n,
                r_inner,
                r_outer,
                noise_std,
            } => Some(CirclesParams {
                n,
                r_inner,
                r_outer,
                noise_std,
                seed,
            }),
            _ => None,
        }
    }

    pub fn multi_index_params(&self, seed: u64) -> Option<MultiIndexParams> {
        match *self {
            TaskConfig::MultiIndex {
                n,
                d,
                k,
                r,
                label_scale,
            } => Some(MultiIndexParams {
                n,
                d,
                k,
                r,
                label_scale,
                seed,
            }),
            _ => None,
        }
    }
}

/// Noisy gradient descent settings; the seed is derived per network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSettings {
    pub eta: f64,
    pub temperature: f64,
    pub l2: f64,
    pub epochs: usize,
    pub loss: LossKind,
    pub init_std: f64,
}

impl TrainSettings {
    pub fn classification() -> Self {
        Self {
            eta: 0.1,
            temperature: 0.01,
            l2: 0.1,
            epochs: 200,
            loss: LossKind::Logistic,
            init_std: 1.0,
        }
    }

    pub fn regression() -> Self {
        Self {
            eta: 0.01,
            temperature: 0.01,
            l2: 0.1,
            epochs: 100,
            loss: LossKind::SquaredError,
            init_std: 1.0,
        }
    }

    pub fn to_train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            eta: self.eta,
            temperature: self.temperature,
            l2: self.l2,
            epochs: self.epochs,
            loss: self.loss,
            seed,
            init_std: self.init_std,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationarySettings {
    pub particles: usize,
    pub input_dim: usize,
    pub steps: usize,
    /// Variance is recorded every `record_every` steps and at the end.
    pub record_every: usize,
}

impl Default for StationarySettings {
    fn default() -> Self {
        Self {
            particles: 1000,
            input_dim: 2,
            steps: 20_000,
            record_every: 2_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoraSettings {
    /// Adapter rank `N`.
    pub rank: usize,
    /// Adapters merged per task, `M`.
    pub members: usize,
    /// Independent synthetic tasks.
    pub tasks: usize,
    pub lr: f64,
    pub epochs: usize,
    pub l2: f64,
    pub weight_decay: f64,
    pub init_std: f64,
}

impl Default for LoraSettings {
    fn default() -> Self {
        Self {
            rank: 32,
            members: 8,
            tasks: 10,
            lr: 0.01,
            epochs: 100,
            l2: 1e-4,
            weight_decay: 0.0,
            init_std: 3.0,
        }
    }
}

impl LoraSettings {
    pub fn to_train_config(&self, temperature: f64, seed: u64) -> LoraTrainConfig {
        LoraTrainConfig {
            lr: self.lr,
            temperature,
            weight_decay: self.weight_decay,
            l2: self.l2,
            epochs: self.epochs,
            init_std: self.init_std,
            seed,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub task: TaskConfig,
    pub train: TrainSettings,
    /// Output bound `R` of every neuron.
    pub scale: f64,
    pub train_frac: f64,
    /// Network size for the `train` subcommand.
    pub n_particles: usize,
    /// Size of the reference network approximating the mean-field limit.
    pub n_inf: usize,
    pub n_list: Vec<usize>,
    pub m_max: usize,
    /// Ensemble sizes evaluated; defaults to `1..=m_max`.
    pub m_list: Vec<usize>,
    pub subsample_repeats: usize,
    /// Temperatures swept by `lambda-sweep`, `stationary` and `lora`.
    pub lambda_list: Vec<f64>,
    pub stationary: StationarySettings,
    pub lora: LoraSettings,
    /// Input checkpoints of `merge` (several) and `prune` (one).
    pub checkpoints: Vec<PathBuf>,
    /// Particles kept by `prune`.
    pub keep: usize,
    pub output_dir: PathBuf,
    pub master_seed: u64,
}

impl ExperimentConfig {
    /// Desk-scale defaults for each experiment.
    pub fn defaults(experiment: Experiment) -> Self {
        let base = Self {
            experiment,
            task: TaskConfig::circles(),
            train: TrainSettings::classification(),
            scale: 10.0,
            train_frac: 0.8,
            n_particles: 200,
            n_inf: 2000,
            n_list: vec![50, 100, 200],
            m_max: 10,
            m_list: vec![1, 2, 5, 10],
            subsample_repeats: 20,
            lambda_list: vec![0.01],
            stationary: StationarySettings::default(),
            lora: LoraSettings::default(),
            checkpoints: Vec::new(),
            keep: 0,
            output_dir: PathBuf::from("out"),
            master_seed: 0,
        };
        match experiment {
            Experiment::GenData
            | Experiment::Train
            | Experiment::MergeHeatmap
            | Experiment::Merge
            | Experiment::Prune => base,
            Experiment::LambdaSweep => Self {
                task: TaskConfig::multi_index(),
                train: TrainSettings {
                    epochs: 5,
                    ..TrainSettings::regression()
                },
                n_list: vec![100, 200],
                m_max: 20,
                m_list: vec![20],
                lambda_list: vec![1e-1, 1e-2, 1e-3, 1e-4],
                ..base
            },
            Experiment::StationaryCheck => Self {
                train: TrainSettings::regression(),
                lambda_list: vec![0.0, 0.01, 0.02],
                ..base
            },
            // a small training split with a large held-out set: the adapters
            // are overparametrized and "best member" is not picked on noise
            Experiment::LoraMerge => Self {
                task: TaskConfig::low_rank(),
                train_frac: 0.2,
                lambda_list: vec![1e-5],
                ..base
            },
        }
    }

    /// Parses a JSON config for `experiment`, filling unspecified keys
    /// from [`ExperimentConfig::defaults`].
    pub fn from_json(text: &str, experiment: Experiment) -> Result<Self> {
        let user: Value = serde_json::from_str(text)
            .map_err(|e| HarnessError::config(format!("invalid JSON: {e}")))?;
        let Value::Object(user) = user else {
            return Err(HarnessError::config("config must be a JSON object"));
        };
        if let Some(v) = user.get("experiment") {
            let named: Experiment = serde_json::from_value(v.clone())
                .map_err(|e| HarnessError::config(format!("experiment: {e}")))?;
            if named != experiment {
                return Err(HarnessError::config(format!(
                    "config is for experiment `{}` but the command runs `{}`",
                    named.slug(),
                    experiment.slug()
                )));
            }
        }
        let mut merged =
            serde_json::to_value(Self::defaults(experiment)).expect("defaults serialize");
        overlay(&mut merged, &Value::Object(user), "")?;
        let cfg: Self =
            serde_json::from_value(merged).map_err(|e| HarnessError::config(e.to_string()))?;
        let cfg = cfg.fill_m_list();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, experiment: Experiment) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| {
            HarnessError::config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_json(&text, experiment)
            .map_err(|e| HarnessError::config(format!("{}: {e}", path.display())))
    }

    fn fill_m_list(mut self) -> Self {
        if self.m_list.is_empty() {
            self.m_list = (1..=self.m_max).collect();
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HarnessError::config(msg));
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return bad(format!("scale must be positive, got {}", self.scale));
        }
        if !(self.train_frac > 0.0 && self.train_frac < 1.0) {
            return bad(format!(
                "train_frac must lie in (0, 1), got {}",
                self.train_frac
            ));
        }
        self.train
            .to_train_config(0)
            .validate()
            .map_err(|e| HarnessError::config(e.to_string()))?;
        if self
            .lambda_list
            .iter()
            .any(|l| !(l.is_finite() && *l >= 0.0))
        {
            return bad("lambda_list entries must be finite and >= 0".into());
        }
        match self.experiment {
            Experiment::MergeHeatmap | Experiment::LambdaSweep => {
                if self.n_list.is_empty() || self.n_list.contains(&0) {
                    return bad("n_list must be non-empty with positive entries".into());
                }
                if self.m_max == 0 || self.subsample_repeats == 0 {
                    return bad("m_max and subsample_repeats must be positive".into());
                }
                if let Some(&m) = self.m_list.iter().find(|&&m| m == 0 || m > self.m_max) {
                    return bad(format!("m_list entry {m} is outside 1..={}", self.m_max));
                }
                let max_n = *self.n_list.iter().max().expect("non-empty");
                if self.experiment == Experiment::MergeHeatmap && self.n_inf < max_n {
                    return bad(format!(
                        "n_inf = {} must be at least max(n_list) = {max_n}",
                        self.n_inf
                    ));
                }
                if self.experiment == Experiment::LambdaSweep && self.lambda_list.is_empty() {
                    return bad("lambda_list must not be empty".into());
                }
            }
            Experiment::StationaryCheck => {
                let s = &self.stationary;
                if s.particles == 0 || s.input_dim == 0 || s.record_every == 0 {
                    return bad("stationary sizes must be positive".into());
                }
                if self.lambda_list.is_empty() {
                    return bad("lambda_list must not be empty".into());
                }
            }
            Experiment::LoraMerge => {
                let l = &self.lora;
                if l.rank == 0 || l.members == 0 || l.tasks == 0 {
                    return bad("lora rank, members and tasks must be positive".into());
                }
                if !matches!(self.task, TaskConfig::LowRank { .. }) {
                    return bad("the lora experiment needs a low_rank task".into());
                }
                if self.lambda_list.is_empty() {
                    return bad("lambda_list must not be empty".into());
                }
            }
            Experiment::Train => {
                if self.n_particles == 0 {
                    return bad("n_particles must be positive".into());
                }
            }
            Experiment::GenData => {}
            Experiment::Merge => {
                if self.checkpoints.is_empty() {
                    return bad("merge needs at least one checkpoint".into());
                }
            }
            Experiment::Prune => {
                if self.checkpoints.len() != 1 {
                    return bad(format!(
                        "prune needs exactly one checkpoint, got {}",
                        self.checkpoints.len()
                    ));
                }
                if self.keep == 0 {
                    return bad("prune needs a positive `keep`".into());
                }
            }
        }
        if matches!(
            self.experiment,
            Experiment::Train | Experiment::MergeHeatmap | Experiment::LambdaSweep
        ) && matches!(self.task, TaskConfig::LowRank { .. })
        {
            return bad("mean-field networks need a circles or multi_index task".into());
        }
        Ok(())
    }

    /// Sub-seed for a purpose tag and indices under the master seed.
    pub fn seed(&self, tag: &str, indices: &[u64]) -> u64 {
        rng::derive_seed(self.master_seed, tag, indices)
    }
}

/// Recursively writes `user` over `base`, rejecting keys `base` lacks.
fn overlay(base: &mut Value, user: &Value, path: &str) -> Result<()> {
    match (base, user) {
        (Value::Object(b), Value::Object(u)) => {
            for (key, uv) in u {
                let here = if path.is_empty() {
                    key.clone()
                } else {
                    format!("{path}.{key}")
                };
                if key == "task" {
                    if let Some(kind) = uv.get("kind").and_then(Value::as_str) {
                        let fresh = TaskConfig::default_for_kind(kind).ok_or_else(|| {
                            HarnessError::config(format!("unknown task kind `{kind}`"))
                        })?;
                        b.insert(
                            key.clone(),
                            serde_json::to_value(fresh).expect("task serializes"),
                        );
                    }
                }
                match b.get_mut(key) {
                    Some(bv) => overlay(bv, uv, &here)?,
                    None => {
                        return Err(HarnessError::config(format!("unknown config key `{here}`")))
                    }
                }
            }
            Ok(())
        }
        (b, u) => {
            *b = u.clone();
            Ok(())
        }
    }
}

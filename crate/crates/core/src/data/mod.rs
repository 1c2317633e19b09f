//! Labelled datasets and the synthetic task generators.

mod generate;
mod io;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{rng, Scalar};

pub use generate::{gen_circles, gen_multi_index, CirclesParams, MultiIndexParams};
pub use io::{dataset_read, dataset_write, sidecar_path};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Circles,
    MultiIndex,
    LowRank,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitTag {
    Train,
    Test,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub task: TaskKind,
    pub params: BTreeMap<String, f64>,
    pub split: SplitTag,
    pub seed: Option<u64>,
}

impl Default for DatasetMeta {
    fn default() -> Self {
        Self {
            task: TaskKind::Unknown,
            params: BTreeMap::new(),
            split: SplitTag::Full,
            seed: None,
        }
    }
}

/// Labelled examples `(z_j, y_j)`, stored row-major.
///
/// Labels are vectors of length `label_dim`; scalar tasks use `label_dim == 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    input_dim: usize,
    label_dim: usize,
    inputs: Vec<T>,
    labels: Vec<T>,
    pub meta: DatasetMeta,
}

impl<T: Scalar> Dataset<T> {
    /// Builds a dataset with scalar labels.
    pub fn new(inputs: Vec<Vec<T>>, labels: Vec<T>, meta: DatasetMeta) -> Result<Self> {
        let labels = labels.into_iter().map(|y| vec![y]).collect();
        Self::with_vector_labels(inputs, labels, meta)
    }

    pub fn with_vector_labels(
        inputs: Vec<Vec<T>>,
        labels: Vec<Vec<T>>,
        meta: DatasetMeta,
    ) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if inputs.len() != labels.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} inputs but {} labels",
                inputs.len(),
                labels.len()
            )));
        }
        let input_dim = inputs[0].len();
        let label_dim = labels[0].len();
        if input_dim == 0 || label_dim == 0 {
            return Err(Error::ShapeMismatch("zero-width inputs or labels".into()));
        }
        let mut flat_in = Vec::with_capacity(inputs.len() * input_dim);
        let mut flat_lab = Vec::with_capacity(labels.len() * label_dim);
        for (z, y) in inputs.iter().zip(&labels) {
            if z.len() != input_dim {
                return Err(Error::DimensionMismatch {
                    expected: input_dim,
                    found: z.len(),
                });
            }
            if y.len() != label_dim {
                return Err(Error::DimensionMismatch {
                    expected: label_dim,
                    found: y.len(),
                });
            }
            flat_in.extend_from_slice(z);
            flat_lab.extend_from_slice(y);
        }
        let ds = Self {
            input_dim,
            label_dim,
            inputs: flat_in,
            labels: flat_lab,
            meta,
        };
        ds.check_finite()?;
        Ok(ds)
    }

    fn check_finite(&self) -> Result<()> {
        if self
            .inputs
            .iter()
            .chain(&self.labels)
            .all(|v| v.is_finite())
        {
            Ok(())
        } else {
            Err(Error::NonFinite("dataset entry".into()))
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.len() / self.input_dim
    }

    /// Always false: construction rejects empty datasets.
    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn label_dim(&self) -> usize {
        self.label_dim
    }

    pub fn input(&self, j: usize) -> &[T] {
        &self.inputs[j * self.input_dim..(j + 1) * self.input_dim]
    }

    /// First label component of example `j`.
    pub fn label(&self, j: usize) -> T {
        self.labels[j * self.label_dim]
    }

    pub fn target(&self, j: usize) -> &[T] {
        &self.labels[j * self.label_dim..(j + 1) * self.label_dim]
    }

    /// Row-major `len x input_dim` storage.
    pub fn inputs_flat(&self) -> &[T] {
        &self.inputs
    }

    /// Row-major `len x label_dim` storage.
    pub fn targets_flat(&self) -> &[T] {
        &self.labels
    }

    pub fn inputs(&self) -> impl ExactSizeIterator<Item = &[T]> {
        self.inputs.chunks_exact(self.input_dim)
    }

    pub fn targets(&self) -> impl ExactSizeIterator<Item = &[T]> {
        self.labels.chunks_exact(self.label_dim)
    }

    /// Copies the rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize], meta: DatasetMeta) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut inputs = Vec::with_capacity(indices.len() * self.input_dim);
        let mut labels = Vec::with_capacity(indices.len() * self.label_dim);
        for &j in indices {
            inputs.extend_from_slice(self.input(j));
            labels.extend_from_slice(self.target(j));
        }
        Ok(Self {
            input_dim: self.input_dim,
            label_dim: self.label_dim,
            inputs,
            labels,
            meta,
        })
    }

    /// Deterministic shuffled split into `(train, test)`.
    ///
    /// The train side receives `floor(n * train_frac)` rows.
    pub fn split(&self, train_frac: f64, seed: u64) -> Result<(Self, Self)> {
        if !(train_frac > 0.0 && train_frac < 1.0) {
            return Err(Error::config(format!(
                "train fraction {train_frac} is not in (0, 1)"
            )));
        }
        let n = self.len();
        let n_train = (n as f64 * train_frac).floor() as usize;
        if n_train == 0 || n_train == n {
            return Err(Error::config(format!(
                "splitting {n} rows at fraction {train_frac} leaves one side empty"
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng::stream(seed, "split", &[]));
        let tagged = |split| DatasetMeta {
            split,
            ..self.meta.clone()
        };
        let train = self.select(&order[..n_train], tagged(SplitTag::Train))?;
        let test = self.select(&order[n_train..], tagged(SplitTag::Test))?;
        Ok((train, test))
    }
}

//! Merging independently trained networks.
//!
//! `M` networks of `N` particles combine into one network of `MN`
//! particles whose output is the mean of the member outputs. Low-rank
//! adapters are the linear special case and collapse to a single matrix.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mfnn::ParticleSystem;
use crate::textfmt::push_g17;
use crate::{rng, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    WithoutReplacement,
}

/// Ensemble budget: `member_count` networks of `member_size` particles,
/// subset sampling repeated `repeats` times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub member_count: usize,
    pub member_size: usize,
    pub sampling: Sampling,
    pub repeats: usize,
}

impl EnsembleSpec {
    pub fn budget(&self) -> usize {
        self.member_count * self.member_size
    }

    pub fn validate(&self, pool_size: usize) -> Result<()> {
        if self.member_count == 0 || self.member_size == 0 || self.repeats == 0 {
            return Err(Error::config("ensemble sizes and repeats must be positive"));
        }
        if self.member_count > pool_size {
            return Err(Error::config(format!(
                "cannot draw {} members without replacement from a pool of {pool_size}",
                self.member_count
            )));
        }
        Ok(())
    }
}

/// Concatenates the particles of all members, in member then particle order.
///
/// The merged output equals the particle-count weighted mean of the member
/// outputs (the plain mean for equal sizes).
pub fn merge<T: Scalar>(systems: &[&ParticleSystem<T>]) -> Result<ParticleSystem<T>> {
    let first = systems
        .first()
        .ok_or_else(|| Error::config("merge needs at least one network"))?;
    let mut params = Vec::with_capacity(systems.iter().map(|s| s.params().len()).sum());
    for (j, s) in systems.iter().enumerate() {
        if s.input_dim() != first.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: first.input_dim(),
                found: s.input_dim(),
            });
        }
        if s.scale() != first.scale() {
            return Err(Error::config(format!(
                "member {j} has output scale {} but member 0 has {}",
                s.scale(),
                first.scale()
            )));
        }
        params.extend_from_slice(s.params());
    }
    Ok(
        ParticleSystem::new(first.input_dim(), first.scale(), params)?
            .with_provenance(format!("merge of {} networks", systems.len())),
    )
}

/// Keeps the particles at `indices`, in the given order.
pub fn select_particles<T: Scalar>(
    system: &ParticleSystem<T>,
    indices: &[usize],
) -> Result<ParticleSystem<T>> {
    let mut params = Vec::with_capacity(indices.len() * system.width());
    for &i in indices {
        if i >= system.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: system.len(),
            });
        }
        params.extend_from_slice(system.particle(i));
    }
    ParticleSystem::new(system.input_dim(), system.scale(), params)
}

/// Keeps a uniformly random subset of `keep` particles, sampled without
/// replacement from the stream `(seed, "prune")`. Survivors keep their
/// original relative order.
pub fn prune_random<T: Scalar>(
    system: &ParticleSystem<T>,
    keep: usize,
    seed: u64,
) -> Result<ParticleSystem<T>> {
    if keep == 0 || keep > system.len() {
        return Err(Error::config(format!(
            "cannot keep {keep} of {} particles",
            system.len()
        )));
    }
    let mut rng = rng::stream(seed, "prune", &[]);
    let mut chosen = index::sample(&mut rng, system.len(), keep).into_vec();
    chosen.sort_unstable();
    Ok(
        select_particles(system, &chosen)?
            .with_provenance(format!("prune keep={keep} seed={seed}")),
    )
}

/// Rank-`N` update `gamma * B A` with `A: N x d`, `B: k x N`.
///
/// Row `i` of `A` and column `i` of `B` form the `i`-th linear neuron
/// `z -> b_i a_i^T z`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoraAdapter<T> {
    pub a: Array2<T>,
    pub b: Array2<T>,
    pub gamma: T,
}

impl<T: Scalar> LoraAdapter<T> {
    /// Adapter with the mean-field scale `gamma = 1 / N`.
    pub fn new(a: Array2<T>, b: Array2<T>) -> Result<Self> {
        let rank = a.nrows();
        Self::with_gamma(a, b, T::one() / T::lit(rank as f64))
    }

    pub fn with_gamma(a: Array2<T>, b: Array2<T>, gamma: T) -> Result<Self> {
        if a.nrows() == 0 || a.nrows() != b.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "A is {}x{} but B is {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols()
            )));
        }
        if !(gamma > T::zero() && gamma.is_finite()) {
            return Err(Error::config(format!(
                "adapter scale must be positive, got {gamma}"
            )));
        }
        Ok(Self { a, b, gamma })
    }

    pub fn rank(&self) -> usize {
        self.a.nrows()
    }

    pub fn in_dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.b.nrows()
    }

    /// `gamma * B A`, a `k x d` matrix.
    pub fn delta(&self) -> Array2<T> {
        self.b.dot(&self.a) * self.gamma
    }
}

/// `(1/M) sum_j gamma_j B_j A_j`: the merged adapters as one `k x d` matrix.
pub fn lora_merge<T: Scalar>(adapters: &[LoraAdapter<T>]) -> Result<Array2<T>> {
    let first = adapters
        .first()
        .ok_or_else(|| Error::config("lora_merge needs at least one adapter"))?;
    let shape = (first.rank(), first.in_dim(), first.out_dim());
    let mut acc = Array2::<T>::zeros((shape.2, shape.1));
    for (j, ad) in adapters.iter().enumerate() {
        if (ad.rank(), ad.in_dim(), ad.out_dim()) != shape {
            return Err(Error::ShapeMismatch(format!(
                "adapter {j} has (rank, d, k) = {:?}, adapter 0 has {shape:?}",
                (ad.rank(), ad.in_dim(), ad.out_dim())
            )));
        }
        acc = acc + ad.delta();
    }
    Ok(acc / T::lit(adapters.len() as f64))
}

/// Writes a matrix as CSV: a `# rows cols` line, then one row per line.
pub fn matrix_write<T: Scalar>(m: &Array2<T>, path: &Path) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "# {} {}", m.nrows(), m.ncols());
    for row in m.rows() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            push_g17(&mut out, v.as_f64());
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn matrix_read<T: Scalar>(path: &Path) -> Result<Array2<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format(path, "empty matrix file"))?;
    let dims: Vec<usize> = header
        .strip_prefix('#')
        .map(|rest| {
            rest.split_whitespace()
                .filter_map(|t| t.parse().ok())
                .collect()
        })
        .unwrap_or_default();
    let &[rows, cols] = dims.as_slice() else {
        return Err(Error::format(
            path,
            format!("expected `# rows cols`, got `{header}`"),
        ));
    };
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for line in lines.filter(|l| !l.trim().is_empty()) {
        seen += 1;
        let before = data.len();
        for field in line.split(',') {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::format(path, format!("row {seen}: `{field}` is not a number"))
            })?;
            data.push(T::lit(v));
        }
        if data.len() - before != cols {
            return Err(Error::format(
                path,
                format!(
                    "row {seen} has {} entries, expected {cols}",
                    data.len() - before
                ),
            ));
        }
    }
    if seen != rows {
        return Err(Error::format(
            path,
            format!("expected {rows} rows, found {seen}"),
        ));
    }
    Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::format(path, e.to_string()))
}

/// Writes `A` and `B` to `<stem>.a.csv` and `<stem>.b.csv` under `dir`.
/// The scale is not stored; reading restores `gamma = 1 / N`.
pub fn adapter_write<T: Scalar>(adapter: &LoraAdapter<T>, dir: &Path, stem: &str) -> Result<()> {
    matrix_write(&adapter.a, &dir.join(format!("{stem}.a.csv")))?;
    matrix_write(&adapter.b, &dir.join(format!("{stem}.b.csv")))
}

pub fn adapter_read<T: Scalar>(dir: &Path, stem: &str) -> Result<LoraAdapter<T>> {
    let a = matrix_read(&dir.join(format!("{stem}.a.csv")))?;
    let b = matrix_read(&dir.join(format!("{stem}.b.csv")))?;
    LoraAdapter::new(a, b)
}

//! Synthetic low-rank fine-tuning: a frozen linear layer `W0` plus a rank-`N`
//! adapter trained with noisy AdamW on squared error.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, DatasetMeta, SplitTag, TaskKind};
use crate::ensemble::LoraAdapter;
use crate::error::{Error, Result};
use crate::optim::{noisy_adamw_step, AdamWState};
use crate::{rng, Scalar};

/// Ground truth of a synthetic fine-tuning problem.
#[derive(Debug, Clone, PartialEq)]
pub struct LoraTask<T> {
    pub w0: Array2<T>,
    pub w_star: Array2<T>,
    pub rank: usize,
    pub n: usize,
    pub noise_std: f64,
    pub seed: u64,
}

impl<T: Scalar> LoraTask<T> {
    pub fn out_dim(&self) -> usize {
        self.w0.nrows()
    }

    pub fn in_dim(&self) -> usize {
        self.w0.ncols()
    }

    /// `W* - W0`.
    pub fn target_delta(&self) -> Array2<T> {
        &self.w_star - &self.w0
    }
}

fn gaussian<T: Scalar>(rows: usize, cols: usize, std: f64, rng: &mut rng::StreamRng) -> Array2<T> {
    let std = T::lit(std);
    Array2::from_shape_simple_fn((rows, cols), || std * rng::std_normal::<T, _>(rng))
}

/// `W0 ~ N(0, 1/d)` entrywise; `W* = W0 + P Q^T / sqrt(d)` with Gaussian
/// `P: k x r`, `Q: d x r`; inputs `z ~ N(0, I_d)`; labels
/// `y = W* z + N(0, noise_std^2 I_k)`.
pub fn gen_lowrank_task<T: Scalar>(
    k: usize,
    d: usize,
    rank: usize,
    n: usize,
    noise_std: f64,
    seed: u64,
) -> Result<(LoraTask<T>, Dataset<T>)> {
    if k == 0 || d == 0 || n == 0 {
        return Err(Error::config("low-rank task: k, d and n must be positive"));
    }
    if rank > k.min(d) {
        return Err(Error::config(format!(
            "low-rank task: rank {rank} exceeds min(k, d) = {}",
            k.min(d)
        )));
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::config(
            "low-rank task: noise_std must be finite and >= 0",
        ));
    }
    let inv_sqrt_d = 1.0 / (d as f64).sqrt();
    let w0 = gaussian::<T>(
        k,
        d,
        inv_sqrt_d,
        &mut rng::stream(seed, "lowrank-base", &[]),
    );
    let mut frng = rng::stream(seed, "lowrank-factors", &[]);
    let p = gaussian::<T>(k, rank, 1.0, &mut frng);
    let q = gaussian::<T>(d, rank, 1.0, &mut frng);
    let w_star = &w0 + &(p.dot(&q.t()) * T::lit(inv_sqrt_d));

    let mut zrng = rng::stream(seed, "lowrank-inputs", &[]);
    let mut nrng = rng::stream(seed, "lowrank-noise", &[]);
    let noise = T::lit(noise_std);
    let mut inputs = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let z: Array1<T> = Array1::from_shape_simple_fn(d, || rng::std_normal(&mut zrng));
        let mut y = w_star.dot(&z);
        if noise_std > 0.0 {
            y.mapv_inplace(|v| v + noise * rng::std_normal::<T, _>(&mut nrng));
        }
        inputs.push(z.to_vec());
        labels.push(y.to_vec());
    }
    let meta = DatasetMeta {
        task: TaskKind::LowRank,
        params: [
            ("k", k as f64),
            ("d", d as f64),
            ("rank", rank as f64),
            ("n", n as f64),
            ("noise_std", noise_std),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect(),
        split: SplitTag::Full,
        seed: Some(seed),
    };
    let data = Dataset::with_vector_labels(inputs, labels, meta)?;
    let task = LoraTask {
        w0,
        w_star,
        rank,
        n,
        noise_std,
        seed,
    };
    Ok((task, data))
}

fn check_layer<T: Scalar>(w0: &Array2<T>, adapter: &LoraAdapter<T>) -> Result<()> {
    if adapter.in_dim() != w0.ncols() || adapter.out_dim() != w0.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "base layer is {}x{} but adapter maps {} -> {}",
            w0.nrows(),
            w0.ncols(),
            adapter.in_dim(),
            adapter.out_dim()
        )));
    }
    Ok(())
}

/// `W0 z + gamma * B (A z)`.
pub fn lora_forward<T: Scalar>(
    w0: &Array2<T>,
    adapter: &LoraAdapter<T>,
    z: ArrayView1<'_, T>,
) -> Result<Array1<T>> {
    check_layer(w0, adapter)?;
    if z.len() != w0.ncols() {
        return Err(Error::DimensionMismatch {
            expected: w0.ncols(),
            found: z.len(),
        });
    }
    let low = adapter.a.dot(&z);
    Ok(w0.dot(&z) + adapter.b.dot(&low) * adapter.gamma)
}

fn data_views<T: Scalar>(data: &Dataset<T>) -> (ArrayView2<'_, T>, ArrayView2<'_, T>) {
    let z = ArrayView2::from_shape((data.len(), data.input_dim()), data.inputs_flat())
        .expect("dataset storage is row-major");
    let y = ArrayView2::from_shape((data.len(), data.label_dim()), data.targets_flat())
        .expect("dataset storage is row-major");
    (z, y)
}

/// Mean over examples of `|(W0 + delta) z - y|^2 / k`.
pub fn evaluate<T: Scalar>(w0: &Array2<T>, delta: &Array2<T>, data: &Dataset<T>) -> Result<T> {
    if delta.dim() != w0.dim() {
        return Err(Error::ShapeMismatch(format!(
            "delta is {:?} but base layer is {:?}",
            delta.dim(),
            w0.dim()
        )));
    }
    if data.input_dim() != w0.ncols() || data.label_dim() != w0.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "data maps {} -> {} but layer is {}x{}",
            data.input_dim(),
            data.label_dim(),
            w0.nrows(),
            w0.ncols()
        )));
    }
    let w = w0 + delta;
    let mut total = T::zero();
    for (z, y) in data.inputs().zip(data.targets()) {
        let pred = w.dot(&ArrayView1::from(z));
        total = pred
            .iter()
            .zip(y)
            .fold(total, |acc, (&p, &t)| acc + (p - t) * (p - t));
    }
    Ok(total / T::lit((data.len() * data.label_dim()) as f64))
}

/// Training objective of an adapter: `evaluate(W0, gamma B A) + l2 (|A|^2 + |B|^2)`.
pub fn lora_objective<T: Scalar>(
    w0: &Array2<T>,
    adapter: &LoraAdapter<T>,
    data: &Dataset<T>,
    l2: T,
) -> Result<T> {
    check_layer(w0, adapter)?;
    let fit = evaluate(w0, &adapter.delta(), data)?;
    let reg = adapter
        .a
        .iter()
        .chain(adapter.b.iter())
        .fold(T::zero(), |acc, &v| acc + v * v);
    Ok(fit + l2 * reg)
}

/// Gradients of [`lora_objective`] with respect to `(A, B)`.
pub fn lora_gradient<T: Scalar>(
    w0: &Array2<T>,
    adapter: &LoraAdapter<T>,
    data: &Dataset<T>,
    l2: T,
) -> Result<(Array2<T>, Array2<T>)> {
    check_layer(w0, adapter)?;
    evaluate(w0, &adapter.delta(), data)?;
    let (z, y) = data_views(data);
    let w = w0 + &adapter.delta();
    let resid = z.dot(&w.t()) - y;
    // d(fit)/d(delta) = 2/(n k) R^T Z
    let scale = T::lit(2.0) / T::lit((data.len() * data.label_dim()) as f64);
    let g = resid.t().dot(&z) * scale;
    let two_l2 = T::lit(2.0) * l2;
    let ga = adapter.b.t().dot(&g) * adapter.gamma + &adapter.a * two_l2;
    let gb = g.dot(&adapter.a.t()) * adapter.gamma + &adapter.b * two_l2;
    Ok((ga, gb))
}

/// Noisy AdamW settings for adapter training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoraTrainConfig {
    pub lr: f64,
    /// Noise temperature; each update receives `sqrt(2 temperature lr) xi`.
    pub temperature: f64,
    #[serde(default)]
    pub weight_decay: f64,
    /// L2 penalty on `(A, B)` inside the objective.
    #[serde(default = "default_lora_l2")]
    pub l2: f64,
    pub epochs: usize,
    #[serde(default = "default_lora_init_std")]
    pub init_std: f64,
    pub seed: u64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_lora_l2() -> f64 {
    1e-4
}
fn default_lora_init_std() -> f64 {
    1.0
}
fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

impl Default for LoraTrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.01,
            temperature: 1e-5,
            weight_decay: 0.0,
            l2: default_lora_l2(),
            epochs: 200,
            init_std: default_lora_init_std(),
            seed: 0,
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
        }
    }
}

impl LoraTrainConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.lr,
            self.temperature,
            self.weight_decay,
            self.l2,
            self.init_std,
            self.beta1,
            self.beta2,
            self.eps,
        ];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) || self.lr == 0.0 {
            return Err(Error::config(
                "adapter training needs lr > 0 and finite non-negative settings",
            ));
        }
        if self.beta1 >= 1.0 || self.beta2 >= 1.0 {
            return Err(Error::config("AdamW betas must be < 1"));
        }
        Ok(())
    }
}

/// Trains a rank-`rank` adapter on `data` with `W0` frozen.
///
/// `A` starts Gaussian with `init_std`, `B` starts at zero, so the initial
/// update is exactly zero. Each epoch is one full-batch step; the noise of
/// epoch `e` comes from the stream `(seed, "lora-noise", e)`.
pub fn finetune<T: Scalar>(
    task: &LoraTask<T>,
    data: &Dataset<T>,
    rank: usize,
    cfg: &LoraTrainConfig,
) -> Result<LoraAdapter<T>> {
    cfg.validate()?;
    if rank == 0 {
        return Err(Error::config("adapter rank must be positive"));
    }
    let (k, d) = task.w0.dim();
    let a = gaussian::<T>(
        rank,
        d,
        cfg.init_std,
        &mut rng::stream(cfg.seed, "lora-init", &[]),
    );
    let mut adapter = LoraAdapter::new(a, Array2::zeros((k, rank)))?;
    // validates shapes before the first step
    evaluate(&task.w0, &adapter.delta(), data)?;

    let n_a = rank * d;
    let mut params: Vec<T> = adapter.a.iter().chain(adapter.b.iter()).copied().collect();
    let mut state = AdamWState::with_betas(
        params.len(),
        T::lit(cfg.beta1),
        T::lit(cfg.beta2),
        T::lit(cfg.eps),
    );
    let l2 = T::lit(cfg.l2);
    for epoch in 0..cfg.epochs {
        let (ga, gb) = lora_gradient(&task.w0, &adapter, data, l2)?;
        let grad: Vec<T> = ga.iter().chain(gb.iter()).copied().collect();
        let mut noise = rng::stream(cfg.seed, "lora-noise", &[epoch as u64]);
        noisy_adamw_step(
            &mut params,
            &grad,
            &mut state,
            T::lit(cfg.lr),
            T::lit(cfg.temperature),
            T::lit(cfg.weight_decay),
            &mut noise,
        )?;
        adapter.a = Array2::from_shape_vec((rank, d), params[..n_a].to_vec())
            .expect("A block has rank * d entries");
        adapter.b = Array2::from_shape_vec((k, rank), params[n_a..].to_vec())
            .expect("B block has k * rank entries");
    }
    if params.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("adapter parameters diverged".into()));
    }
    Ok(adapter)
}

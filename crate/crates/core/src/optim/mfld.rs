use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::mfnn::{LossKind, ParticleSystem, RiskWeights};
use crate::{rng, Scalar};

/// Hyperparameters of noisy gradient descent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Step size.
    pub eta: f64,
    /// Temperature (entropy coefficient); sets the injected noise.
    pub temperature: f64,
    /// Coefficient of the `l2 * |x|^2` regularizer.
    pub l2: f64,
    /// Number of full-batch steps.
    pub epochs: usize,
    pub loss: LossKind,
    pub seed: u64,
    /// Standard deviation of the Gaussian initialization. Not fixed by the
    /// method itself; 1.0 by default.
    #[serde(default = "default_init_std")]
    pub init_std: f64,
}

fn default_init_std() -> f64 {
    1.0
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            eta: 0.1,
            temperature: 0.01,
            l2: 0.1,
            epochs: 200,
            loss: LossKind::Logistic,
            seed: 0,
            init_std: 1.0,
        }
    }
}

impl TrainConfig {
    /// Checks ranges. `eta * l2 >= 1/2` only logs a warning: the contraction
    /// guarantee is lost but the dynamics remain well defined.
    pub fn validate(&self) -> Result<()> {
        let finite = [self.eta, self.temperature, self.l2, self.init_std]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::config("training hyperparameters must be finite"));
        }
        if self.eta <= 0.0 {
            return Err(Error::config(format!(
                "step size must be positive, got {}",
                self.eta
            )));
        }
        if self.temperature < 0.0 || self.l2 < 0.0 || self.init_std < 0.0 {
            return Err(Error::config(
                "temperature, l2 and init_std must be non-negative",
            ));
        }
        if self.eta * self.l2 >= 0.5 {
            log::warn!(
                "eta * l2 = {} >= 1/2; the regularizer no longer contracts",
                self.eta * self.l2
            );
        }
        Ok(())
    }

    /// Per-coordinate noise standard deviation `sqrt(2 * temperature * eta)`.
    pub fn noise_std(&self) -> f64 {
        (2.0 * self.temperature * self.eta).sqrt()
    }
}

/// Draws `n` particles with i.i.d. `Normal(0, init_std^2)` coordinates.
///
/// Particle `i` uses the stream `(seed, "init", i)`.
pub fn init_system<T: Scalar>(
    n: usize,
    input_dim: usize,
    scale: T,
    cfg: &TrainConfig,
) -> Result<ParticleSystem<T>> {
    if n == 0 {
        return Err(Error::config(
            "a particle system needs at least one particle",
        ));
    }
    cfg.validate()?;
    let width = input_dim + 2;
    let std = T::lit(cfg.init_std);
    let mut params = vec![T::zero(); n * width];
    params.par_chunks_mut(width).enumerate().for_each(|(i, p)| {
        let mut rng = rng::stream(cfg.seed, "init", &[i as u64]);
        p.iter_mut()
            .for_each(|x| *x = std * rng::std_normal(&mut rng));
    });
    Ok(ParticleSystem::new(input_dim, scale, params)?
        .with_provenance(format!("init seed={} n={n}", cfg.seed)))
}

/// The drift driving the particles.
#[derive(Debug, Clone, Copy)]
pub enum Objective<'a, T> {
    /// Empirical risk over a dataset plus the L2 regularizer.
    Risk(&'a Dataset<T>),
    /// Regularizer only (`F0 = 0`): every coordinate is an independent
    /// discretized Ornstein-Uhlenbeck process.
    RegularizerOnly,
}

impl<'a, T> From<&'a Dataset<T>> for Objective<'a, T> {
    fn from(data: &'a Dataset<T>) -> Self {
        Objective::Risk(data)
    }
}

/// One synchronous Langevin step
/// `x_i <- x_i - eta * grad(dF/dmu)(x_i) + sqrt(2 lambda eta) xi_i`.
///
/// All gradients are taken at the pre-step system. The noise for particle
/// `i` at step `k` comes from the stream `(seed, "noise", k, i)`.
pub fn mfld_step<'a, T: Scalar>(
    system: &ParticleSystem<T>,
    objective: impl Into<Objective<'a, T>>,
    cfg: &TrainConfig,
    k: u64,
) -> Result<ParticleSystem<T>> {
    let keys: Vec<u64> = (0..system.len() as u64).collect();
    mfld_step_keyed(system, objective, cfg, k, &keys)
}

/// [`mfld_step`] with caller-chosen noise stream keys, one per particle.
///
/// Relabelling particles together with their keys leaves the dynamics
/// unchanged.
pub fn mfld_step_keyed<'a, T: Scalar>(
    system: &ParticleSystem<T>,
    objective: impl Into<Objective<'a, T>>,
    cfg: &TrainConfig,
    k: u64,
    noise_keys: &[u64],
) -> Result<ParticleSystem<T>> {
    cfg.validate()?;
    if noise_keys.len() != system.len() {
        return Err(Error::DimensionMismatch {
            expected: system.len(),
            found: noise_keys.len(),
        });
    }
    let weights = match objective.into() {
        Objective::Risk(data) => Some(RiskWeights::new(system, data, cfg.loss)?),
        Objective::RegularizerOnly => None,
    };
    apply_step(system, weights.as_ref(), cfg, k, noise_keys)
}

fn apply_step<T: Scalar>(
    system: &ParticleSystem<T>,
    weights: Option<&RiskWeights<'_, T>>,
    cfg: &TrainConfig,
    k: u64,
    noise_keys: &[u64],
) -> Result<ParticleSystem<T>> {
    let width = system.width();
    let eta = T::lit(cfg.eta);
    let l2 = T::lit(cfg.l2);
    let noise_std = T::lit(cfg.noise_std());
    let with_noise = cfg.temperature > 0.0;

    let mut next = system.params().to_vec();
    next.par_chunks_mut(width)
        .zip(noise_keys.par_iter())
        .for_each_init(
            || vec![T::zero(); width],
            |grad, (x, &key)| {
                match weights {
                    Some(w) => w.grad_into(x, l2, grad),
                    None => {
                        let two_l2 = T::lit(2.0) * l2;
                        grad.iter_mut()
                            .zip(x.iter())
                            .for_each(|(g, &xi)| *g = two_l2 * xi);
                    }
                }
                for (xi, &g) in x.iter_mut().zip(grad.iter()) {
                    *xi = *xi - eta * g;
                }
                if with_noise {
                    let mut rng = rng::stream(cfg.seed, "noise", &[k, key]);
                    for xi in x.iter_mut() {
                        *xi = *xi + noise_std * rng::std_normal(&mut rng);
                    }
                }
            },
        );
    let out = ParticleSystem::new(system.input_dim(), system.scale(), next)?
        .with_provenance(system.provenance().to_string());
    out.check_finite()?;
    Ok(out)
}

/// Loss values after one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    /// 1-based: `epoch == e` describes the system after `e` steps.
    pub epoch: usize,
    pub train_loss: f64,
    pub test_loss: Option<f64>,
}

/// Runs `cfg.epochs` full-batch steps and records the losses after each.
pub fn train<T: Scalar>(
    system: &ParticleSystem<T>,
    data: &Dataset<T>,
    test: Option<&Dataset<T>>,
    cfg: &TrainConfig,
) -> Result<(ParticleSystem<T>, Vec<EpochMetrics>)> {
    cfg.validate()?;
    cfg.loss.check_labels(data)?;
    if let Some(t) = test {
        cfg.loss.check_labels(t)?;
    }
    let keys: Vec<u64> = (0..system.len() as u64).collect();
    let mut current = system.clone();
    let mut trajectory = Vec::with_capacity(cfg.epochs);
    for k in 0..cfg.epochs {
        let weights = RiskWeights::new(&current, data, cfg.loss)?;
        current = apply_step(&current, Some(&weights), cfg, k as u64, &keys)?;
        let train_loss = crate::mfnn::empirical_risk(&current, data, cfg.loss)?.as_f64();
        let test_loss = test
            .map(|t| crate::mfnn::empirical_risk(&current, t, cfg.loss).map(Scalar::as_f64))
            .transpose()?;
        trajectory.push(EpochMetrics {
            epoch: k + 1,
            train_loss,
            test_loss,
        });
    }
    let provenance = format!(
        "mfld seed={} epochs={} eta={} temperature={} l2={}",
        cfg.seed, cfg.epochs, cfg.eta, cfg.temperature, cfg.l2
    );
    Ok((current.with_provenance(provenance), trajectory))
}

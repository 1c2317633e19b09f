//! Two-layer mean-field networks.
//!
//! A network is the empirical mean of `N` bounded neurons
//! `h(x, z) = R * tanh(c) * tanh(w . z + b)` whose parameters
//! `x = (w, b, c)` are the particles moved by Langevin training.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::scalar::sech2_from_tanh;
use crate::Scalar;

/// One neuron's parameters, stored as `(w_0, ..., w_{d-1}, b, c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Particle<T>(Vec<T>);

impl<T: Scalar> Particle<T> {
    pub fn new(w: &[T], b: T, c: T) -> Self {
        let mut v = Vec::with_capacity(w.len() + 2);
        v.extend_from_slice(w);
        v.push(b);
        v.push(c);
        Self(v)
    }

    /// Wraps a packed `(w.., b, c)` vector.
    pub fn from_packed(packed: Vec<T>) -> Result<Self> {
        if packed.len() < 3 {
            return Err(Error::DimensionMismatch {
                expected: 3,
                found: packed.len(),
            });
        }
        Ok(Self(packed))
    }

    pub fn input_dim(&self) -> usize {
        self.0.len() - 2
    }

    pub fn w(&self) -> &[T] {
        &self.0[..self.input_dim()]
    }

    pub fn b(&self) -> T {
        self.0[self.input_dim()]
    }

    pub fn c(&self) -> T {
        self.0[self.input_dim() + 1]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }
}

/// `R * tanh(c) * tanh(w . z + b)` for a packed particle.
#[inline]
pub fn neuron_eval<T: Scalar>(particle: &[T], z: &[T], scale: T) -> Result<T> {
    if particle.len() != z.len() + 2 {
        return Err(Error::DimensionMismatch {
            expected: particle.len().saturating_sub(2),
            found: z.len(),
        });
    }
    Ok(neuron_unchecked(particle, z, scale))
}

#[inline]
fn pre_activation<T: Scalar>(particle: &[T], z: &[T]) -> T {
    let d = z.len();
    particle[..d]
        .iter()
        .zip(z)
        .fold(particle[d], |acc, (&w, &zi)| acc + w * zi)
}

#[inline]
fn neuron_unchecked<T: Scalar>(particle: &[T], z: &[T], scale: T) -> T {
    let d = z.len();
    scale * particle[d + 1].tanh() * pre_activation(particle, z).tanh()
}

/// `grad_x h(x, z)` written into `out` (length `d + 2`).
fn neuron_grad_into<T: Scalar>(particle: &[T], z: &[T], scale: T, weight: T, out: &mut [T]) {
    let d = z.len();
    let t_in = pre_activation(particle, z).tanh();
    let t_out = particle[d + 1].tanh();
    let inner = weight * scale * t_out * sech2_from_tanh(t_in);
    for (o, &zi) in out[..d].iter_mut().zip(z) {
        *o = *o + inner * zi;
    }
    out[d] = out[d] + inner;
    out[d + 1] = out[d + 1] + weight * scale * sech2_from_tanh(t_out) * t_in;
}

/// A network of `N >= 1` particles sharing input dimension and output scale `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSystem<T> {
    input_dim: usize,
    scale: T,
    params: Vec<T>,
    provenance: String,
}

impl<T: Scalar> ParticleSystem<T> {
    /// Builds a system from packed row-major parameters (`N * (input_dim + 2)` values).
    pub fn new(input_dim: usize, scale: T, params: Vec<T>) -> Result<Self> {
        if input_dim == 0 {
            return Err(Error::config("input dimension must be positive"));
        }
        if !(scale > T::zero() && scale.is_finite()) {
            return Err(Error::config(format!(
                "output scale must be positive, got {scale}"
            )));
        }
        let width = input_dim + 2;
        if params.is_empty() || !params.len().is_multiple_of(width) {
            return Err(Error::ShapeMismatch(format!(
                "{} parameters do not form a whole number (>= 1) of particles of width {width}",
                params.len()
            )));
        }
        let sys = Self {
            input_dim,
            scale,
            params,
            provenance: String::new(),
        };
        sys.check_finite()?;
        Ok(sys)
    }

    pub fn from_particles(particles: Vec<Particle<T>>, scale: T) -> Result<Self> {
        let first = particles
            .first()
            .ok_or_else(|| Error::config("a particle system needs at least one particle"))?;
        let input_dim = first.input_dim();
        let mut params = Vec::with_capacity(particles.len() * (input_dim + 2));
        for p in &particles {
            if p.input_dim() != input_dim {
                return Err(Error::DimensionMismatch {
                    expected: input_dim,
                    found: p.input_dim(),
                });
            }
            params.extend_from_slice(p.as_slice());
        }
        Self::new(input_dim, scale, params)
    }

    pub fn with_provenance(mut self, tag: impl Into<String>) -> Self {
        self.provenance = tag.into();
        self
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.params.len() / self.width()
    }

    /// Always false: a system holds at least one particle.
    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Parameters per particle, `input_dim + 2`.
    pub fn width(&self) -> usize {
        self.input_dim + 2
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    pub fn particle(&self, i: usize) -> &[T] {
        let w = self.width();
        &self.params[i * w..(i + 1) * w]
    }

    pub fn particles(&self) -> impl ExactSizeIterator<Item = &[T]> {
        self.params.chunks_exact(self.width())
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        match self.params.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(pos) => Err(Error::NonFinite(format!(
                "parameter {} of particle {}",
                pos % self.width(),
                pos / self.width()
            ))),
        }
    }

    /// Network output at `z`: the mean of the neuron outputs.
    pub fn eval(&self, z: &[T]) -> Result<T> {
        network_eval(self, z)
    }

    /// Outputs for every input of `data`, in example order.
    pub fn predict(&self, data: &Dataset<T>) -> Result<Vec<T>> {
        self.check_input_dim(data.input_dim())?;
        Ok(data.inputs().map(|z| self.eval_unchecked(z)).collect())
    }

    fn check_input_dim(&self, found: usize) -> Result<()> {
        if found != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                found,
            });
        }
        Ok(())
    }

    fn eval_unchecked(&self, z: &[T]) -> T {
        let sum = self
            .particles()
            .fold(T::zero(), |acc, p| acc + neuron_unchecked(p, z, self.scale));
        sum / T::lit(self.len() as f64)
    }
}

/// Mean of the neuron outputs, summed in particle order then divided by `N`.
pub fn network_eval<T: Scalar>(system: &ParticleSystem<T>, z: &[T]) -> Result<T> {
    system.check_input_dim(z.len())?;
    Ok(system.eval_unchecked(z))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `log(1 + exp(-y a))`, labels in {-1, +1}.
    Logistic,
    /// `(a - y)^2`, not halved.
    SquaredError,
}

impl LossKind {
    pub fn check_label<T: Scalar>(self, y: T) -> Result<()> {
        match self {
            LossKind::Logistic if y != T::one() && y != -T::one() => {
                Err(Error::InvalidLabel(y.as_f64()))
            }
            _ if !y.is_finite() => Err(Error::NonFinite(format!("label {y}"))),
            _ => Ok(()),
        }
    }

    pub fn check_labels<T: Scalar>(self, data: &Dataset<T>) -> Result<()> {
        if data.label_dim() != 1 {
            return Err(Error::ShapeMismatch(format!(
                "scalar losses need scalar labels, dataset has {} label columns",
                data.label_dim()
            )));
        }
        data.targets().try_for_each(|y| self.check_label(y[0]))
    }
}

/// `log(1 + exp(v))` without overflow.
#[inline]
fn softplus<T: Scalar>(v: T) -> T {
    v.max(T::zero()) + (-v.abs()).exp().ln_1p()
}

/// `1 / (1 + exp(-u))` without overflow.
#[inline]
fn sigmoid<T: Scalar>(u: T) -> T {
    if u >= T::zero() {
        T::one() / (T::one() + (-u).exp())
    } else {
        let e = u.exp();
        e / (T::one() + e)
    }
}

pub fn loss_eval<T: Scalar>(kind: LossKind, a: T, y: T) -> Result<T> {
    kind.check_label(y)?;
    Ok(loss_unchecked(kind, a, y))
}

/// Derivative of the loss with respect to the prediction `a`.
pub fn loss_deriv<T: Scalar>(kind: LossKind, a: T, y: T) -> Result<T> {
    kind.check_label(y)?;
    Ok(loss_deriv_unchecked(kind, a, y))
}

#[inline]
fn loss_unchecked<T: Scalar>(kind: LossKind, a: T, y: T) -> T {
    match kind {
        LossKind::Logistic => softplus(-y * a),
        LossKind::SquaredError => (a - y) * (a - y),
    }
}

#[inline]
fn loss_deriv_unchecked<T: Scalar>(kind: LossKind, a: T, y: T) -> T {
    match kind {
        // -y * sigmoid(-y a) == -y / (1 + exp(y a))
        LossKind::Logistic => -y * sigmoid(-y * a),
        LossKind::SquaredError => T::lit(2.0) * (a - y),
    }
}

/// Mean loss of the network over `data`, summed in example order.
pub fn empirical_risk<T: Scalar>(
    system: &ParticleSystem<T>,
    data: &Dataset<T>,
    kind: LossKind,
) -> Result<T> {
    kind.check_labels(data)?;
    let preds = system.predict(data)?;
    let total = preds
        .iter()
        .zip(data.targets())
        .fold(T::zero(), |acc, (&a, y)| {
            acc + loss_unchecked(kind, a, y[0])
        });
    Ok(total / T::lit(data.len() as f64))
}

/// Fraction of examples where `sign(f(z))` matches the +-1 label.
pub fn classification_accuracy<T: Scalar>(
    system: &ParticleSystem<T>,
    data: &Dataset<T>,
) -> Result<f64> {
    let preds = system.predict(data)?;
    let hits = preds
        .iter()
        .zip(data.targets())
        .filter(|(a, y)| (**a >= T::zero()) == (y[0] > T::zero()))
        .count();
    Ok(hits as f64 / data.len() as f64)
}

/// Gradient of the first variation at particle `i`:
/// `(1/n) sum_j l'(f(z_j), y_j) grad_x h(x_i, z_j) + 2 l2 x_i`.
///
/// This equals `N` times the ordinary gradient of the finite-particle
/// objective `F0 + (1/N) sum_i l2 |x_i|^2` with respect to `x_i`.
pub fn first_variation_grad<T: Scalar>(
    system: &ParticleSystem<T>,
    data: &Dataset<T>,
    kind: LossKind,
    l2: T,
    i: usize,
) -> Result<Vec<T>> {
    if i >= system.len() {
        return Err(Error::IndexOutOfRange {
            index: i,
            len: system.len(),
        });
    }
    let weights = RiskWeights::new(system, data, kind)?;
    let mut out = vec![T::zero(); system.width()];
    weights.grad_into(system.particle(i), l2, &mut out);
    Ok(out)
}

/// Per-example loss derivatives `l'(f(z_j), y_j) / n` at a fixed system.
///
/// Computing these once lets every particle's gradient be evaluated
/// independently against the same pre-step state.
pub(crate) struct RiskWeights<'a, T> {
    data: &'a Dataset<T>,
    scale: T,
    weights: Vec<T>,
}

impl<'a, T: Scalar> RiskWeights<'a, T> {
    pub(crate) fn new(
        system: &ParticleSystem<T>,
        data: &'a Dataset<T>,
        kind: LossKind,
    ) -> Result<Self> {
        kind.check_labels(data)?;
        let inv_n = T::one() / T::lit(data.len() as f64);
        let preds = system.predict(data)?;
        let weights = preds
            .iter()
            .zip(data.targets())
            .map(|(&a, y)| loss_deriv_unchecked(kind, a, y[0]) * inv_n)
            .collect();
        Ok(Self {
            data,
            scale: system.scale(),
            weights,
        })
    }

    pub(crate) fn grad_into(&self, particle: &[T], l2: T, out: &mut [T]) {
        out.iter_mut().for_each(|o| *o = T::zero());
        for (z, &wj) in self.data.inputs().zip(&self.weights) {
            neuron_grad_into(particle, z, self.scale, wj, out);
        }
        let two_l2 = T::lit(2.0) * l2;
        for (o, &x) in out.iter_mut().zip(particle) {
            *o = *o + two_l2 * x;
        }
    }
}

/// First-variation gradients of every particle, packed like the parameters.
pub fn all_first_variation_grads<T: Scalar>(
    system: &ParticleSystem<T>,
    data: &Dataset<T>,
    kind: LossKind,
    l2: T,
) -> Result<Vec<T>> {
    let weights = RiskWeights::new(system, data, kind)?;
    let width = system.width();
    let mut out = vec![T::zero(); system.params().len()];
    out.par_chunks_mut(width)
        .zip(system.params().par_chunks(width))
        .for_each(|(g, p)| weights.grad_into(p, l2, g));
    Ok(out)
}

use rand::Rng;

use crate::error::{Error, Result};
use crate::{rng, Scalar};

/// Moment accumulators of AdamW. `beta1 = 0.9`, `beta2 = 0.999`,
/// `eps = 1e-8` unless overridden.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamWState<T> {
    pub m: Vec<T>,
    pub v: Vec<T>,
    pub step_count: u64,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
}

impl<T: Scalar> AdamWState<T> {
    pub fn new(len: usize) -> Self {
        Self::with_betas(len, T::lit(0.9), T::lit(0.999), T::lit(1e-8))
    }

    pub fn with_betas(len: usize, beta1: T, beta2: T, eps: T) -> Self {
        Self {
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
            step_count: 0,
            beta1,
            beta2,
            eps,
        }
    }
}

/// Decoupled-weight-decay Adam step followed by Gaussian noise
/// `sqrt(2 * temperature * lr) * xi` on every coordinate.
///
/// With `temperature == 0` no random numbers are drawn.
pub fn noisy_adamw_step<T: Scalar, R: Rng + ?Sized>(
    params: &mut [T],
    grad: &[T],
    state: &mut AdamWState<T>,
    lr: T,
    temperature: T,
    weight_decay: T,
    rng: &mut R,
) -> Result<()> {
    if grad.len() != params.len() {
        return Err(Error::DimensionMismatch {
            expected: params.len(),
            found: grad.len(),
        });
    }
    if state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(Error::DimensionMismatch {
            expected: params.len(),
            found: state.m.len(),
        });
    }
    if lr.is_nan() || lr <= T::zero() || temperature < T::zero() || weight_decay < T::zero() {
        return Err(Error::config(
            "AdamW needs lr > 0 and non-negative temperature and weight decay",
        ));
    }

    state.step_count += 1;
    let t = state.step_count as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let bias1 = T::one() - b1.powi(t);
    let bias2 = T::one() - b2.powi(t);
    let decay = T::one() - lr * weight_decay;
    let noise_std = (T::lit(2.0) * temperature * lr).sqrt();
    let with_noise = temperature > T::zero();

    for (((x, &g), m), v) in params
        .iter_mut()
        .zip(grad)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = b1 * *m + (T::one() - b1) * g;
        *v = b2 * *v + (T::one() - b2) * g * g;
        let m_hat = *m / bias1;
        let v_hat = *v / bias2;
        *x = *x * decay - lr * m_hat / (v_hat.sqrt() + state.eps);
        if with_noise {
            *x = *x + noise_std * rng::std_normal::<T, R>(rng);
        }
    }
    Ok(())
}

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetMeta, SplitTag, TaskKind};
use crate::error::{Error, Result};
use crate::{rng, Scalar};

/// Two noisy concentric circles labelled -1 (inner) and +1 (outer).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CirclesParams {
    pub n: usize,
    pub r_inner: f64,
    pub r_outer: f64,
    /// Standard deviation of the isotropic Gaussian jitter.
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for CirclesParams {
    fn default() -> Self {
        Self {
            n: 200,
            r_inner: 1.0,
            r_outer: 2.0,
            noise_std: 0.1,
            seed: 0,
        }
    }
}

impl CirclesParams {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("circles: n must be positive"));
        }
        if !(self.r_inner > 0.0 && self.r_inner < self.r_outer && self.r_outer.is_finite()) {
            return Err(Error::config(format!(
                "circles: need 0 < r_inner < r_outer, got {} and {}",
                self.r_inner, self.r_outer
            )));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::config("circles: noise_std must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Multi-index regression: inputs uniform in a radius-`r` ball of
/// dimension `d`, labels `(label_scale / k) * sum_{j<k} tanh(z_j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiIndexParams {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub r: f64,
    pub label_scale: f64,
    pub seed: u64,
}

impl Default for MultiIndexParams {
    fn default() -> Self {
        Self {
            n: 500,
            d: 100,
            k: 100,
            r: 5.0,
            label_scale: 100.0,
            seed: 0,
        }
    }
}

impl MultiIndexParams {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 || self.k == 0 {
            return Err(Error::config("multi-index: n, d and k must be positive"));
        }
        if self.k > self.d {
            return Err(Error::config(format!(
                "multi-index: k = {} exceeds d = {}",
                self.k, self.d
            )));
        }
        if !(self.r > 0.0 && self.r.is_finite() && self.label_scale > 0.0) {
            return Err(Error::config(
                "multi-index: r and label_scale must be positive",
            ));
        }
        Ok(())
    }
}

pub fn gen_circles<T: Scalar>(p: &CirclesParams) -> Result<Dataset<T>> {
    p.validate()?;
    let mut rng = rng::stream(p.seed, "circles", &[]);
    let mut rows: Vec<(Vec<T>, T)> = (0..p.n)
        .map(|i| {
            let theta = rng.random::<f64>() * TAU;
            let xi1 = p.noise_std * rng::std_normal::<f64, _>(&mut rng);
            let xi2 = p.noise_std * rng::std_normal::<f64, _>(&mut rng);
            let (r, y) = if 2 * i < p.n {
                (p.r_inner, -1.0)
            } else {
                (p.r_outer, 1.0)
            };
            let z = vec![T::lit(r * theta.cos() + xi1), T::lit(r * theta.sin() + xi2)];
            (z, T::lit(y))
        })
        .collect();
    rows.shuffle(&mut rng::stream(p.seed, "circles-shuffle", &[]));

    let params = BTreeMap::from([
        ("n".to_string(), p.n as f64),
        ("r_inner".to_string(), p.r_inner),
        ("r_outer".to_string(), p.r_outer),
        ("noise_std".to_string(), p.noise_std),
    ]);
    let meta = DatasetMeta {
        task: TaskKind::Circles,
        params,
        split: SplitTag::Full,
        seed: Some(p.seed),
    };
    let (inputs, labels) = rows.into_iter().unzip();
    Dataset::new(inputs, labels, meta)
}

pub fn gen_multi_index<T: Scalar>(p: &MultiIndexParams) -> Result<Dataset<T>> {
    p.validate()?;
    let mut rng = rng::stream(p.seed, "multi-index", &[]);
    let inv_d = 1.0 / p.d as f64;
    let mut inputs = Vec::with_capacity(p.n);
    let mut labels = Vec::with_capacity(p.n);
    for _ in 0..p.n {
        let mut g: Vec<f64> = (0..p.d).map(|_| rng::std_normal(&mut rng)).collect();
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        // U^(1/d) makes the radius distributed like a uniform point in the ball
        let u: f64 = rng.random();
        let radius = p.r * u.powf(inv_d);
        let scale = if norm > 0.0 { radius / norm } else { 0.0 };
        g.iter_mut().for_each(|v| *v *= scale);
        let y = p.label_scale / p.k as f64 * g[..p.k].iter().map(|v| v.tanh()).sum::<f64>();
        inputs.push(g.into_iter().map(T::lit).collect());
        labels.push(T::lit(y));
    }
    let params = BTreeMap::from([
        ("n".to_string(), p.n as f64),
        ("d".to_string(), p.d as f64),
        ("k".to_string(), p.k as f64),
        ("r".to_string(), p.r),
        ("label_scale".to_string(), p.label_scale),
    ]);
    let meta = DatasetMeta {
        task: TaskKind::MultiIndex,
        params,
        split: SplitTag::Full,
        seed: Some(p.seed),
    };
    Dataset::new(inputs, labels, meta)
}

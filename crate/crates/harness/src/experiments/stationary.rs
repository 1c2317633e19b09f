use mfld_core::{init_system, mfld_step, Objective, ParticleSystem64};

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::records::{MetricKind, MetricRecord};

/// Average over coordinates of the across-particle sample variance.
pub fn coordinate_variance(system: &ParticleSystem64) -> f64 {
    let n = system.len() as f64;
    let width = system.width();
    let mut total = 0.0;
    for c in 0..width {
        let m = system.particles().map(|p| p[c]).sum::<f64>() / n;
        total += system.particles().map(|p| (p[c] - m).powi(2)).sum::<f64>() / (n - 1.0);
    }
    total / width as f64
}

/// Runs the dynamics with the data term switched off, where each
/// coordinate is an Ornstein-Uhlenbeck chain with stationary variance
/// `lambda / (2 l2)`. Records `variance` every `record_every` steps (and
/// after the last) and the `target_variance`, per `lambda`.
///
/// All temperatures share one seed, so their noise paths differ only by
/// the `sqrt(lambda)` factor.
pub fn run_stationary_check(cfg: &ExperimentConfig) -> Result<Vec<MetricRecord>> {
    cfg.validate()?;
    let exp = cfg.experiment.slug();
    let s = &cfg.stationary;
    let mut records = Vec::new();
    for &lambda in &cfg.lambda_list {
        let mut tcfg = cfg.train.to_train_config(cfg.seed("stationary", &[]));
        tcfg.temperature = lambda;
        let mut system = init_system(s.particles, s.input_dim, cfg.scale, &tcfg)?;
        for k in 0..s.steps {
            system = mfld_step(&system, Objective::RegularizerOnly, &tcfg, k as u64)?;
            let done = k + 1;
            if done % s.record_every == 0 || done == s.steps {
                records.push(
                    MetricRecord::new(exp, MetricKind::Variance, coordinate_variance(&system))
                        .n(s.particles)
                        .lambda(lambda)
                        .epoch(done),
                );
            }
        }
        records.push(
            MetricRecord::new(
                exp,
                MetricKind::TargetVariance,
                lambda / (2.0 * cfg.train.l2),
            )
            .n(s.particles)
            .lambda(lambda),
        );
    }
    Ok(records)
}

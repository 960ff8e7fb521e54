use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Dataset, Task};
use crate::error::{Error, Result};
use crate::model::Model;

/// A corrupted dataset together with the rows that were modified.
#[derive(Debug, Clone)]
pub struct Injected {
    pub dataset: Dataset,
    /// Modified row indices, ascending.
    pub indices: Vec<usize>,
}

/// Label-flip protocol for classification data.
///
/// Samples are ranked by `|f(x)|` under `reference` (largest first, ties by
/// index); the top `round(rate_pool · m)` form the pool and a seeded random
/// `round(flip_fraction · pool)` of them get their labels negated.
pub fn inject_label_outliers(
    dataset: &Dataset,
    rate_pool: f64,
    flip_fraction: f64,
    reference: &Model,
    seed: u64,
) -> Result<Injected> {
    if dataset.task() != Task::Classification {
        return Err(Error::invalid("label outliers require a classification dataset"));
    }
    if !(0.0..=1.0).contains(&rate_pool) || !(0.0..=1.0).contains(&flip_fraction) {
        return Err(Error::invalid("outlier rates must lie in [0, 1]"));
    }
    let m = dataset.len();
    let scores = dataset
        .rows()
        .map(|x| reference.predict_raw(x).map(f64::abs))
        .collect::<Result<Vec<_>>>()?;
    let mut ranked: Vec<usize> = (0..m).collect();
    ranked.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));

    let pool = ((rate_pool * m as f64).round() as usize).min(m);
    let n_flip = ((flip_fraction * pool as f64).round() as usize).min(pool);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = index::sample(&mut rng, pool, n_flip)
        .into_iter()
        .map(|k| ranked[k])
        .collect();
    indices.sort_unstable();

    let mut targets = dataset.targets().to_vec();
    for &i in &indices {
        targets[i] = -targets[i];
    }
    Ok(Injected {
        dataset: dataset.with_targets(targets),
        indices,
    })
}

/// Additive Gaussian target noise for regression data.
///
/// A seeded random `round(rate · m)` targets receive `ν ~ N(0, d²)` with
/// `d = ½·mean(y)`. When the mean is exactly zero `d = ½·mean(|y|)` is used
/// instead and a note is recorded in the dataset meta.
pub fn inject_target_noise(dataset: &Dataset, rate: f64, seed: u64) -> Result<Injected> {
    if dataset.task() != Task::Regression {
        return Err(Error::invalid("target noise requires a regression dataset"));
    }
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::invalid("outlier rate must lie in [0, 1]"));
    }
    let m = dataset.len();
    let y = dataset.targets();
    let mean = y.iter().sum::<f64>() / m as f64;
    let mut d = 0.5 * mean;
    let mut fallback = false;
    if mean == 0.0 {
        d = 0.5 * y.iter().map(|v| v.abs()).sum::<f64>() / m as f64;
        fallback = true;
    }

    let n = ((rate * m as f64).round() as usize).min(m);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices = index::sample(&mut rng, m, n).into_vec();
    indices.sort_unstable();

    let mut targets = y.to_vec();
    if d != 0.0 {
        let noise = Normal::new(0.0, d.abs()).map_err(|e| Error::invalid(e.to_string()))?;
        for &i in &indices {
            targets[i] += noise.sample(&mut rng);
        }
    }
    let mut out = dataset.with_targets(targets);
    if fallback {
        out.meta
            .notes
            .push(format!("target mean is zero; noise scale d = 0.5*mean(|y|) = {d}"));
    }
    Ok(Injected { dataset: out, indices })
}

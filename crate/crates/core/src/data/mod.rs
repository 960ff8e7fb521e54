//! Datasets and the experimental data protocol: ingestion, normalization,
//! seeded splits, outlier injection and synthetic generators.

mod normalize;
mod outliers;
mod sparse_text;
mod synthetic;

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use normalize::{normalize_minmax, NormalizationSpec};
pub use outliers::{inject_label_outliers, inject_target_noise, Injected};
pub use sparse_text::{parse_sparse_text, read_sparse_text};
pub use synthetic::{make_synthetic_linear, make_synthetic_regression, SYNTHETIC_MEAN_SCALE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classification,
    Regression,
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Task::Classification => "classification",
            Task::Regression => "regression",
        })
    }
}

/// Provenance of a dataset.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub source: String,
    pub seed: Option<u64>,
    /// Free-form flags recorded by transformations (e.g. noise-scale fallbacks).
    pub notes: Vec<String>,
}

/// A dense `m × l` feature matrix (row-major) with one target per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    n_features: usize,
    targets: Vec<f64>,
    task: Task,
    pub meta: Meta,
}

impl Dataset {
    /// Builds a dataset from row-major features.
    ///
    /// Rejects empty data, ragged shapes, non-finite values and, for
    /// classification, targets outside `{-1, +1}`.
    pub fn new(features: Vec<f64>, n_features: usize, targets: Vec<f64>, task: Task) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::invalid("dataset has no samples"));
        }
        if n_features == 0 {
            return Err(Error::invalid("dataset has no features"));
        }
        if features.len() != targets.len() * n_features {
            return Err(Error::invalid(format!(
                "feature buffer has {} values, expected {} rows x {} features",
                features.len(),
                targets.len(),
                n_features
            )));
        }
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite feature at row {}, column {}",
                i / n_features,
                i % n_features
            )));
        }
        if let Some(i) = targets.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite target at row {i}")));
        }
        if task == Task::Classification {
            if let Some(i) = targets.iter().position(|&v| v != 1.0 && v != -1.0) {
                return Err(Error::invalid(format!(
                    "classification target {} at row {i} is not -1 or +1",
                    targets[i]
                )));
            }
        }
        Ok(Dataset {
            features,
            n_features,
            targets,
            task,
            meta: Meta::default(),
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], targets: Vec<f64>, task: Task) -> Result<Self> {
        let l = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != l) {
            return Err(Error::invalid(format!(
                "row {i} has {} features, expected {l}",
                rows[i].len()
            )));
        }
        Self::new(rows.concat(), l, targets, task)
    }

    pub fn with_meta(mut self, source: impl Into<String>, seed: Option<u64>) -> Self {
        self.meta.source = source.into();
        self.meta.seed = seed;
        self
    }

    /// Number of samples `m`.
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Number of features `l`.
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.features.chunks_exact(self.n_features)
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Rows at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        let mut targets = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::invalid(format!(
                    "row index {i} out of range for m = {}",
                    self.len()
                )));
            }
            features.extend_from_slice(self.row(i));
            targets.push(self.targets[i]);
        }
        let mut out = Dataset::new(features, self.n_features, targets, self.task)?;
        out.meta = self.meta.clone();
        Ok(out)
    }

    /// Appends the rows of `other` (same width and task).
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if other.n_features != self.n_features || other.task != self.task {
            return Err(Error::invalid("cannot concatenate datasets of different shape or task"));
        }
        let mut features = self.features.clone();
        features.extend_from_slice(&other.features);
        let mut targets = self.targets.clone();
        targets.extend_from_slice(&other.targets);
        let mut out = Dataset::new(features, self.n_features, targets, self.task)?;
        out.meta = self.meta.clone();
        Ok(out)
    }

    pub(crate) fn with_targets(&self, targets: Vec<f64>) -> Dataset {
        debug_assert_eq!(targets.len(), self.targets.len());
        Dataset {
            features: self.features.clone(),
            n_features: self.n_features,
            targets,
            task: self.task,
            meta: self.meta.clone(),
        }
    }

    /// CSV export: a `m,l,task` header line, then one `target,x1,...,xl` line
    /// per sample.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{},{},{}\n", self.len(), self.n_features, self.task);
        for (row, y) in self.rows().zip(&self.targets) {
            let _ = write!(out, "{y}");
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Seeded shuffle split into `(train, test)`.
///
/// The training side receives `round(fraction · m)` samples; both sides keep
/// the original row order.
pub fn split(dataset: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train fraction {train_fraction} must lie in (0, 1)"
        )));
    }
    let m = dataset.len();
    let n_train = (train_fraction * m as f64).round() as usize;
    if n_train == 0 || n_train == m {
        return Err(Error::invalid(format!(
            "train fraction {train_fraction} on m = {m} leaves one side of the split empty"
        )));
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (train_idx, test_idx) = order.split_at_mut(n_train);
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok((dataset.subset(train_idx)?, dataset.subset(test_idx)?))
}

/// Seeded assignment of `m` samples to `k` folds; returns the test-fold
/// index lists in canonical order.
pub fn kfold_indices(m: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 || k > m {
        return Err(Error::invalid(format!("cannot form {k} folds from {m} samples")));
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::new(); k];
    for (pos, i) in order.into_iter().enumerate() {
        folds[pos % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}
